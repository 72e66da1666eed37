"""Text and PPM pictures of a precision map, lower triangle only."""
from pathlib import Path
from typing import Union

import numpy as np

from tilechol.core import Precision, TileIndex
from tilechol.planner import PrecisionMap

GLYPHS = {
    Precision.FP64: "#",
    Precision.FP32: "*",
    Precision.FP16: "+",
    Precision.FP8E4M3: ".",
}

COLORS = {
    Precision.FP64: (31, 58, 147),
    Precision.FP32: (46, 139, 87),
    Precision.FP16: (240, 173, 0),
    Precision.FP8E4M3: (200, 40, 40),
}

BACKGROUND = (255, 255, 255)


def render_ascii(pmap: PrecisionMap) -> str:
    lines = []
    for i in range(pmap.nt):
        lines.append("".join(GLYPHS[pmap[TileIndex(i, j)]] for j in range(i + 1)))
    return "\n".join(lines) + "\n"


def legend(pmap: PrecisionMap) -> str:
    counts = pmap.counts()
    return "\n".join(f"{GLYPHS[Precision(name)]} {name}: {count}"
                     for name, count in counts.items()) + "\n"


def render_pixels(pmap: PrecisionMap, scale: int = 8) -> np.ndarray:
    if scale < 1:
        raise ValueError("scale must be at least 1")
    size = pmap.nt * scale
    pixels = np.empty((size, size, 3), dtype=np.uint8)
    pixels[:] = BACKGROUND
    for idx, p in pmap.assignment.items():
        r, c = idx.row * scale, idx.col * scale
        pixels[r:r + scale, c:c + scale] = COLORS[p]
    return pixels


def write_ppm(path: Union[str, Path], pmap: PrecisionMap, scale: int = 8) -> None:
    pixels = render_pixels(pmap, scale)
    height, width, _ = pixels.shape
    with open(path, "wb") as f:
        f.write(f"P6\n{width} {height}\n255\n".encode("ascii"))
        f.write(pixels.tobytes())
