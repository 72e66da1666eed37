"""
Binary tile dump, used to hand matrices between CLI invocations and for
debugging. Layout, all little endian:

    uint64 n, uint64 nb, uint64 Nt
    uint8  precision code per lower tile, column-major tile order
    tiles in the same order, each nb*nb float64 values in column-major order
"""
import logging
from pathlib import Path
from typing import Union

import numpy as np

from tilechol.core.precision import Precision
from tilechol.core.tiles import TileBuffer, TiledSymmetricMatrix, lower_indices, tile_count
from tilechol.exceptions import MalformedInput

logger = logging.getLogger(__name__)

_HEADER = np.dtype("<u8")
_ELEMENT = np.dtype("<f8")


def dump_matrix(path: Union[str, Path], A: TiledSymmetricMatrix) -> None:
    indices = lower_indices(A.nt)
    with open(path, "wb") as f:
        f.write(np.array([A.n, A.nb, A.nt], dtype=_HEADER).tobytes())
        f.write(np.array([A[idx].precision.code for idx in indices], dtype=np.uint8).tobytes())
        for idx in indices:
            f.write(np.ravel(A[idx].elements, order="F").astype(_ELEMENT).tobytes())
    logger.debug("wrote %s tiles of %s to %s", len(indices), A, path)


def load_matrix(path: Union[str, Path]) -> TiledSymmetricMatrix:
    raw = Path(path).read_bytes()
    if len(raw) < 3 * _HEADER.itemsize:
        raise MalformedInput(f"{path}: truncated header", reason="truncated header")
    n, nb, nt = (int(v) for v in np.frombuffer(raw, dtype=_HEADER, count=3))
    if nb == 0 or nt != -(-n // nb):
        raise MalformedInput(f"{path}: inconsistent header n={n} nb={nb} Nt={nt}",
                             reason="inconsistent header")

    count = tile_count(nt)
    offset = 3 * _HEADER.itemsize
    expected = offset + count + count * nb * nb * _ELEMENT.itemsize
    if len(raw) != expected:
        raise MalformedInput(f"{path}: expected {expected} bytes, found {len(raw)}",
                             reason="size mismatch")

    codes = np.frombuffer(raw, dtype=np.uint8, count=count, offset=offset)
    offset += count
    tiles = {}
    for idx, code in zip(lower_indices(nt), codes):
        try:
            p = Precision.from_code(int(code))
        except ValueError as e:
            raise MalformedInput(f"{path}: {e}", reason="unknown precision code") from e
        values = np.frombuffer(raw, dtype=_ELEMENT, count=nb * nb, offset=offset)
        offset += nb * nb * _ELEMENT.itemsize
        tiles[idx] = TileBuffer(values.reshape((nb, nb), order="F"), p)
    return TiledSymmetricMatrix(n, nb, tiles)
