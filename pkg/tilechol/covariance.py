"""
Synthetic geospatial problems: random locations in the unit square and
Matern covariance matrices built directly in tiled form.

Locations come from numpy's PCG64 generator seeded with the run seed, so a
(n, seed) pair yields the same points on every platform. By default the
points are then sorted along a Morton (Z-order) curve so that nearby points
get nearby indices and the covariance norm gathers around the diagonal.
"""
import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, confloat

from tilechol.constants import CORRELATION_PRESETS, SUPPORTED_SMOOTHNESS
from tilechol.core import Precision, TileBuffer, TileIndex, TiledSymmetricMatrix
from tilechol.exceptions import MalformedInput, UnsupportedSmoothness

logger = logging.getLogger(__name__)

_MORTON_BITS = 16


@dataclass(frozen=True)
class SpatialLocations:
    coords: np.ndarray
    seed: int

    def __len__(self) -> int:
        return self.coords.shape[0]


class MaternParams(BaseModel):
    """theta = (sigma_sq, range_a, smoothness_nu) plus an optional nugget"""

    sigma_sq: confloat(gt=0) = 1.0
    range_a: confloat(gt=0)
    smoothness_nu: confloat(gt=0) = 0.5
    nugget: confloat(ge=0) = 0.0

    class Config:
        allow_mutation = False
        extra = "forbid"

    @classmethod
    def preset(cls, name: str, nugget: float = 0.0) -> "MaternParams":
        sigma_sq, range_a, nu = CORRELATION_PRESETS[name]
        return cls(sigma_sq=sigma_sq, range_a=range_a, smoothness_nu=nu, nugget=nugget)

    def theta(self) -> Tuple[float, float, float]:
        return (self.sigma_sq, self.range_a, self.smoothness_nu)


def _part1by1(v: np.ndarray) -> np.ndarray:
    v = v.astype(np.uint64) & np.uint64(0x0000FFFF)
    v = (v | (v << np.uint64(8))) & np.uint64(0x00FF00FF)
    v = (v | (v << np.uint64(4))) & np.uint64(0x0F0F0F0F)
    v = (v | (v << np.uint64(2))) & np.uint64(0x33333333)
    v = (v | (v << np.uint64(1))) & np.uint64(0x55555555)
    return v


def morton_order(coords: np.ndarray) -> np.ndarray:
    """Permutation sorting points in [0,1]^2 along a Z-order curve"""
    scale = (1 << _MORTON_BITS) - 1
    cells = np.clip(np.floor(coords * scale), 0, scale).astype(np.uint64)
    codes = _part1by1(cells[:, 0]) | (_part1by1(cells[:, 1]) << np.uint64(1))
    return np.argsort(codes, kind="stable")


def gen_locations(n: int, seed: int, sort: bool = True) -> SpatialLocations:
    """n distinct points drawn uniformly in the unit square."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    coords = rng.random((n, 2))
    while True:
        _, first = np.unique(coords, axis=0, return_index=True)
        if len(first) == n:
            break
        dup = np.setdiff1d(np.arange(n), first)
        logger.debug("regenerating %s colliding locations", len(dup))
        coords[dup] = rng.random((len(dup), 2))
    if sort:
        coords = coords[morton_order(coords)]
    return SpatialLocations(coords=coords, seed=seed)


def matern_values(h: np.ndarray, p: MaternParams) -> np.ndarray:
    """Closed-form half-integer Matern for an array of distances h > 0."""
    nu = p.smoothness_nu
    x = np.asarray(h, dtype=np.float64) / p.range_a
    if nu == 0.5:
        return p.sigma_sq * np.exp(-x)
    if nu == 1.5:
        return p.sigma_sq * (1.0 + x) * np.exp(-x)
    if nu == 2.5:
        return p.sigma_sq * (1.0 + x + x * x / 3.0) * np.exp(-x)
    raise UnsupportedSmoothness(f"smoothness {nu} not in {SUPPORTED_SMOOTHNESS}", nu=nu)


def matern(h: float, p: MaternParams) -> float:
    if h < 0:
        raise ValueError("distance must be non-negative")
    if p.smoothness_nu not in SUPPORTED_SMOOTHNESS:
        raise UnsupportedSmoothness(f"smoothness {p.smoothness_nu} not in {SUPPORTED_SMOOTHNESS}",
                                    nu=p.smoothness_nu)
    if h == 0:
        return p.sigma_sq + p.nugget
    return float(matern_values(np.array([h]), p)[0])


def _covariance_tile(A: TiledSymmetricMatrix, coords: np.ndarray, p: MaternParams,
                     idx: TileIndex) -> TileBuffer:
    nb = A.nb
    r0, c0 = idx.row * nb, idx.col * nb
    rows = A.valid_extent(idx.row)
    cols = A.valid_extent(idx.col)
    xi = coords[r0:r0 + rows]
    xj = coords[c0:c0 + cols]
    h = np.hypot(xi[:, None, 0] - xj[None, :, 0], xi[:, None, 1] - xj[None, :, 1])

    block = np.eye(nb, dtype=np.float64) if idx.is_diagonal else np.zeros((nb, nb))
    values = matern_values(h, p)
    if idx.is_diagonal:
        np.fill_diagonal(values, p.sigma_sq + p.nugget)
    block[:rows, :cols] = values
    return TileBuffer(block, Precision.FP64, quantized=True)


def build_covariance(locs: SpatialLocations, p: MaternParams, nb: int,
                     workers: Optional[int] = None) -> TiledSymmetricMatrix:
    """Sigma_theta in tiled lower-triangular form, every tile FP64.

    Tiles are independent, so they are built on a thread pool; the result
    does not depend on ``workers``.
    """
    if len(locs) < 1:
        raise ValueError("no locations")
    if p.smoothness_nu not in SUPPORTED_SMOOTHNESS:
        raise UnsupportedSmoothness(f"smoothness {p.smoothness_nu} not in {SUPPORTED_SMOOTHNESS}",
                                    nu=p.smoothness_nu)
    A = TiledSymmetricMatrix(len(locs), nb)
    indices = A.indices()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        tiles = pool.map(lambda idx: _covariance_tile(A, locs.coords, p, idx), indices)
        for idx, t in zip(indices, tiles):
            A[idx] = t
    logger.debug("built covariance %s with theta=%s nugget=%s", A, p.theta(), p.nugget)
    return A


def write_locations_csv(path: Union[str, Path], locs: SpatialLocations) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=["x", "y"], lineterminator="\n")
        writer.writeheader()
        for x, y in locs.coords:
            writer.writerow({"x": repr(float(x)), "y": repr(float(y))})


def read_locations_csv(path: Union[str, Path], seed: int = 0) -> SpatialLocations:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != ["x", "y"]:
            raise MalformedInput(f"{path}: expected header x,y", reason="bad header")
        try:
            coords = [(float(row["x"]), float(row["y"])) for row in reader]
        except (TypeError, ValueError) as e:
            raise MalformedInput(f"{path}: {e}", reason="bad value") from e
    if not coords:
        raise MalformedInput(f"{path}: no locations", reason="empty")
    return SpatialLocations(coords=np.array(coords, dtype=np.float64), seed=seed)
