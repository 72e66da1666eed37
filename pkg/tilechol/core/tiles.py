import math
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from tilechol.core.precision import Precision, quantize


@dataclass(frozen=True, order=True)
class TileIndex:
    """Position of a lower-triangular tile in the tile grid"""

    row: int
    col: int

    def __post_init__(self):
        if self.col < 0 or self.row < self.col:
            raise ValueError(f"tile ({self.row}, {self.col}) is not in the lower triangle")

    @property
    def is_diagonal(self) -> bool:
        return self.row == self.col

    def as_tuple(self) -> Tuple[int, int]:
        return (self.row, self.col)

    def __str__(self) -> str:
        return f"({self.row},{self.col})"


class TileBuffer:
    """An nb x nb column-major tile whose values lie in its precision's value set.

    The element array is made read-only on construction; kernels always
    return new buffers.
    """

    __slots__ = ("elements", "precision")

    def __init__(self, elements: np.ndarray, precision: Precision = Precision.FP64,
                 quantized: bool = False):
        elements = np.asarray(elements, dtype=np.float64)
        if elements.ndim != 2 or elements.shape[0] != elements.shape[1]:
            raise ValueError(f"tile must be square, got shape {elements.shape}")
        if not quantized:
            elements = quantize(elements, precision)
        elements = np.array(elements, dtype=np.float64, order="F")
        elements.flags.writeable = False
        self.elements = elements
        self.precision = precision

    @property
    def nb(self) -> int:
        return self.elements.shape[0]

    @property
    def nbytes(self) -> int:
        return self.nb * self.nb * self.precision.bytes_per_element

    def writable_copy(self) -> np.ndarray:
        return np.array(self.elements, dtype=np.float64, order="F", copy=True)

    def same_bits(self, other: "TileBuffer") -> bool:
        return (self.precision is other.precision
                and np.array_equal(self.elements.view(np.uint64), other.elements.view(np.uint64)))

    def __repr__(self) -> str:
        return f"TileBuffer(nb={self.nb}, precision={self.precision})"


def convert_tile(t: TileBuffer, p: Precision) -> TileBuffer:
    """Element-wise conversion of ``t`` to precision ``p``."""
    if p is t.precision:
        return TileBuffer(t.elements, p, quantized=True)
    if p > t.precision:
        # every value of a less precise format is representable in a more precise one
        return TileBuffer(t.elements, p, quantized=True)
    return TileBuffer(quantize(t.elements, p), p, quantized=True)


def frobenius_norm_tile(t: TileBuffer) -> float:
    return _frobenius(t.elements)


def _squared_norm(block: np.ndarray) -> float:
    flat = np.ravel(block, order="F")
    return float(np.dot(flat, flat))


def _frobenius(block: np.ndarray) -> float:
    return math.sqrt(_squared_norm(block))


def tile_count(nt: int) -> int:
    return nt * (nt + 1) // 2


def lower_indices(nt: int) -> List[TileIndex]:
    """Lower-triangular tile indices in column-major tile order"""
    return [TileIndex(m, k) for k in range(nt) for m in range(k, nt)]


class TiledSymmetricMatrix:
    """Host resident lower triangle of a symmetric matrix, stored as tiles.

    When ``n`` is not a multiple of ``nb`` the last tile row and column are
    zero padded, with ones on the padded diagonal.
    """

    def __init__(self, n: int, nb: int, tiles: Optional[Dict[TileIndex, TileBuffer]] = None):
        if n < 1 or nb < 1:
            raise ValueError("n and nb must be positive")
        self.n = n
        self.nb = nb
        self.nt = -(-n // nb)
        self.tiles: Dict[TileIndex, TileBuffer] = dict(tiles or {})
        for idx in self.tiles:
            if idx.row >= self.nt:
                raise ValueError(f"tile {idx} outside a {self.nt}x{self.nt} grid")

    @classmethod
    def from_dense(cls, dense: np.ndarray, nb: int) -> "TiledSymmetricMatrix":
        dense = np.asarray(dense, dtype=np.float64)
        n = dense.shape[0]
        nt = -(-n // nb)
        padded = np.eye(nt * nb, dtype=np.float64)
        padded[:n, :n] = dense
        tiles = {}
        for idx in lower_indices(nt):
            r, c = idx.row * nb, idx.col * nb
            block = padded[r:r + nb, c:c + nb]
            tiles[idx] = TileBuffer(block, Precision.FP64, quantized=True)
        return cls(n, nb, tiles)

    def to_dense(self, mirror: bool = True) -> np.ndarray:
        """Densify the lower triangle; when ``mirror`` the upper half is its transpose."""
        nb = self.nb
        full = np.zeros((self.nt * nb, self.nt * nb), dtype=np.float64)
        for idx, t in self.tiles.items():
            r, c = idx.row * nb, idx.col * nb
            full[r:r + nb, c:c + nb] = t.elements
        full = full[:self.n, :self.n]
        lower = np.tril(full)
        if not mirror:
            return lower
        return lower + np.tril(lower, -1).T

    def indices(self) -> List[TileIndex]:
        return lower_indices(self.nt)

    def __iter__(self) -> Iterator[TileIndex]:
        return iter(self.indices())

    def __getitem__(self, idx: TileIndex) -> TileBuffer:
        return self.tiles[idx]

    def __setitem__(self, idx: TileIndex, t: TileBuffer) -> None:
        self.tiles[idx] = t

    def copy(self) -> "TiledSymmetricMatrix":
        # TileBuffers are immutable, a shallow copy of the map is enough
        return TiledSymmetricMatrix(self.n, self.nb, self.tiles)

    def valid_extent(self, tile_pos: int) -> int:
        """Number of unpadded rows (or columns) of tile row ``tile_pos``"""
        return min(self.nb, self.n - tile_pos * self.nb)

    def logical_block(self, idx: TileIndex) -> np.ndarray:
        rows = self.valid_extent(idx.row)
        cols = self.valid_extent(idx.col)
        return self.tiles[idx].elements[:rows, :cols]

    def logical_norm(self, idx: TileIndex) -> float:
        return _frobenius(self.logical_block(idx))

    def same_bits(self, other: "TiledSymmetricMatrix") -> bool:
        if (self.n, self.nb) != (other.n, other.nb) or set(self.tiles) != set(other.tiles):
            return False
        return all(t.same_bits(other.tiles[idx]) for idx, t in self.tiles.items())

    def __repr__(self) -> str:
        return f"TiledSymmetricMatrix(n={self.n}, nb={self.nb}, Nt={self.nt})"


def frobenius_norm_matrix(A: TiledSymmetricMatrix) -> float:
    """Norm of the full symmetric matrix from its stored lower triangle.

    Off-diagonal tiles count twice; padding is excluded.
    """
    diag = 0.0
    offdiag = 0.0
    for idx in A.indices():
        sq = _squared_norm(A.logical_block(idx))
        if idx.is_diagonal:
            diag += sq
        else:
            offdiag += sq
    return math.sqrt(diag + 2.0 * offdiag)
