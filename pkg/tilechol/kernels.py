"""
The four tile kernels of the left-looking factorization.

Every kernel computes in FP64 with a fixed, ascending summation order and
quantizes its output to the storage precision of the output tile. The loop
order inside each kernel is part of its contract: the same input bits always
produce the same output bits, whatever scheduled them.
"""
import enum
import math
from typing import Optional

import numpy as np

from tilechol.core import Precision, TileBuffer, quantize
from tilechol.exceptions import NotPositiveDefinite, SingularDiagonal


class KernelKind(str, enum.Enum):
    POTRF = "POTRF"
    TRSM = "TRSM"
    SYRK = "SYRK"
    GEMM = "GEMM"

    def flops(self, nb: int) -> float:
        """Nominal floating point operation count for one call on nb x nb tiles"""
        if self is KernelKind.POTRF:
            return nb**3 / 3.0
        if self is KernelKind.GEMM:
            return 2.0 * nb**3
        return float(nb**3)


def _store(values: np.ndarray, p: Precision) -> TileBuffer:
    return TileBuffer(quantize(values, p), p, quantized=True)


def potrf_tile(Akk: TileBuffer, out_precision: Optional[Precision] = None) -> TileBuffer:
    """Unblocked Cholesky of one tile; returns L with the strict upper triangle zeroed."""
    a = Akk.writable_copy()
    nb = a.shape[0]
    for k in range(nb):
        pivot = a[k, k]
        if not pivot > 0.0:
            raise NotPositiveDefinite(f"pivot {k} is {pivot}", pivot_index=k)
        diag = math.sqrt(pivot)
        a[k, k] = diag
        if k + 1 < nb:
            a[k + 1:, k] /= diag
            col = a[k + 1:, k]
            a[k + 1:, k + 1:] -= np.multiply.outer(col, col)
    return _store(np.tril(a), out_precision or Akk.precision)


def trsm_tile(Amk: TileBuffer, Lkk: TileBuffer,
              out_precision: Optional[Precision] = None) -> TileBuffer:
    """Solve X * Lkk^T = Amk for X, one column at a time."""
    lkk = Lkk.elements
    for i in range(lkk.shape[0]):
        if lkk[i, i] == 0.0:
            raise SingularDiagonal(f"diagonal entry {i} is zero", index=i)

    x = Amk.writable_copy()
    nb = x.shape[1]
    for p in range(nb):
        x[:, p] /= lkk[p, p]
        if p + 1 < nb:
            x[:, p + 1:] -= np.multiply.outer(x[:, p], lkk[p + 1:, p])
    return _store(x, out_precision or Amk.precision)


def syrk_update(Akk: TileBuffer, Akn: TileBuffer,
                out_precision: Optional[Precision] = None) -> TileBuffer:
    """Akk - Akn * Akn^T, lower triangle mirrored into the upper one."""
    c = Akk.writable_copy()
    a = Akn.elements
    for p in range(a.shape[1]):
        c -= np.multiply.outer(a[:, p], a[:, p])
    lower = np.tril(c)
    return _store(lower + np.tril(lower, -1).T, out_precision or Akk.precision)


def gemm_update(Amk: TileBuffer, Amn: TileBuffer, Akn: TileBuffer,
                out_precision: Optional[Precision] = None) -> TileBuffer:
    """-Amn * Akn^T + Amk, with Amk as the accumulator."""
    c = Amk.writable_copy()
    a = Amn.elements
    b = Akn.elements
    for p in range(a.shape[1]):
        c -= np.multiply.outer(a[:, p], b[:, p])
    return _store(c, out_precision or Amk.precision)
