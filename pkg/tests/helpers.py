import math

import numpy as np

from tilechol.core import Precision, TiledSymmetricMatrix
from tilechol.covariance import MaternParams, build_covariance, gen_locations
from tilechol.planner import uniform_map
from tilechol.scheduler import ClusterConfig, Variant, matrix_bytes

WEAK = MaternParams(sigma_sq=1.0, range_a=0.02627, smoothness_nu=0.5)
MEDIUM = MaternParams(sigma_sq=1.0, range_a=0.078809, smoothness_nu=0.5)
STRONG = MaternParams(sigma_sq=1.0, range_a=0.210158, smoothness_nu=0.5)


def random_spd(n: int, seed: int = 0) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(seed))
    m = rng.standard_normal((n, n))
    s = m @ m.T
    return 0.5 * (s + s.T) + n * np.eye(n)


def spd_tiles(n: int, nb: int, seed: int = 0) -> TiledSymmetricMatrix:
    return TiledSymmetricMatrix.from_dense(random_spd(n, seed), nb)


def covariance(n: int, nb: int, params: MaternParams = WEAK,
               seed: int = 0) -> TiledSymmetricMatrix:
    return build_covariance(gen_locations(n, seed), params, nb)


def fp64_bytes(A: TiledSymmetricMatrix) -> int:
    return matrix_bytes(A, uniform_map(A.nt, Precision.FP64))


def cluster(A: TiledSymmetricMatrix, variant: Variant = Variant.V3, devices: int = 1,
            streams: int = 1, fraction: float = 1.0, **kwargs) -> ClusterConfig:
    return ClusterConfig(devices=devices, streams_per_device=streams,
                         capacity_bytes=int(fraction * fp64_bytes(A)), variant=variant, **kwargs)


# Element by element reference kernels. Every element sees the same sequence
# of rounded multiplies and subtractions as the tile kernels.


def naive_potrf(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    for k in range(n):
        a[k, k] = math.sqrt(a[k, k])
        for i in range(k + 1, n):
            a[i, k] = a[i, k] / a[k, k]
        for j in range(k + 1, n):
            for i in range(j, n):
                a[i, j] = a[i, j] - a[i, k] * a[j, k]
    return np.tril(a)


def naive_trsm(a: np.ndarray, lkk: np.ndarray) -> np.ndarray:
    rows, cols = a.shape
    x = np.zeros_like(a, dtype=np.float64)
    for i in range(rows):
        for p in range(cols):
            s = a[i, p]
            for q in range(p):
                s = s - x[i, q] * lkk[p, q]
            x[i, p] = s / lkk[p, p]
    return x


def naive_gemm(c: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.array(c, dtype=np.float64)
    rows, cols = out.shape
    for i in range(rows):
        for j in range(cols):
            s = out[i, j]
            for p in range(a.shape[1]):
                s = s - a[i, p] * b[j, p]
            out[i, j] = s
    return out


def naive_syrk(c: np.ndarray, a: np.ndarray) -> np.ndarray:
    lower = np.tril(naive_gemm(c, a, a))
    return lower + np.tril(lower, -1).T


def dense_loglik(dense: np.ndarray, y=None):
    """log|S|, y^T S^-1 y and the log-likelihood from numpy's dense routines"""
    n = dense.shape[0]
    chol = np.linalg.cholesky(dense)
    log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
    quad = 0.0
    if y is not None:
        quad = float(y @ np.linalg.solve(dense, y))
    return log_det, quad, -0.5 * n * math.log(2 * math.pi) - 0.5 * log_det - 0.5 * quad
