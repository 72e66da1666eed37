"""
Gaussian log-likelihood and the accuracy metric built from it.

For a Cholesky factor L of Sigma and observations y

    loglik = -(n/2) log(2 pi) - 1/2 log|Sigma| - 1/2 y^T Sigma^-1 y

with log|Sigma| = 2 sum_i log L_ii and y^T Sigma^-1 y = ||z||^2 where
L z = y. The divergence reported between an exact and an approximate
pipeline is the plain difference of their log-likelihoods at y = 0, so it
reduces to half the difference of the log-determinants; no trace term is
added.

Everything here is computed in FP64 whatever the tile storage precisions.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import solve_triangular

from tilechol.core import TileIndex, TiledSymmetricMatrix, frobenius_norm_matrix
from tilechol.exceptions import DimensionMismatch, NonPositiveDiagonal, ZeroMatrix

logger = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class LikelihoodResult:
    log_det: float
    quad_form: float
    loglik: float
    n: int


def log_det_from_factor(L: TiledSymmetricMatrix) -> float:
    total = 0.0
    for k in range(L.nt):
        diag = np.diagonal(L.logical_block(TileIndex(k, k)))
        bad = np.flatnonzero(~(diag > 0.0))
        if bad.size:
            index = k * L.nb + int(bad[0])
            raise NonPositiveDiagonal(f"L[{index},{index}] = {diag[bad[0]]}", index=index)
        total += float(np.sum(np.log(diag)))
    return 2.0 * total


def forward_solve(L: TiledSymmetricMatrix, y: np.ndarray) -> np.ndarray:
    """z with L z = y, one tile row at a time"""
    nb = L.nb
    z = np.zeros(L.n, dtype=np.float64)
    for i in range(L.nt):
        r0 = i * nb
        rows = L.valid_extent(i)
        rhs = np.array(y[r0:r0 + rows], dtype=np.float64)
        for j in range(i):
            c0 = j * nb
            rhs -= L.logical_block(TileIndex(i, j)) @ z[c0:c0 + L.valid_extent(j)]
        z[r0:r0 + rows] = solve_triangular(L.logical_block(TileIndex(i, i)), rhs, lower=True,
                                           check_finite=False)
    return z


def log_likelihood(L: TiledSymmetricMatrix, y: Optional[np.ndarray] = None) -> LikelihoodResult:
    """Log-likelihood from a completed factor; ``y=None`` means the zero vector."""
    n = L.n
    log_det = log_det_from_factor(L)
    if y is None:
        quad_form = 0.0
    else:
        y = np.asarray(y, dtype=np.float64).ravel()
        if y.shape[0] != n:
            raise DimensionMismatch(f"observation vector has {y.shape[0]} entries, expected {n}",
                                    expected=n, actual=int(y.shape[0]))
        z = forward_solve(L, y)
        quad_form = float(z @ z)
    loglik = -0.5 * n * LOG_2PI - 0.5 * log_det - 0.5 * quad_form
    return LikelihoodResult(log_det=log_det, quad_form=quad_form, loglik=loglik, n=n)


def kl_divergence(loglik_exact: float, loglik_approx: float) -> float:
    """Signed log-likelihood gap; without a trace term it can come out negative"""
    return loglik_exact - loglik_approx


def residual_norm(A: TiledSymmetricMatrix, L: TiledSymmetricMatrix) -> float:
    """||A - L L^T||_F / ||A||_F with both densified in FP64"""
    norm = frobenius_norm_matrix(A)
    if norm == 0.0:
        raise ZeroMatrix("residual of a zero matrix is undefined")
    lower = L.to_dense(mirror=False)
    return float(np.linalg.norm(A.to_dense() - lower @ lower.T) / norm)


def sample_observations(L: TiledSymmetricMatrix, seed: int) -> np.ndarray:
    """A draw y = L z, z standard normal, distributed as N(0, L L^T)."""
    rng = np.random.Generator(np.random.PCG64(seed))
    z = rng.standard_normal(L.n)
    return L.to_dense(mirror=False) @ z
