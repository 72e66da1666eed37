"""
End to end runs: build or load the covariance, plan precisions, factorize,
and evaluate the factor.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

from tilechol.config import RunConfig
from tilechol.core import Precision, TiledSymmetricMatrix, load_matrix
from tilechol.covariance import SpatialLocations, build_covariance, gen_locations
from tilechol.planner import PrecisionMap, plan_precisions, uniform_map
from tilechol.report import FactorReport, build_report
from tilechol.scheduler import FactorizationResult, matrix_bytes, run_factorization
from tilechol.stats import (
    LikelihoodResult,
    kl_divergence,
    log_likelihood,
    residual_norm,
    sample_observations,
)

logger = logging.getLogger(__name__)


@dataclass
class RunOutcome:
    cfg: RunConfig
    A: TiledSymmetricMatrix
    pmap: PrecisionMap
    result: FactorizationResult
    residual: float
    likelihood: LikelihoodResult
    kl: float
    reference: Optional[FactorizationResult] = None

    @property
    def kl_abs(self) -> float:
        """Size of the divergence; accuracy trends are judged on it"""
        return abs(self.kl)

    def report(self) -> FactorReport:
        return build_report(self.cfg, self.result, self.pmap, self.residual, self.likelihood,
                            self.kl)


def generate_problem(cfg: RunConfig) -> Tuple[SpatialLocations, TiledSymmetricMatrix]:
    locs = gen_locations(cfg.n, cfg.seed, sort=cfg.sort_locations)
    return locs, build_covariance(locs, cfg.matern_params(), cfg.nb)


def load_problem(cfg: RunConfig) -> TiledSymmetricMatrix:
    if cfg.matrix_path is not None:
        A = load_matrix(cfg.matrix_path)
        if (A.n, A.nb) != (cfg.n, cfg.nb):
            logger.warning("matrix dump %s has n=%s nb=%s, overriding the configured n=%s nb=%s",
                           cfg.matrix_path, A.n, A.nb, cfg.n, cfg.nb)
        return A
    return generate_problem(cfg)[1]


def run_case(cfg: RunConfig, A: Optional[TiledSymmetricMatrix] = None) -> RunOutcome:
    """Factorize one configuration; A (FP64) is generated from cfg when not given.

    Outside fp64 mode an all-FP64 reference factorization under the same
    cluster configuration supplies the exact log-likelihood for the KL
    divergence.
    """
    if A is None:
        A = load_problem(cfg)
    cluster = cfg.cluster_config(matrix_bytes(A, uniform_map(A.nt, Precision.FP64)))
    pmap = plan_precisions(A, cfg.eps_target, cfg.allowed())

    result = run_factorization(A.copy(), pmap, cluster)
    reference = None
    if cfg.precision_mode != "fp64":
        reference = run_factorization(A.copy(), uniform_map(A.nt, Precision.FP64), cluster)
    exact = reference or result

    y = None
    if cfg.observations == "sampled":
        y = sample_observations(exact.L, cfg.seed)
    likelihood = log_likelihood(result.L, y)
    kl = 0.0
    if reference is not None:
        kl = kl_divergence(log_likelihood(reference.L, y).loglik, likelihood.loglik)

    residual = residual_norm(A, result.L)
    logger.info("n=%s variant=%s mode=%s residual=%.3e kl=%.3e bytes=%s", A.n,
                cfg.variant.value, cfg.precision_mode, residual, kl, result.total_bytes)
    return RunOutcome(cfg, A, pmap, result, residual, likelihood, kl, reference)
