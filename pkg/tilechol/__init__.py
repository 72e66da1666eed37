from .config import RunConfig, SweepGrid, load_run_config, load_sweep_grid
from .core import (
    Precision,
    TileBuffer,
    TileIndex,
    TiledSymmetricMatrix,
    dump_matrix,
    load_matrix,
)
from .covariance import MaternParams, SpatialLocations, build_covariance, gen_locations, matern
from .exceptions import TileCholError
from .kernels import KernelKind, gemm_update, potrf_tile, syrk_update, trsm_tile
from .planner import PrecisionMap, allowed_precisions, plan_precisions, uniform_map
from .scheduler import ClusterConfig, FactorizationResult, Variant, run_factorization
from .stats import kl_divergence, log_det_from_factor, log_likelihood, residual_norm
