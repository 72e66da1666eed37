import json
import logging
from pathlib import Path
from typing import Optional, Union

from schematics.exceptions import ValidationError
from schematics.models import Model
from schematics.types import (
    DictType,
    FloatType,
    IntType,
    ListType,
    ModelType,
    StringType,
)

from tilechol.constants import PRECISION_MODES
from tilechol.planner import PrecisionMap
from tilechol.scheduler import FactorizationResult, Variant
from tilechol.stats import LikelihoodResult

logger = logging.getLogger(__name__)


class DeviceTransfers(Model):
    device = IntType(required=True, min_value=0)
    c2g_bytes = IntType(required=True, min_value=0)
    g2c_bytes = IntType(required=True, min_value=0)
    peak_bytes = IntType(min_value=0)
    hits = IntType(min_value=0)
    misses = IntType(min_value=0)
    evictions = IntType(min_value=0)
    reclaims = IntType(min_value=0)


class FactorReport(Model):
    """Everything ``tilechol factor`` reports about one run"""

    n = IntType(required=True, min_value=1)
    nb = IntType(required=True, min_value=1)
    Nt = IntType(required=True, min_value=1)
    variant = StringType(required=True, choices=[v.value for v in Variant])
    devices = ListType(ModelType(DeviceTransfers), required=True, min_size=1)
    streams_per_device = IntType(required=True, min_value=1)
    precision_mode = StringType(required=True, choices=list(PRECISION_MODES))
    eps_target = FloatType()
    theta = ListType(FloatType, min_size=3, max_size=3)
    nugget = FloatType(min_value=0)
    seed = IntType()

    residual = FloatType(required=True, min_value=0)
    wall_seconds = FloatType(required=True, min_value=0)
    flop_count = FloatType(required=True)
    effective_gflops = FloatType()
    c2g_bytes = IntType(required=True, min_value=0)
    g2c_bytes = IntType(required=True, min_value=0)
    total_bytes = IntType(required=True, min_value=0)
    tile_counts = DictType(IntType, required=True)
    kernel_counts = DictType(IntType, required=True)
    kernel_precision_counts = DictType(IntType)
    violations = IntType(min_value=0, default=0)

    log_det = FloatType()
    quad_form = FloatType()
    loglik = FloatType()
    kl = FloatType()
    kl_abs = FloatType(min_value=0)

    def validate_tile_counts(self, data, value):
        nt = data.get("Nt")
        if nt and sum(value.values()) != nt * (nt + 1) // 2:
            raise ValidationError("tile counts must cover the lower triangle")
        return value

    def validate_kl_abs(self, data, value):
        kl = data.get("kl")
        if value is not None and kl is not None and value != abs(kl):
            raise ValidationError("kl_abs must be the magnitude of kl")
        return value

    def validate_total_bytes(self, data, value):
        if value != (data.get("c2g_bytes") or 0) + (data.get("g2c_bytes") or 0):
            raise ValidationError("total_bytes must be c2g_bytes + g2c_bytes")
        return value


def build_report(cfg, result: FactorizationResult, pmap: PrecisionMap, residual: float,
                 likelihood: Optional[LikelihoodResult] = None,
                 kl: Optional[float] = None) -> FactorReport:
    L = result.L
    devices = []
    for ledger, stats in zip(result.ledgers, result.cache_stats):
        devices.append(
            dict(device=ledger.device_id, c2g_bytes=ledger.c2g_bytes,
                 g2c_bytes=ledger.g2c_bytes, **stats))
    gflops = None
    if result.wall_seconds > 0:
        gflops = result.flop_count / result.wall_seconds / 1e9

    report = FactorReport({
        "n": L.n,
        "nb": L.nb,
        "Nt": L.nt,
        "variant": result.variant.value,
        "devices": devices,
        "streams_per_device": result.streams_per_device,
        "precision_mode": cfg.precision_mode,
        "eps_target": cfg.eps_target,
        "theta": list(cfg.theta),
        "nugget": cfg.nugget,
        "seed": cfg.seed,
        "residual": residual,
        "wall_seconds": result.wall_seconds,
        "flop_count": result.flop_count,
        "effective_gflops": gflops,
        "c2g_bytes": result.c2g_bytes,
        "g2c_bytes": result.g2c_bytes,
        "total_bytes": result.total_bytes,
        "tile_counts": pmap.counts(),
        "kernel_counts": result.kernel_counts,
        "kernel_precision_counts": result.precision_counts,
        "violations": len(result.violations),
        "kl": kl,
        "kl_abs": None if kl is None else abs(kl),
    })
    if likelihood is not None:
        report.log_det = likelihood.log_det
        report.quad_form = likelihood.quad_form
        report.loglik = likelihood.loglik
    return report


def write_report(path: Union[str, Path], report: FactorReport) -> None:
    report.validate()
    with open(path, "w") as f:
        json.dump(report.to_primitive(), f, indent=2, sort_keys=True)
        f.write("\n")
    logger.info("wrote report to %s", path)
