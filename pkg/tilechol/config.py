import itertools
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Tuple, Union

from pydantic import BaseModel, confloat, conint, root_validator, validator
from typing_extensions import Literal

from tilechol.constants import (
    BANDWIDTH_PRESETS,
    CORRELATION_PRESETS,
    DEFAULT_WATCHDOG_SECONDS,
)
from tilechol.core import Precision
from tilechol.covariance import MaternParams
from tilechol.exceptions import MalformedInput
from tilechol.memdev import BandwidthModel
from tilechol.planner import allowed_precisions
from tilechol.scheduler import ClusterConfig, Variant

logger = logging.getLogger(__name__)

PrecisionMode = Literal["fp64", "2p", "3p", "4p"]
Correlation = Literal["weak", "medium", "strong"]


class Model(BaseModel):
    def to_primitive(self) -> Dict[str, Any]:
        return json.loads(self.json())


def bandwidth_from_preset(name: str) -> BandwidthModel:
    try:
        bytes_per_second, latency = BANDWIDTH_PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown bandwidth preset {name}, use one of {list(BANDWIDTH_PRESETS)}")
    return BandwidthModel(bytes_per_second=bytes_per_second, latency_seconds=latency)


class RunConfig(Model):
    """One factorization run, as read from a JSON file and command line flags"""

    n: conint(ge=1) = 1024
    nb: conint(ge=1) = 128
    variant: Variant = Variant.V3
    devices: conint(ge=1) = 1
    streams_per_device: conint(ge=1) = 1
    capacity_bytes: Optional[conint(ge=0)]
    capacity_fraction: Optional[confloat(gt=0)]
    precision_mode: PrecisionMode = "fp64"
    eps_target: confloat(gt=0, lt=1) = 1e-8
    theta: Tuple[confloat(gt=0), confloat(gt=0), confloat(gt=0)] = CORRELATION_PRESETS["weak"]
    correlation: Optional[Correlation]
    nugget: confloat(ge=0) = 0.0
    seed: int = 0
    bandwidth: Optional[Union[BandwidthModel, str]]
    eviction_policy: Literal["lru", "fifo"] = "lru"
    watchdog_seconds: confloat(gt=0) = DEFAULT_WATCHDOG_SECONDS
    lockstep: bool = False
    sort_locations: bool = True
    observations: Literal["zero", "sampled"] = "zero"
    matrix_path: Optional[Path]
    report_path: Optional[Path]
    trace_path: Optional[Path]
    ledger_path: Optional[Path]
    map_path: Optional[Path]

    class Config:
        extra = "forbid"

    @validator("bandwidth")
    def validate_bandwidth(cls, value):
        if isinstance(value, str):
            return bandwidth_from_preset(value)
        return value

    @validator("theta")
    def validate_theta(cls, value):
        return tuple(float(v) for v in value)

    @root_validator(skip_on_failure=True)
    def validate_capacity_and_correlation(cls, values):
        both = (values.get("capacity_bytes"), values.get("capacity_fraction"))
        if None not in both:
            raise ValueError("give capacity_bytes or capacity_fraction, not both")
        correlation = values.get("correlation")
        if correlation is not None:
            values["theta"] = CORRELATION_PRESETS[correlation]
        return values

    def matern_params(self) -> MaternParams:
        sigma_sq, range_a, nu = self.theta
        return MaternParams(sigma_sq=sigma_sq, range_a=range_a, smoothness_nu=nu,
                            nugget=self.nugget)

    def allowed(self) -> List[Precision]:
        return allowed_precisions(self.precision_mode)

    def resolve_capacity(self, full_matrix_bytes: int) -> int:
        """Per-device capacity; a fraction refers to the FP64 matrix bytes"""
        if self.capacity_bytes is not None:
            return self.capacity_bytes
        fraction = 1.0 if self.capacity_fraction is None else self.capacity_fraction
        return int(fraction * full_matrix_bytes)

    def cluster_config(self, full_matrix_bytes: int,
                       check_dependencies: bool = True) -> ClusterConfig:
        return ClusterConfig(
            devices=self.devices,
            streams_per_device=self.streams_per_device,
            capacity_bytes=self.resolve_capacity(full_matrix_bytes),
            variant=self.variant,
            bandwidth_model=self.bandwidth,
            eviction_policy=self.eviction_policy,
            watchdog_seconds=self.watchdog_seconds,
            check_dependencies=check_dependencies,
            lockstep=self.lockstep,
        )

    def top_precision(self) -> Precision:
        return max(self.allowed())


def read_json(path: Union[str, Path]) -> Any:
    try:
        with open(path) as f:
            return json.load(f)
    except OSError as e:
        raise MalformedInput(f"{path}: {e.strerror}", reason="unreadable file") from e
    except json.JSONDecodeError as e:
        raise MalformedInput(f"{path}: {e}", reason="invalid JSON") from e


def load_run_config(path: Optional[Union[str, Path]] = None,
                    overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """File values first, then every override that is not None."""
    data: Dict[str, Any] = {}
    if path is not None:
        data = read_json(path)
        if not isinstance(data, dict):
            raise MalformedInput(f"{path}: expected a JSON object", reason="not an object")
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    return RunConfig.parse_obj(data)


class SweepGrid(Model):
    """Base run configuration plus axes expanded as a cartesian product"""

    base: Dict[str, Any] = {}
    axes: Dict[str, List[Any]] = {}

    class Config:
        extra = "forbid"

    @validator("base", "axes")
    def validate_keys(cls, value):
        unknown = set(value) - set(RunConfig.__fields__)
        if unknown:
            raise ValueError(f"unknown run configuration keys {sorted(unknown)}")
        return value

    def expand(self) -> Iterator[Dict[str, Any]]:
        """Raw run dictionaries, the last listed axis varying fastest.

        A grid without axes, like one with an empty axis, has no runs.
        """
        keys = list(self.axes)
        if not keys:
            return
        for values in itertools.product(*(self.axes[k] for k in keys)):
            data = dict(self.base)
            data.update(zip(keys, values))
            yield data


def load_sweep_grid(path: Union[str, Path]) -> SweepGrid:
    data = read_json(path)
    if not isinstance(data, dict):
        raise MalformedInput(f"{path}: expected a JSON object", reason="not an object")
    return SweepGrid.parse_obj(data)
