from typing import Optional

from pydantic import BaseModel, confloat, conint
from typing_extensions import Literal

from tilechol.constants import DEFAULT_WATCHDOG_SECONDS, WORKING_SET_TILES
from tilechol.core import Precision, TiledSymmetricMatrix
from tilechol.exceptions import ConfigInfeasible
from tilechol.memdev import BandwidthModel, tile_nbytes
from tilechol.scheduler.tasks import Variant


class ClusterConfig(BaseModel):
    """Simulated devices and streams for one factorization run"""

    devices: conint(ge=1) = 1
    streams_per_device: conint(ge=1) = 1
    capacity_bytes: conint(ge=0)
    variant: Variant = Variant.V3
    bandwidth_model: Optional[BandwidthModel]
    eviction_policy: Literal["lru", "fifo"] = "lru"
    watchdog_seconds: confloat(gt=0) = DEFAULT_WATCHDOG_SECONDS
    check_dependencies: bool = True
    lockstep: bool = False

    class Config:
        extra = "forbid"

    @property
    def effective_streams(self) -> int:
        """Sync runs one stream per device whatever was asked for"""
        if self.variant is Variant.Sync:
            return 1
        return self.streams_per_device

    @property
    def total_streams(self) -> int:
        return self.devices * self.effective_streams

    def working_set_bytes(self, nb: int, top: Precision) -> int:
        return self.effective_streams * WORKING_SET_TILES * tile_nbytes(nb, top)

    def check_feasible(self, A: TiledSymmetricMatrix, top: Precision) -> None:
        need = self.working_set_bytes(A.nb, top)
        if self.capacity_bytes < need:
            raise ConfigInfeasible(
                f"capacity {self.capacity_bytes} bytes per device is below the working set of "
                f"{need} bytes ({self.effective_streams} streams x {WORKING_SET_TILES} tiles)",
                reason="working set exceeds device capacity",
            )


def matrix_bytes(A: TiledSymmetricMatrix, pmap=None) -> int:
    """Bytes of the stored lower triangle at the planned (or current) precisions"""
    total = 0
    for idx in A.indices():
        p = pmap[idx] if pmap is not None else A[idx].precision
        total += tile_nbytes(A.nb, p)
    return total
