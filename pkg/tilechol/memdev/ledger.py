import enum
import logging
import threading
import time
from dataclasses import dataclass
from typing import List, Optional

from pydantic import BaseModel, confloat

from tilechol.core import TileIndex

logger = logging.getLogger(__name__)


class Direction(str, enum.Enum):
    C2G = "C2G"
    G2C = "G2C"


class BandwidthModel(BaseModel):
    """Modeled link between host memory and one device"""

    bytes_per_second: confloat(gt=0)
    latency_seconds: confloat(ge=0) = 0.0

    class Config:
        allow_mutation = False
        extra = "forbid"

    def seconds(self, nbytes: int) -> float:
        return self.latency_seconds + nbytes / self.bytes_per_second


class RunClock:
    """Monotonic clock shared by every device and stream of one run"""

    def __init__(self):
        self.epoch = time.perf_counter()

    def now(self) -> float:
        return time.perf_counter() - self.epoch

    def sleep_until(self, t: float) -> None:
        remaining = t - self.now()
        if remaining > 0:
            time.sleep(remaining)


@dataclass(frozen=True)
class TransferEvent:
    direction: Direction
    tile: TileIndex
    bytes: int
    t_start: float
    t_end: float
    device: int
    stream: Optional[int] = None


class TransferLedger:
    """Byte counters and the append-only event list of one device"""

    def __init__(self, device_id: int = 0, bandwidth_model: Optional[BandwidthModel] = None,
                 clock: Optional[RunClock] = None):
        self.device_id = device_id
        self.bandwidth_model = bandwidth_model
        self.clock = clock or RunClock()
        self.c2g_bytes = 0
        self.g2c_bytes = 0
        self.events: List[TransferEvent] = []
        self._lock = threading.Lock()

    @property
    def total_bytes(self) -> int:
        return self.c2g_bytes + self.g2c_bytes

    def record(self, direction: Direction, tile: TileIndex, nbytes: int, t_start: float,
               t_end: float, stream: Optional[int] = None) -> TransferEvent:
        event = TransferEvent(direction, tile, nbytes, t_start, t_end, self.device_id, stream)
        with self._lock:
            if direction is Direction.C2G:
                self.c2g_bytes += nbytes
            else:
                self.g2c_bytes += nbytes
            self.events.append(event)
        return event

    def modeled_seconds(self, nbytes: int) -> float:
        """Modeled copy time; zero without a bandwidth model"""
        if self.bandwidth_model is None:
            return 0.0
        return self.bandwidth_model.seconds(nbytes)

    def transfer(self, direction: Direction, tile: TileIndex, nbytes: int,
                 stream: Optional[int] = None, wait: bool = True) -> TransferEvent:
        """Account for one copy ending after its modeled time.

        With ``wait=False`` the caller sleeps until ``event.t_end`` itself,
        typically after leaving the device's exclusion region.
        """
        t_start = self.clock.now()
        t_end = t_start + self.modeled_seconds(nbytes)
        logger.debug("dev %s %s %s %s bytes", self.device_id, direction.value, tile, nbytes)
        event = self.record(direction, tile, nbytes, t_start, t_end, stream)
        if wait:
            simulate_transfer_delay(self, nbytes)
        return event

    def bytes_by_direction(self, direction: Direction) -> int:
        return sum(e.bytes for e in self.events if e.direction is direction)



def simulate_transfer_delay(ledger: TransferLedger, nbytes: int) -> float:
    """Sleep for the modeled transfer time and return it; zero without a bandwidth model."""
    seconds = ledger.modeled_seconds(nbytes)
    if seconds > 0:
        time.sleep(seconds)
    return seconds
