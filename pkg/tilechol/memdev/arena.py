import itertools
import logging
import threading
from typing import Optional

from tilechol.core import Precision, TileBuffer
from tilechol.memdev.ledger import BandwidthModel, RunClock, TransferLedger

logger = logging.getLogger(__name__)

_slot_ids = itertools.count()


class Slot:
    """One tile worth of simulated device memory"""

    __slots__ = ("slot_id", "tile", "precision", "nbytes")

    def __init__(self, tile: TileBuffer, precision: Precision, nbytes: int):
        self.slot_id = next(_slot_ids)
        self.tile = tile
        self.precision = precision
        self.nbytes = nbytes

    def __repr__(self) -> str:
        return f"Slot({self.slot_id}, {self.precision}, {self.nbytes}B)"


class DeviceArena:
    """Byte-accounted, capacity-bounded device memory.

    Cached bytes belong to entries of the device's cache table, scratch bytes
    to staging buffers owned by a single kernel or task. ``lock`` is the
    device's exclusion region for every cache and arena mutation.
    """

    def __init__(self, device_id: int, capacity_bytes: int,
                 bandwidth_model: Optional[BandwidthModel] = None,
                 clock: Optional[RunClock] = None):
        if capacity_bytes < 0:
            raise ValueError("capacity must be non-negative")
        self.device_id = device_id
        self.capacity_bytes = capacity_bytes
        self.bandwidth_model = bandwidth_model
        self.cached_bytes = 0
        self.scratch_bytes = 0
        self.peak_bytes = 0
        self.ledger = TransferLedger(device_id, bandwidth_model, clock)
        self.lock = threading.RLock()

    @property
    def used_bytes(self) -> int:
        return self.cached_bytes + self.scratch_bytes

    @property
    def free_bytes(self) -> int:
        return self.capacity_bytes - self.used_bytes

    def reserve(self, nbytes: int, cached: bool) -> None:
        if nbytes > self.free_bytes:
            raise AssertionError(f"device {self.device_id}: reserving {nbytes} bytes with "
                                 f"{self.free_bytes} free")
        if cached:
            self.cached_bytes += nbytes
        else:
            self.scratch_bytes += nbytes
        self.peak_bytes = max(self.peak_bytes, self.used_bytes)
        self._check()

    def release(self, nbytes: int, cached: bool) -> None:
        if cached:
            self.cached_bytes -= nbytes
        else:
            self.scratch_bytes -= nbytes
        self._check()

    def _check(self) -> None:
        assert 0 <= self.used_bytes <= self.capacity_bytes, (
            f"device {self.device_id}: used {self.used_bytes} of {self.capacity_bytes}")
        assert self.cached_bytes >= 0 and self.scratch_bytes >= 0

    def __repr__(self) -> str:
        return f"DeviceArena(dev={self.device_id}, used={self.used_bytes}/{self.capacity_bytes})"


def tile_nbytes(nb: int, p: Precision) -> int:
    return nb * nb * p.bytes_per_element
