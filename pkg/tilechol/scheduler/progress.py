import threading
from typing import Optional, Sequence

import numpy as np

from tilechol.constants import DEFAULT_WATCHDOG_SECONDS
from tilechol.core import TileIndex
from tilechol.exceptions import DeadlineExceeded, RunAborted


class ProgressTable:
    """Write-once Ready flags of the lower triangle.

    Setting a flag and observing it go through one condition variable, which
    orders the producer's host write-back before any reader's access.
    """

    def __init__(self, nt: int):
        self.nt = nt
        self._ready = np.zeros((nt, nt), dtype=bool)
        self._cond = threading.Condition()
        self._aborted = False

    def is_ready(self, idx: TileIndex) -> bool:
        with self._cond:
            return bool(self._ready[idx.row, idx.col])

    def set_ready(self, idx: TileIndex) -> None:
        with self._cond:
            if self._ready[idx.row, idx.col]:
                raise RuntimeError(f"Ready{idx} set twice")
            self._ready[idx.row, idx.col] = True
            self._cond.notify_all()

    def abort(self) -> None:
        with self._cond:
            self._aborted = True
            self._cond.notify_all()

    def count(self) -> int:
        with self._cond:
            return int(self._ready.sum())

    def wait(self, idx: TileIndex, timeout: Optional[float]) -> None:
        with self._cond:
            done = self._cond.wait_for(
                lambda: self._aborted or self._ready[idx.row, idx.col], timeout=timeout)
            if self._ready[idx.row, idx.col]:
                return
            if self._aborted:
                raise RunAborted(f"run aborted while waiting for Ready{idx}")
            if not done:
                raise DeadlineExceeded(f"Ready{idx} not set within {timeout} s", tile=idx,
                                       timeout=timeout)


def await_ready(table: ProgressTable, idx: TileIndex,
                timeout: Optional[float] = DEFAULT_WATCHDOG_SECONDS) -> None:
    """Block until tile ``idx`` holds its final content."""
    table.wait(idx, timeout)


class TurnTable:
    """Round-robin turn shared by the stream threads of a lockstep run.

    A stream touches device memory only while it holds the turn, so every
    cache decision, and with it every transferred byte, is the same from
    one run to the next.
    """

    def __init__(self, streams: Sequence[int]):
        self._order = list(streams)
        self._pos = 0
        self._cond = threading.Condition()
        self._aborted = False

    def holder(self) -> Optional[int]:
        with self._cond:
            return self._order[self._pos] if self._order else None

    def acquire(self, stream: int, timeout: Optional[float]) -> None:
        with self._cond:
            done = self._cond.wait_for(
                lambda: self._aborted or self._order[self._pos] == stream, timeout=timeout)
            if self._aborted:
                raise RunAborted(f"run aborted while stream {stream} waited for its turn")
            if not done:
                raise DeadlineExceeded(f"stream {stream} got no turn within {timeout} s",
                                       timeout=timeout)

    def advance(self) -> None:
        with self._cond:
            self._pos = (self._pos + 1) % len(self._order)
            self._cond.notify_all()

    def retire(self, stream: int) -> None:
        """Remove the holder from the rotation; the next stream holds the turn"""
        with self._cond:
            if self._order[self._pos] != stream:
                raise RuntimeError(f"stream {stream} retired without holding the turn")
            del self._order[self._pos]
            if self._order:
                self._pos %= len(self._order)
            self._cond.notify_all()

    def abort(self) -> None:
        with self._cond:
            self._aborted = True
            self._cond.notify_all()
