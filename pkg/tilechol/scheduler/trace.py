import threading
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Union

from tilechol.core import Precision, TileIndex
from tilechol.kernels import KernelKind
from tilechol.memdev import Direction, TransferLedger


@dataclass(frozen=True)
class TraceEvent:
    kind: Union[KernelKind, Direction]
    tile: TileIndex
    device: int
    stream: Optional[int]
    t_start: float
    t_end: float
    precision: Optional[Precision] = None

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


class EventTrace:
    """Kernel events recorded by the streams; transfers are merged in from the ledgers"""

    def __init__(self):
        self._events: List[TraceEvent] = []
        self._lock = threading.Lock()

    def record(self, event: TraceEvent) -> None:
        with self._lock:
            self._events.append(event)

    def merge_ledgers(self, ledgers: Iterable[TransferLedger],
                      precisions: Dict[TileIndex, Precision]) -> None:
        with self._lock:
            for ledger in ledgers:
                for t in ledger.events:
                    self._events.append(
                        TraceEvent(t.direction, t.tile, t.device, t.stream, t.t_start, t.t_end,
                                   precisions.get(t.tile)))
            self._events.sort(key=lambda e: (e.t_start, e.device, e.stream or 0))

    @property
    def events(self) -> List[TraceEvent]:
        with self._lock:
            return list(self._events)

    def kernels(self) -> List[TraceEvent]:
        return [e for e in self.events if isinstance(e.kind, KernelKind)]

    def busy_seconds_by_stream(self) -> Dict[int, float]:
        out: Dict[int, float] = defaultdict(float)
        for e in self.kernels():
            out[e.stream] += e.duration
        return dict(out)

    def busy_seconds_by_kind(self) -> Dict[str, float]:
        out: Dict[str, float] = defaultdict(float)
        for e in self.events:
            out[e.kind.value] += e.duration
        return dict(out)

    def __len__(self) -> int:
        return len(self.events)
