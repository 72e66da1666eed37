import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, Hashable, Iterable, Optional, Set

from tilechol.core import Precision, TileIndex
from tilechol.exceptions import NotCached
from tilechol.memdev.arena import Slot

logger = logging.getLogger(__name__)


@dataclass
class CacheEntry:
    slot: Slot
    precision: Precision
    bytes: int
    inserted_at: int
    last_use: int
    pins: int = 0
    ready_at: float = 0.0  # run clock time its copy-in completes
    holders: Set[Hashable] = field(default_factory=set)

    @property
    def retained(self) -> bool:
        return bool(self.holders)

    @property
    def evictable(self) -> bool:
        return self.pins == 0 and not self.holders


class EvictionPolicy:
    """Chooses which evictable entry gives up its space"""

    name = "base"

    def victim(self, entries: Dict[TileIndex, CacheEntry],
               candidates: Iterable[TileIndex]) -> Optional[TileIndex]:
        raise NotImplementedError


class LRUPolicy(EvictionPolicy):
    name = "lru"

    def victim(self, entries, candidates):
        return min(candidates, key=lambda idx: entries[idx].last_use, default=None)


class FIFOPolicy(EvictionPolicy):
    name = "fifo"

    def victim(self, entries, candidates):
        return min(candidates, key=lambda idx: entries[idx].inserted_at, default=None)


POLICIES = {
    LRUPolicy.name: LRUPolicy,
    FIFOPolicy.name: FIFOPolicy,
}


def make_policy(name: str) -> EvictionPolicy:
    try:
        return POLICIES[name]()
    except KeyError:
        raise ValueError(f"unknown eviction policy {name}, use one of {list(POLICIES)}")


@dataclass
class CacheTable:
    """Device resident tiles of one device, at most one entry per tile.

    Callers hold the owning arena's lock around every method.
    """

    device_id: int = 0
    policy: EvictionPolicy = field(default_factory=LRUPolicy)
    entries: Dict[TileIndex, CacheEntry] = field(default_factory=dict)
    hits: int = 0
    misses: int = 0
    evictions: int = 0
    reclaims: int = 0

    def __post_init__(self):
        self._tick = itertools.count(1)

    def __contains__(self, idx: TileIndex) -> bool:
        return idx in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def bytes(self) -> int:
        return sum(e.bytes for e in self.entries.values())

    def lookup(self, idx: TileIndex) -> Optional[CacheEntry]:
        """Entry for idx with its recency refreshed, or None"""
        entry = self.entries.get(idx)
        if entry is None:
            self.misses += 1
            return None
        self.hits += 1
        entry.last_use = next(self._tick)
        return entry

    def insert(self, idx: TileIndex, slot: Slot, ready_at: float = 0.0) -> CacheEntry:
        if idx in self.entries:
            raise ValueError(f"tile {idx} already cached on device {self.device_id}")
        tick = next(self._tick)
        entry = CacheEntry(slot, slot.precision, slot.nbytes, inserted_at=tick, last_use=tick,
                           ready_at=ready_at)
        self.entries[idx] = entry
        return entry

    def entry(self, idx: TileIndex) -> CacheEntry:
        try:
            return self.entries[idx]
        except KeyError:
            raise NotCached(f"tile {idx} is not cached on device {self.device_id}", tile=idx,
                            device=self.device_id)

    def remove(self, idx: TileIndex) -> CacheEntry:
        entry = self.entry(idx)
        if entry.pins:
            raise ValueError(f"tile {idx} is pinned on device {self.device_id}")
        return self.entries.pop(idx)

    def pin(self, idx: TileIndex) -> None:
        self.entry(idx).pins += 1

    def unpin(self, idx: TileIndex) -> None:
        entry = self.entry(idx)
        if entry.pins == 0:
            raise ValueError(f"tile {idx} is not pinned on device {self.device_id}")
        entry.pins -= 1

    def retain(self, idx: TileIndex, holder: Hashable = None) -> None:
        """Keep idx out of ordinary eviction until ``holder`` releases it"""
        self.entry(idx).holders.add(holder)

    def release(self, idx: TileIndex, holder: Hashable = None) -> None:
        entry = self.entries.get(idx)
        if entry is not None:
            entry.holders.discard(holder)

    def holds(self, idx: TileIndex, holder: Hashable = None) -> bool:
        entry = self.entries.get(idx)
        return entry is not None and holder in entry.holders

    def reclaim(self, idx: TileIndex) -> None:
        """Drop every hold on idx"""
        self.entry(idx).holders.clear()
        self.reclaims += 1

    def pin_count(self, idx: TileIndex) -> int:
        entry = self.entries.get(idx)
        if entry is None:
            return 0
        return entry.pins + len(entry.holders)

    def victim(self) -> Optional[TileIndex]:
        candidates = [idx for idx, e in self.entries.items() if e.evictable]
        return self.policy.victim(self.entries, candidates)

    def reclaim_candidate(self) -> Optional[TileIndex]:
        """A retained but otherwise unpinned entry, used only under memory pressure"""
        candidates = [idx for idx, e in self.entries.items() if e.pins == 0 and e.retained]
        return self.policy.victim(self.entries, candidates)
