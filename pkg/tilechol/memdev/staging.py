"""
Host <-> device staging: the cached ``load_tile`` path, write-back, and
uncached scratch staging. Bookkeeping and the ledger entry of every copy
happen inside the device's exclusion region; the modeled copy time is
waited out after leaving it.
"""
import logging
from typing import Optional, Tuple

from tilechol.core import Precision, TileBuffer, TileIndex, TiledSymmetricMatrix, convert_tile
from tilechol.exceptions import CapacityExhausted
from tilechol.memdev.arena import DeviceArena, Slot, tile_nbytes
from tilechol.memdev.cache import CacheTable
from tilechol.memdev.ledger import Direction, TransferEvent

logger = logging.getLogger(__name__)


def check_residency(arena: DeviceArena, cache: CacheTable) -> None:
    assert cache.bytes == arena.cached_bytes, (
        f"device {arena.device_id}: cache table holds {cache.bytes} bytes, "
        f"arena accounts {arena.cached_bytes} cached bytes")


def make_room(arena: DeviceArena, cache: CacheTable, nbytes: int) -> None:
    """Evict cache entries until ``nbytes`` fit.

    Ordinary unpinned entries go first, in policy order. Retained entries
    are reclaimed only when nothing else is left.
    """
    while arena.free_bytes < nbytes:
        victim = cache.victim()
        if victim is None:
            victim = cache.reclaim_candidate()
            if victim is None:
                raise CapacityExhausted(
                    f"device {arena.device_id}: {nbytes} bytes requested, "
                    f"{arena.free_bytes} free after evicting every unpinned tile",
                    device=arena.device_id,
                    requested=nbytes,
                    capacity=arena.capacity_bytes,
                )
            logger.warning("device %s reclaiming retained tile %s under memory pressure",
                           arena.device_id, victim)
            cache.reclaim(victim)
        entry = cache.remove(victim)
        cache.evictions += 1
        arena.release(entry.bytes, cached=True)
        check_residency(arena, cache)
        logger.debug("device %s evicted %s (%s bytes)", arena.device_id, victim, entry.bytes)


def _copy_to_device(arena: DeviceArena, A: TiledSymmetricMatrix, idx: TileIndex, prec: Precision,
                    stream: Optional[int]) -> Tuple[Slot, TransferEvent]:
    nbytes = tile_nbytes(A.nb, prec)
    slot = Slot(convert_tile(A[idx], prec), prec, nbytes)
    return slot, arena.ledger.transfer(Direction.C2G, idx, nbytes, stream, wait=False)


def _copy_to_host(arena: DeviceArena, slot: Slot, A: TiledSymmetricMatrix, idx: TileIndex,
                  stream: Optional[int]) -> TransferEvent:
    A[idx] = TileBuffer(slot.tile.elements, slot.precision, quantized=True)
    return arena.ledger.transfer(Direction.G2C, idx, slot.nbytes, stream, wait=False)


def load_tile(arena: DeviceArena, cache: CacheTable, A: TiledSymmetricMatrix, idx: TileIndex,
              prec: Precision, stream: Optional[int] = None, pinned: bool = False) -> Slot:
    """Slot holding tile ``idx`` on the device, copying it in on a miss.

    Returns once the copy has landed, also when another stream started it.
    """
    with arena.lock:
        entry = cache.lookup(idx)
        if entry is None:
            nbytes = tile_nbytes(A.nb, prec)
            make_room(arena, cache, nbytes)
            arena.reserve(nbytes, cached=True)
            slot, event = _copy_to_device(arena, A, idx, prec, stream)
            entry = cache.insert(idx, slot, ready_at=event.t_end)
            check_residency(arena, cache)
        if pinned:
            pin(cache, idx)
        slot, ready_at = entry.slot, entry.ready_at
    arena.ledger.clock.sleep_until(ready_at)
    return slot


def pin(cache: CacheTable, idx: TileIndex) -> None:
    cache.pin(idx)


def unpin(cache: CacheTable, idx: TileIndex) -> None:
    cache.unpin(idx)


def writeback(arena: DeviceArena, cache: CacheTable, A: TiledSymmetricMatrix, idx: TileIndex,
              stream: Optional[int] = None) -> None:
    """Copy the cached device tile to host storage; the cached copy stays valid."""
    with arena.lock:
        event = _copy_to_host(arena, cache.entry(idx).slot, A, idx, stream)
    arena.ledger.clock.sleep_until(event.t_end)


def stage_in(arena: DeviceArena, cache: CacheTable, A: TiledSymmetricMatrix, idx: TileIndex,
             prec: Precision, stream: Optional[int] = None) -> Slot:
    """Copy a tile into a scratch slot owned by the caller, bypassing the cache table."""
    nbytes = tile_nbytes(A.nb, prec)
    with arena.lock:
        make_room(arena, cache, nbytes)
        arena.reserve(nbytes, cached=False)
        slot, event = _copy_to_device(arena, A, idx, prec, stream)
    arena.ledger.clock.sleep_until(event.t_end)
    return slot


def stage_out(arena: DeviceArena, slot: Slot, A: TiledSymmetricMatrix, idx: TileIndex,
              stream: Optional[int] = None) -> None:
    with arena.lock:
        event = _copy_to_host(arena, slot, A, idx, stream)
    arena.ledger.clock.sleep_until(event.t_end)


def free_scratch(arena: DeviceArena, slot: Slot) -> None:
    with arena.lock:
        arena.release(slot.nbytes, cached=False)
