from .arena import DeviceArena, Slot, tile_nbytes
from .cache import CacheEntry, CacheTable, EvictionPolicy, FIFOPolicy, LRUPolicy, make_policy
from .ledger import (
    BandwidthModel,
    Direction,
    RunClock,
    TransferEvent,
    TransferLedger,
    simulate_transfer_delay,
)
from .staging import (
    check_residency,
    free_scratch,
    load_tile,
    make_room,
    pin,
    stage_in,
    stage_out,
    unpin,
    writeback,
)
