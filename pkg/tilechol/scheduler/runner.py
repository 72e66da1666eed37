"""
Static left-looking tile Cholesky over simulated devices.

Tasks are enumerated column by column over the lower triangle and dealt
round-robin to the global streams; each stream runs its tasks in order on
its own thread. A task updates its output tile with every column to its
left (SYRK or GEMM per column), factorizes it (POTRF or TRSM), writes it
back to host memory and only then sets its Ready flag. Consumers wait on
those flags before touching any input from a prior column.

In a lockstep run the streams additionally pass a turn round-robin and
touch device memory only while holding it; the cache then sees the same
sequence of requests on every run and the transfer volumes repeat exactly.

The variants differ only in how tiles move between host and device; the
kernels, their order and therefore the bits of L are the same for all of
them.
"""
import logging
import threading
from collections import Counter
from concurrent.futures import FIRST_EXCEPTION, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Set, Tuple

from tilechol.core import TileBuffer, TileIndex, TiledSymmetricMatrix, convert_tile
from tilechol.exceptions import DeadlineExceeded, NotPositiveDefinite, RunAborted
from tilechol.kernels import KernelKind, gemm_update, potrf_tile, syrk_update, trsm_tile
from tilechol.memdev import (
    CacheTable,
    DeviceArena,
    RunClock,
    Slot,
    TransferLedger,
    free_scratch,
    load_tile,
    make_policy,
    stage_in,
    stage_out,
    unpin,
    writeback,
)
from tilechol.planner import PrecisionMap
from tilechol.scheduler.cluster import ClusterConfig
from tilechol.scheduler.progress import ProgressTable, TurnTable, await_ready
from tilechol.scheduler.tasks import (
    TaskDescriptor,
    TaskKind,
    Variant,
    enumerate_tasks,
    tasks_per_stream,
)
from tilechol.scheduler.trace import EventTrace, TraceEvent

logger = logging.getLogger(__name__)

Compute = Callable[..., TileBuffer]


@dataclass(frozen=True)
class DependencyViolation:
    kernel: KernelKind
    target: TileIndex
    missing: TileIndex


@dataclass(frozen=True)
class DiagonalHoldCheck:
    """State of the diagonal tile when a TRSM of its column started"""

    column: int
    device: int
    stream: int
    target: TileIndex
    first_on_stream: bool
    held: bool


class Device:
    """Arena, cache table and ledger shared by the streams of one device"""

    def __init__(self, device_id: int, cfg: ClusterConfig, clock: RunClock):
        self.device_id = device_id
        self.arena = DeviceArena(device_id, cfg.capacity_bytes, cfg.bandwidth_model, clock)
        self.cache = CacheTable(device_id=device_id, policy=make_policy(cfg.eviction_policy))

    @property
    def lock(self):
        return self.arena.lock

    @property
    def ledger(self) -> TransferLedger:
        return self.arena.ledger

    def stats(self) -> Dict[str, int]:
        return {
            "hits": self.cache.hits,
            "misses": self.cache.misses,
            "evictions": self.cache.evictions,
            "reclaims": self.cache.reclaims,
            "peak_bytes": self.arena.peak_bytes,
        }


@dataclass
class FactorizationResult:
    L: TiledSymmetricMatrix
    ledgers: List[TransferLedger]
    trace: EventTrace
    variant: Variant
    devices: int
    streams_per_device: int
    kernel_counts: Dict[str, int] = field(default_factory=dict)
    precision_counts: Dict[str, int] = field(default_factory=dict)
    wall_seconds: float = 0.0
    violations: List[DependencyViolation] = field(default_factory=list)
    cache_stats: List[Dict[str, int]] = field(default_factory=list)
    diag_checks: List[DiagonalHoldCheck] = field(default_factory=list)

    @property
    def c2g_bytes(self) -> int:
        return sum(ledger.c2g_bytes for ledger in self.ledgers)

    @property
    def g2c_bytes(self) -> int:
        return sum(ledger.g2c_bytes for ledger in self.ledgers)

    @property
    def total_bytes(self) -> int:
        return self.c2g_bytes + self.g2c_bytes

    @property
    def flop_count(self) -> float:
        """Nominal Cholesky operation count, n^3 / 3"""
        return self.L.n**3 / 3.0

    def summary(self) -> Dict[str, object]:
        return {
            "variant": self.variant.value,
            "devices": self.devices,
            "streams_per_device": self.streams_per_device,
            "c2g_bytes": self.c2g_bytes,
            "g2c_bytes": self.g2c_bytes,
            "total_bytes": self.total_bytes,
            "wall_seconds": self.wall_seconds,
            "flop_count": self.flop_count,
            "kernel_counts": dict(self.kernel_counts),
            "precision_counts": dict(self.precision_counts),
            "busy_seconds_by_stream": self.trace.busy_seconds_by_stream(),
            "busy_seconds_by_kind": self.trace.busy_seconds_by_kind(),
            "cache": list(self.cache_stats),
        }


class Staging:
    """Moves the tiles of one task between host and device.

    ``begin_task`` returns a handle for the accumulator (or None),
    ``kernel`` runs one compute call with its operands resident,
    ``end_task`` leaves the final tile in host memory.
    """

    def __init__(self, A: TiledSymmetricMatrix, pmap: PrecisionMap):
        self.A = A
        self.pmap = pmap

    def begin_task(self, dev: Device, target: TileIndex, stream: int) -> Optional[Slot]:
        return None

    def kernel(self, dev: Device, acc: Optional[Slot], target: TileIndex, kind: KernelKind,
               operands: Sequence[TileIndex], compute: Compute, stream: int) -> None:
        raise NotImplementedError

    def end_task(self, dev: Device, acc: Optional[Slot], target: TileIndex, stream: int) -> None:
        pass

    def task_done(self, dev: Device, task: TaskDescriptor) -> None:
        pass


class ScratchStaging(Staging):
    """Sync and Async: everything staged in and out around every kernel"""

    def kernel(self, dev, acc, target, kind, operands, compute, stream):
        A, pmap = self.A, self.pmap
        held: List[Slot] = []
        try:
            acc = stage_in(dev.arena, dev.cache, A, target, pmap[target], stream)
            held.append(acc)
            ops = []
            for idx in operands:
                slot = stage_in(dev.arena, dev.cache, A, idx, pmap[idx], stream)
                held.append(slot)
                ops.append(slot.tile)
            acc.tile = compute(acc.tile, *ops)
            stage_out(dev.arena, acc, A, target, stream)
        finally:
            for slot in held:
                free_scratch(dev.arena, slot)


class AccumulatorStaging(Staging):
    """V1: the accumulator stays on the device for the whole task"""

    def begin_task(self, dev, target, stream):
        return stage_in(dev.arena, dev.cache, self.A, target, self.pmap[target], stream)

    def kernel(self, dev, acc, target, kind, operands, compute, stream):
        held: List[Slot] = []
        try:
            for idx in operands:
                held.append(stage_in(dev.arena, dev.cache, self.A, idx, self.pmap[idx], stream))
            acc.tile = compute(acc.tile, *[slot.tile for slot in held])
        finally:
            for slot in held:
                free_scratch(dev.arena, slot)

    def end_task(self, dev, acc, target, stream):
        stage_out(dev.arena, acc, self.A, target, stream)
        free_scratch(dev.arena, acc)


class CachedStaging(Staging):
    """V2: accumulator and operands live in the device cache table"""

    def load_pinned(self, dev: Device, idx: TileIndex, stream: int) -> Slot:
        return load_tile(dev.arena, dev.cache, self.A, idx, self.pmap[idx], stream, pinned=True)

    def load_operand(self, dev: Device, idx: TileIndex, kind: KernelKind, target: TileIndex,
                     stream: int) -> Slot:
        return self.load_pinned(dev, idx, stream)

    def begin_task(self, dev, target, stream):
        return self.load_pinned(dev, target, stream)

    def kernel(self, dev, acc, target, kind, operands, compute, stream):
        pinned: List[TileIndex] = []
        ops = []
        try:
            for idx in operands:
                ops.append(self.load_operand(dev, idx, kind, target, stream).tile)
                pinned.append(idx)
            result = compute(acc.tile, *ops)
            with dev.lock:
                acc.tile = result
        finally:
            with dev.lock:
                for idx in pinned:
                    unpin(dev.cache, idx)

    def end_task(self, dev, acc, target, stream):
        writeback(dev.arena, dev.cache, self.A, target, stream)
        with dev.lock:
            unpin(dev.cache, target)


class RetainingStaging(CachedStaging):
    """V3: a stream holds the diagonal tile of a column on its device from
    its first TRSM of that column through its last one.

    A stream holds at most one diagonal, and only across the GEMM updates
    of its next task, so a device never keeps more diagonals than it has
    streams.
    """

    def __init__(self, A, pmap, tasks: Sequence[TaskDescriptor], devices: int):
        super().__init__(A, pmap)
        self.devices = devices
        self.keeps: Set[TileIndex] = set()
        self.holding: Dict[Tuple[int, int], TileIndex] = {}
        self.checks: List[DiagonalHoldCheck] = []
        for queue in tasks_per_stream(list(tasks)).values():
            for task, following in zip(queue, queue[1:]):
                if (task.kind is TaskKind.OFFDIAGONAL and following.kind is TaskKind.OFFDIAGONAL
                        and following.target.col == task.target.col):
                    self.keeps.add(task.target)

    def load_operand(self, dev, idx, kind, target, stream):
        if kind is not KernelKind.TRSM:
            return super().load_operand(dev, idx, kind, target, stream)
        holder = (dev.device_id, stream)
        with dev.lock:
            self.checks.append(
                DiagonalHoldCheck(
                    column=idx.col,
                    device=dev.device_id,
                    stream=stream,
                    target=target,
                    first_on_stream=self.holding.get(holder) != idx,
                    held=dev.cache.holds(idx, holder),
                ))
        slot = self.load_pinned(dev, idx, stream)
        with dev.lock:
            dev.cache.retain(idx, holder)
            self.holding[holder] = idx
        return slot

    def task_done(self, dev, task):
        if task.kind is not TaskKind.OFFDIAGONAL or task.target in self.keeps:
            return
        holder = (dev.device_id, task.local_stream(self.devices))
        with dev.lock:
            diag = self.holding.pop(holder, None)
            if diag is not None:
                dev.cache.release(diag, holder)
                logger.debug("device %s stream %s released diagonal %s", dev.device_id,
                             holder[1], diag)


def make_staging(variant: Variant, A: TiledSymmetricMatrix, pmap: PrecisionMap,
                 tasks: Sequence[TaskDescriptor], devices: int) -> Staging:
    if variant in (Variant.Sync, Variant.Async):
        return ScratchStaging(A, pmap)
    if variant is Variant.V1:
        return AccumulatorStaging(A, pmap)
    if variant is Variant.V2:
        return CachedStaging(A, pmap)
    return RetainingStaging(A, pmap, tasks, devices)


class Factorization:
    """One run: shared state of every stream plus the per-task driver"""

    def __init__(self, A: TiledSymmetricMatrix, pmap: PrecisionMap, cfg: ClusterConfig):
        self.A = A
        self.pmap = pmap
        self.cfg = cfg
        self.clock = RunClock()
        self.devices = [Device(d, cfg, self.clock) for d in range(cfg.devices)]
        self.tasks = enumerate_tasks(A.nt, cfg.total_streams)
        self.progress = ProgressTable(A.nt)
        self.turns = TurnTable(sorted(tasks_per_stream(self.tasks))) if cfg.lockstep else None
        self.trace = EventTrace()
        self.staging = make_staging(cfg.variant, A, pmap, self.tasks, cfg.devices)
        self.kernel_counts: Counter = Counter()
        self.precision_counts: Counter = Counter()
        self.violations: List[DependencyViolation] = []
        self._lock = threading.Lock()

    def _take(self, stream: int) -> None:
        if self.turns is not None:
            self.turns.acquire(stream, self.cfg.watchdog_seconds)

    def _pass(self) -> None:
        if self.turns is not None:
            self.turns.advance()

    def _await(self, stream: int, inputs: Sequence[TileIndex]) -> None:
        """Block until every input is Ready; in lockstep runs return holding the turn"""
        if self.turns is None:
            for idx in inputs:
                await_ready(self.progress, idx, self.cfg.watchdog_seconds)
            return
        deadline = self.clock.now() + self.cfg.watchdog_seconds
        while True:
            self.turns.acquire(stream, self.cfg.watchdog_seconds)
            missing = [idx for idx in inputs if not self.progress.is_ready(idx)]
            if not missing:
                return
            self.turns.advance()
            if self.clock.now() > deadline:
                raise DeadlineExceeded(
                    f"Ready{missing[0]} not set within {self.cfg.watchdog_seconds} s",
                    tile=missing[0], timeout=self.cfg.watchdog_seconds)

    def _timed(self, kind: KernelKind, fn: Compute, target: TileIndex, dev: Device, stream: int,
               inputs: Sequence[TileIndex] = ()) -> Compute:
        prec = self.pmap[target]

        def compute(*tiles: TileBuffer) -> TileBuffer:
            if self.cfg.check_dependencies:
                self._check_inputs(kind, target, inputs)
            t0 = self.clock.now()
            out = fn(*tiles)
            t1 = self.clock.now()
            self.trace.record(TraceEvent(kind, target, dev.device_id, stream, t0, t1, prec))
            with self._lock:
                self.kernel_counts[kind.value] += 1
                self.precision_counts[prec.value] += 1
            return out

        return compute

    def _check_inputs(self, kind: KernelKind, target: TileIndex,
                      inputs: Sequence[TileIndex]) -> None:
        for idx in inputs:
            if not self.progress.is_ready(idx):
                logger.error("%s on %s read %s before it was ready", kind.value, target, idx)
                with self._lock:
                    self.violations.append(DependencyViolation(kind, target, idx))

    def _run_task(self, task: TaskDescriptor) -> None:
        D = self.cfg.devices
        dev = self.devices[task.device(D)]
        stream = task.local_stream(D)
        target = task.target
        m, k = target.row, target.col
        prec = self.pmap[target]
        diagonal = task.kind is TaskKind.DIAGONAL

        def run(kind, fn, inputs):
            self._await(task.owner_stream, inputs)
            try:
                self.staging.kernel(dev, acc, target, kind, inputs,
                                    self._timed(kind, fn, target, dev, stream, inputs), stream)
            finally:
                self._pass()

        self._take(task.owner_stream)
        try:
            acc = self.staging.begin_task(dev, target, stream)
        finally:
            self._pass()
        for n in range(k):
            if diagonal:
                run(KernelKind.SYRK, lambda c, a: syrk_update(c, a, prec), [TileIndex(k, n)])
            else:
                run(KernelKind.GEMM, lambda c, a, b: gemm_update(c, a, b, prec),
                    [TileIndex(m, n), TileIndex(k, n)])
        if diagonal:
            run(KernelKind.POTRF, self._potrf(target, prec), [])
        else:
            run(KernelKind.TRSM, lambda c, lkk: trsm_tile(c, lkk, prec), [TileIndex(k, k)])
        self._take(task.owner_stream)
        try:
            self.staging.end_task(dev, acc, target, stream)
            self.progress.set_ready(target)
            self.staging.task_done(dev, task)
        finally:
            self._pass()
        logger.debug("stream %s on device %s finished %s", stream, dev.device_id, target)

    @staticmethod
    def _potrf(target: TileIndex, prec) -> Compute:

        def potrf(c: TileBuffer) -> TileBuffer:
            try:
                return potrf_tile(c, prec)
            except NotPositiveDefinite as e:
                raise e.with_tile(target) from e

        return potrf

    def _run_stream(self, stream: int, tasks: Sequence[TaskDescriptor]) -> None:
        for task in tasks:
            self._run_task(task)
        if self.turns is not None:
            self.turns.acquire(stream, self.cfg.watchdog_seconds)
            self.turns.retire(stream)

    def run(self) -> FactorizationResult:
        t0 = self.clock.now()
        streams = tasks_per_stream(self.tasks)
        with ThreadPoolExecutor(max_workers=len(streams),
                                thread_name_prefix="tilechol-stream") as pool:
            futures = [pool.submit(self._run_stream, s, streams[s]) for s in sorted(streams)]
            done, _ = wait(futures, return_when=FIRST_EXCEPTION)
            if any(f.exception() is not None for f in done):
                self.progress.abort()
                if self.turns is not None:
                    self.turns.abort()
            wait(futures)
        errors = [f.exception() for f in futures if f.exception() is not None]
        if errors:
            primary = next((e for e in errors if not isinstance(e, RunAborted)), errors[0])
            logger.error("factorization failed: %s", primary)
            raise primary
        wall = self.clock.now() - t0

        ledgers = [dev.ledger for dev in self.devices]
        self.trace.merge_ledgers(ledgers, self.pmap.assignment)
        return FactorizationResult(
            L=self.A,
            ledgers=ledgers,
            trace=self.trace,
            variant=self.cfg.variant,
            devices=self.cfg.devices,
            streams_per_device=self.cfg.effective_streams,
            kernel_counts=dict(self.kernel_counts),
            precision_counts=dict(self.precision_counts),
            wall_seconds=wall,
            violations=list(self.violations),
            cache_stats=[dev.stats() for dev in self.devices],
            diag_checks=list(getattr(self.staging, "checks", [])),
        )


def run_factorization(A: TiledSymmetricMatrix, pmap: PrecisionMap,
                      cfg: ClusterConfig) -> FactorizationResult:
    """Factorize A in place; on return A's lower tiles hold L.

    Tiles are first converted to the precisions of ``pmap``. Raises
    ConfigInfeasible before any work when a device cannot hold the working
    set of its streams.
    """
    if pmap.nt != A.nt:
        raise ValueError(f"precision map for Nt={pmap.nt} does not cover {A}")
    cfg.check_feasible(A, pmap.highest)
    for idx in A.indices():
        A[idx] = convert_tile(A[idx], pmap[idx])

    logger.info("factorizing %s variant=%s devices=%s streams=%s capacity=%s", A,
                cfg.variant.value, cfg.devices, cfg.effective_streams, cfg.capacity_bytes)
    result = Factorization(A, pmap, cfg).run()
    logger.info("factorized in %.3f s, c2g=%s g2c=%s bytes", result.wall_seconds,
                result.c2g_bytes, result.g2c_bytes)
    return result
