import enum
from dataclasses import dataclass
from typing import Dict, List

from tilechol.core import TileIndex, lower_indices


class Variant(str, enum.Enum):
    Sync = "Sync"
    Async = "Async"
    V1 = "V1"
    V2 = "V2"
    V3 = "V3"

    @property
    def caches_operands(self) -> bool:
        return self in (Variant.V2, Variant.V3)

    @property
    def retains_accumulator(self) -> bool:
        return self in (Variant.V1, Variant.V2, Variant.V3)


class TaskKind(str, enum.Enum):
    DIAGONAL = "diagonal"  # SYRK* then POTRF
    OFFDIAGONAL = "offdiagonal"  # GEMM* then TRSM


@dataclass(frozen=True)
class TaskDescriptor:
    target: TileIndex
    kind: TaskKind
    owner_stream: int
    position: int

    def device(self, devices: int) -> int:
        """Global stream ids interleave devices round-robin"""
        return self.owner_stream % devices

    def local_stream(self, devices: int) -> int:
        return self.owner_stream // devices


def enumerate_tasks(nt: int, total_streams: int = 1) -> List[TaskDescriptor]:
    """Tasks in column-major order of the lower triangle, owned 1D cyclically."""
    if nt < 1:
        raise ValueError("Nt must be at least 1")
    if total_streams < 1:
        raise ValueError("need at least one stream")
    return [
        TaskDescriptor(
            target=idx,
            kind=TaskKind.DIAGONAL if idx.is_diagonal else TaskKind.OFFDIAGONAL,
            owner_stream=pos % total_streams,
            position=pos,
        ) for pos, idx in enumerate(lower_indices(nt))
    ]


def tasks_per_stream(tasks: List[TaskDescriptor]) -> Dict[int, List[TaskDescriptor]]:
    out: Dict[int, List[TaskDescriptor]] = {}
    for t in tasks:
        out.setdefault(t.owner_stream, []).append(t)
    return out
