from .cluster import ClusterConfig, matrix_bytes
from .progress import ProgressTable, TurnTable, await_ready
from .runner import (
    DependencyViolation,
    DiagonalHoldCheck,
    FactorizationResult,
    run_factorization,
)
from .tasks import TaskDescriptor, TaskKind, Variant, enumerate_tasks, tasks_per_stream
from .trace import EventTrace, TraceEvent
