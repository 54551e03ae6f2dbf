"""Agent / object-store / worker orchestration of sliced amplitude runs."""

from .agent import RunTimeoutError, collect, publish, run_agent
from .protocol import (
    IntegrityError,
    RunConfig,
    SubtaskResult,
    TaskManifest,
    partition,
)
from .store import DirectoryStore, InMemoryStore, ObjectExistsError, ObjectStore, StoreUnavailable
from .worker import WorkerError, run_worker

__all__ = [
    "DirectoryStore",
    "InMemoryStore",
    "IntegrityError",
    "ObjectExistsError",
    "ObjectStore",
    "RunConfig",
    "RunTimeoutError",
    "StoreUnavailable",
    "SubtaskResult",
    "TaskManifest",
    "WorkerError",
    "collect",
    "partition",
    "publish",
    "run_agent",
    "run_worker",
]
