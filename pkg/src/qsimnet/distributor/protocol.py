"""Store key scheme, JSON object schemas and work partitioning.

Keys::

    runs/<task_id>/manifest
    runs/<task_id>/claims/<unit>
    runs/<task_id>/results/<unit>
    runs/<task_id>/done

Every object is canonical JSON (sorted keys, compact separators) carrying
``"v": 1``.  Global subtask ``g`` belongs to amplitude ``g // N_s`` and runs
slice assignment ``g % N_s``.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import Any, Sequence

from ..planner import SlicePlan

__all__ = [
    "IntegrityError",
    "RunConfig",
    "SubtaskResult",
    "TaskManifest",
    "canonical_json",
    "claim_key",
    "done_key",
    "manifest_key",
    "partition",
    "result_key",
]

VERSION = 1


class IntegrityError(ValueError):
    pass


def canonical_json(obj: Any) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


def manifest_key(task_id: str) -> str:
    return f"runs/{task_id}/manifest"


def claim_key(task_id: str, unit: int) -> str:
    return f"runs/{task_id}/claims/{unit}"


def result_key(task_id: str, unit: int) -> str:
    return f"runs/{task_id}/results/{unit}"


def done_key(task_id: str) -> str:
    return f"runs/{task_id}/done"


def partition(n_amplitudes: int, n_subtasks: int, n_workers: int) -> list[tuple[int, int]]:
    """Split ``[0, N_a * N_s)`` into ``n_workers`` contiguous ranges whose sizes differ by at most 1."""
    if min(n_amplitudes, n_subtasks, n_workers) < 1:
        raise ValueError("all counts must be positive")
    total = n_amplitudes * n_subtasks
    base, extra = divmod(total, n_workers)
    out, start = [], 0
    for w in range(n_workers):
        size = base + (1 if w < extra else 0)
        out.append((start, start + size))
        start += size
    return out


@dataclass(frozen=True)
class RunConfig:
    n_amplitudes: int
    n_subtasks: int
    n_workers: int = 1
    poll_interval_ms: int = 50
    timeout_s: float = 600.0
    mode: str = "claim"
    units_per_worker: int = 4

    def __post_init__(self):
        if min(self.n_amplitudes, self.n_subtasks, self.n_workers, self.poll_interval_ms,
               self.units_per_worker) < 1 or self.timeout_s <= 0:
            raise ValueError("run configuration values must be positive")
        if self.mode not in ("claim", "push"):
            raise ValueError(f"unknown mode {self.mode!r}")

    def unit_ranges(self) -> list[tuple[int, int]]:
        parts = self.n_workers if self.mode == "push" else self.n_workers * self.units_per_worker
        parts = min(parts, self.n_amplitudes * self.n_subtasks)
        return partition(self.n_amplitudes, self.n_subtasks, parts)


@dataclass(frozen=True)
class TaskManifest:
    task_id: str
    circuit: str
    outputs: tuple[str, ...]
    slice_plan: SlicePlan
    units: tuple[tuple[int, int], ...]
    assignments: dict[int, str] | None = None
    simplify: bool = True
    created_at: float = field(default_factory=time.time)

    def __post_init__(self):
        total = len(self.outputs) * self.slice_plan.subtask_count
        expect = 0
        for start, end in self.units:
            if start != expect or end <= start:
                raise IntegrityError("unit ranges must partition the subtask space without gaps")
            expect = end
        if expect != total:
            raise IntegrityError(f"units cover {expect} of {total} subtasks")

    @property
    def n_subtasks(self) -> int:
        return self.slice_plan.subtask_count

    @classmethod
    def create(cls, task_id: str, circuit_text: str, outputs: Sequence[str], slice_plan: SlicePlan,
               config: RunConfig, simplify: bool = True) -> "TaskManifest":
        units = tuple(config.unit_ranges())
        assignments = None
        if config.mode == "push":
            assignments = {u: f"w{u}" for u in range(len(units))}
        return cls(task_id, circuit_text, tuple(outputs), slice_plan, units, assignments, simplify)

    def to_bytes(self) -> bytes:
        doc = {
            "v": VERSION,
            "task_id": self.task_id,
            "circuit": self.circuit,
            "outputs": list(self.outputs),
            "slice_plan": self.slice_plan.to_dict(),
            "units": [list(u) for u in self.units],
            "assignments": None if self.assignments is None
            else {str(k): v for k, v in self.assignments.items()},
            "simplify": self.simplify,
            "created_at": self.created_at,
        }
        return canonical_json(doc)

    @classmethod
    def from_bytes(cls, data: bytes) -> "TaskManifest":
        try:
            doc = json.loads(data)
            if doc.get("v") != VERSION:
                raise IntegrityError(f"unsupported manifest version {doc.get('v')}")
            assignments = doc.get("assignments")
            return cls(
                doc["task_id"], doc["circuit"], tuple(doc["outputs"]),
                SlicePlan.from_dict(doc["slice_plan"]),
                tuple((int(a), int(b)) for a, b in doc["units"]),
                None if assignments is None else {int(k): v for k, v in assignments.items()},
                bool(doc["simplify"]), float(doc["created_at"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, IntegrityError):
                raise
            raise IntegrityError(f"malformed manifest: {exc}") from None


@dataclass(frozen=True)
class SubtaskResult:
    """Values of every subtask in one unit, in global subtask order."""

    task_id: str
    unit_id: int
    partial_sums: tuple[tuple[int, float, float], ...]
    worker_id: str
    seconds: float

    def to_bytes(self) -> bytes:
        return canonical_json({
            "v": VERSION,
            "task_id": self.task_id,
            "unit_id": self.unit_id,
            "partial_sums": [list(p) for p in self.partial_sums],
            "worker_id": self.worker_id,
            "seconds": self.seconds,
        })

    @classmethod
    def from_bytes(cls, data: bytes) -> "SubtaskResult":
        try:
            doc = json.loads(data)
            if doc.get("v") != VERSION:
                raise IntegrityError(f"unsupported result version {doc.get('v')}")
            sums = tuple((int(a), float(re), float(im)) for a, re, im in doc["partial_sums"])
            if not all(math.isfinite(re) and math.isfinite(im) for _, re, im in sums):
                raise IntegrityError("non-finite value in result")
            return cls(doc["task_id"], int(doc["unit_id"]), sums, str(doc["worker_id"]),
                       float(doc["seconds"]))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, IntegrityError):
                raise
            raise IntegrityError(f"malformed result: {exc}") from None
