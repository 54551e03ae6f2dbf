"""Agent side: publish a manifest, poll the store, assemble amplitudes."""

from __future__ import annotations

import logging
import time

from ..engine import AmplitudeResult, reduce_ordered
from ..tensor_network import Bitstring
from .protocol import (
    IntegrityError,
    RunConfig,
    SubtaskResult,
    TaskManifest,
    done_key,
    manifest_key,
    result_key,
)
from .store import ObjectStore

log = logging.getLogger(__name__)


class RunTimeoutError(TimeoutError):
    def __init__(self, task_id: str, missing: list[int]):
        super().__init__(f"task {task_id}: units still missing after timeout: {missing}")
        self.missing = missing


def publish(manifest: TaskManifest, store: ObjectStore) -> None:
    key = manifest_key(manifest.task_id)
    data = manifest.to_bytes()
    if not store.put_if_absent(key, data) and store.get(key) != data:
        raise IntegrityError(f"a different manifest already exists for task {manifest.task_id}")


def collect(manifest: TaskManifest, store: ObjectStore, config: RunConfig) -> list[AmplitudeResult]:
    """Poll until every unit has a result, then reduce per amplitude in subtask order."""
    task = manifest.task_id
    ns = manifest.n_subtasks
    start = time.perf_counter()
    results: dict[int, SubtaskResult] = {}
    while True:
        for u in range(len(manifest.units)):
            if u in results:
                continue
            raw = store.get(result_key(task, u))
            if raw is not None:
                results[u] = _check(SubtaskResult.from_bytes(raw), manifest, u)
        if len(results) == len(manifest.units):
            break
        if time.perf_counter() - start > config.timeout_s:
            missing = sorted(set(range(len(manifest.units))) - set(results))
            raise RunTimeoutError(task, missing)
        time.sleep(config.poll_interval_ms / 1000)

    values: list[complex] = []
    for u in range(len(manifest.units)):
        values.extend(complex(re, im) for _, re, im in results[u].partial_sums)
    per = (time.perf_counter() - start) / len(manifest.outputs)
    store.put_if_absent(done_key(task), b"{}")
    return [
        AmplitudeResult(Bitstring.from_str(o), reduce_ordered(values[a * ns:(a + 1) * ns]), ns, per)
        for a, o in enumerate(manifest.outputs)
    ]


def _check(res: SubtaskResult, manifest: TaskManifest, unit: int) -> SubtaskResult:
    start, end = manifest.units[unit]
    if res.task_id != manifest.task_id or res.unit_id != unit:
        raise IntegrityError(f"result for unit {unit} names task {res.task_id} unit {res.unit_id}")
    if len(res.partial_sums) != end - start:
        raise IntegrityError(f"unit {unit} has {len(res.partial_sums)} values, expected {end - start}")
    for g, (amp, _, _) in zip(range(start, end), res.partial_sums):
        if amp != g // manifest.n_subtasks:
            raise IntegrityError(f"unit {unit}: subtask {g} tagged with amplitude {amp}")
    return res


def run_agent(manifest: TaskManifest, store: ObjectStore, config: RunConfig) -> list[AmplitudeResult]:
    publish(manifest, store)
    log.info("published task %s: %d units", manifest.task_id, len(manifest.units))
    return collect(manifest, store, config)
