"""Worker side: find open tasks, claim units, evaluate subtasks, upload results."""

from __future__ import annotations

import json
import logging
import time
from typing import Callable

from ..circuit import parse_grcs
from ..engine import NetworkTemplate, evaluate_subtask
from ..tensor_network import Bitstring
from .protocol import (
    SubtaskResult,
    TaskManifest,
    canonical_json,
    claim_key,
    done_key,
    manifest_key,
    result_key,
)
from .store import ObjectStore, StoreUnavailable

log = logging.getLogger(__name__)


class WorkerError(RuntimeError):
    pass


def _retry(fn: Callable, *args, attempts: int = 5, base_delay: float = 0.05):
    for n in range(attempts):
        try:
            return fn(*args)
        except (StoreUnavailable, OSError) as exc:
            if n == attempts - 1:
                raise WorkerError(f"store unavailable after {attempts} attempts: {exc}") from exc
            time.sleep(base_delay * 2**n)


class _TaskCache:
    def __init__(self, manifest: TaskManifest):
        self.manifest = manifest
        self.template = NetworkTemplate(parse_grcs(manifest.circuit), manifest.simplify)
        self.networks: dict[int, object] = {}

    def network(self, amp: int):
        if amp not in self.networks:
            self.networks[amp] = self.template.network(Bitstring.from_str(self.manifest.outputs[amp]))
        return self.networks[amp]


def run_worker(
    store: ObjectStore,
    worker_id: str,
    wait_s: float = 0.0,
    poll_interval_ms: int = 50,
    subtask_delay_s: float = 0.0,
) -> int:
    """Process units until none are left; return how many units this worker uploaded.

    With ``wait_s > 0`` the worker keeps polling for new or unfinished tasks
    until it has been idle that long.  Units this worker claimed in an earlier
    life but never finished are picked up again first.
    """
    caches: dict[str, _TaskCache] = {}
    processed = 0
    idle_since = time.monotonic()
    while True:
        did_work = False
        for key in _retry(store.list, "runs/"):
            if not key.endswith("/manifest"):
                continue
            task = key.split("/")[1]
            if _retry(store.get, done_key(task)) is not None:
                caches.pop(task, None)
                continue
            if task not in caches:
                caches[task] = _TaskCache(TaskManifest.from_bytes(_retry(store.get, manifest_key(task))))
            for unit in _my_units(store, caches[task].manifest, worker_id):
                if _process_unit(store, caches[task], unit, worker_id, subtask_delay_s):
                    processed += 1
                did_work = True
        if did_work:
            idle_since = time.monotonic()
            continue
        if time.monotonic() - idle_since >= wait_s:
            return processed
        time.sleep(poll_interval_ms / 1000)


def _my_units(store: ObjectStore, m: TaskManifest, worker_id: str):
    task = m.task_id
    for unit in range(len(m.units)):
        if m.assignments is not None and m.assignments.get(unit) != worker_id:
            continue
        if _retry(store.get, result_key(task, unit)) is not None:
            continue
        claim = canonical_json({"v": 1, "worker_id": worker_id, "at": time.time()})
        if _retry(store.put_if_absent, claim_key(task, unit), claim):
            yield unit
            continue
        holder = _retry(store.get, claim_key(task, unit))
        if holder is not None and json.loads(holder).get("worker_id") == worker_id:
            # claimed by a previous incarnation of this worker
            yield unit


def _process_unit(store, cache: _TaskCache, unit: int, worker_id: str, delay: float) -> bool:
    m = cache.manifest
    start, end = m.units[unit]
    ns = m.n_subtasks
    t0 = time.perf_counter()
    sums = []
    for g in range(start, end):
        amp, k = divmod(g, ns)
        v = evaluate_subtask(cache.network(amp), m.slice_plan, k)
        sums.append((amp, v.real, v.imag))
        if delay:
            time.sleep(delay)
    res = SubtaskResult(m.task_id, unit, tuple(sums), worker_id, time.perf_counter() - t0)
    if not _retry(store.put_if_absent, result_key(m.task_id, unit), res.to_bytes()):
        log.info("unit %d of %s already has a result; keeping the first", unit, m.task_id)
        return False
    return True
