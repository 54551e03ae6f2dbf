"""Plan execution: single subtasks, amplitudes and batches of amplitudes."""

from __future__ import annotations

import os
import time
from concurrent.futures import Executor, ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

from .circuit import Circuit
from .planner import PlanError, SlicePlan, find_order, select_slices, DEFAULT_MAX_LOG2_SIZE
from .tensor_network import (
    Bitstring,
    ContractError,
    SliceError,
    Tensor,
    TensorNetwork,
    build_network,
    contract_pair,
    simplify,
)

__all__ = [
    "AmplitudeResult",
    "NetworkTemplate",
    "Replay",
    "amplitude",
    "batch_amplitudes",
    "contract_full",
    "evaluate_subtask",
    "reduce_ordered",
    "replay",
]


@dataclass(frozen=True)
class Replay:
    value: complex
    flops: int
    peak_entries: int


@dataclass(frozen=True)
class AmplitudeResult:
    bitstring: Bitstring
    amplitude: complex
    subtasks_evaluated: int
    wall_seconds: float

    def to_json_dict(self) -> dict:
        return {
            "bitstring": str(self.bitstring),
            "re": self.amplitude.real,
            "im": self.amplitude.imag,
            "seconds": self.wall_seconds,
        }


def replay(network: TensorNetwork, steps: Sequence[tuple[int, int]]) -> Replay:
    """Contract ``network`` along ``steps`` and record the work actually done."""
    nodes: dict[int, Tensor] = dict(network.nodes)
    count: dict[int, int] = {}
    for t in nodes.values():
        for i in t.indices:
            count[i] = count.get(i, 0) + 1
    opened = set(network.open_indices)
    flops, peak = 0, 1
    for a, b in steps:
        if a == b or a not in nodes or b not in nodes:
            raise PlanError(f"invalid step {(a, b)}")
        ta, tb = nodes[a], nodes.pop(b)
        shared = set(ta.indices) & set(tb.indices)
        keep = {i for i in shared if count[i] > 2 or i in opened}
        dims = {**ta.dims, **tb.dims}
        work = 1
        for i in set(ta.indices) | set(tb.indices):
            work *= dims[i]
        flops += work
        res = contract_pair(ta, tb, keep)
        for i in shared:
            count[i] -= 1
        nodes[a] = res
        peak = max(peak, res.size)
    if len(nodes) != 1:
        raise PlanError(f"plan leaves {len(nodes)} nodes")
    (last,) = nodes.values()
    if last.rank:
        raise ContractError(f"contraction left open indices {last.indices}")
    return Replay(complex(last.data), flops, peak)


def contract_full(network: TensorNetwork, seed: int = 0) -> complex:
    """Contract a closed network with a freshly found order."""
    return replay(network, find_order(network, seed).steps).value


def evaluate_subtask(
    network: TensorNetwork, sliceplan: SlicePlan, assignment: Mapping[int, int] | int
) -> complex:
    return _evaluate(network, sliceplan, assignment).value


def _evaluate(network, sliceplan, assignment) -> Replay:
    if isinstance(assignment, int):
        assignment = sliceplan.assignment(assignment)
    if set(assignment) != set(sliceplan.sliced_indices):
        raise SliceError("assignment does not cover exactly the sliced indices")
    return replay(network.fix(assignment), sliceplan.per_slice_plan.steps)


def reduce_ordered(values: Sequence[complex]) -> complex:
    """Pairwise tree sum over slot order; the grouping depends only on ``len(values)``."""
    vals = list(values)
    if not vals:
        return 0j
    while len(vals) > 1:
        nxt = [vals[i] + vals[i + 1] for i in range(0, len(vals) - 1, 2)]
        if len(vals) % 2:
            nxt.append(vals[-1])
        vals = nxt
    return complex(vals[0])


class NetworkTemplate:
    """Simplified amplitude network of one circuit, rebuilt per output bitstring.

    Simplification decisions depend only on structure, so every bitstring
    yields the same node ids and indices and one SlicePlan serves them all.
    """

    def __init__(self, circuit: Circuit, do_simplify: bool = True):
        self.circuit = circuit
        self.do_simplify = do_simplify
        self.base = self.network(Bitstring((0,) * circuit.n_qubits))
        self._structure = self.base.structure()

    def network(self, output: Bitstring) -> TensorNetwork:
        net = build_network(self.circuit, output)
        net = simplify(net) if self.do_simplify else net
        if hasattr(self, "_structure") and net.structure() != self._structure:
            raise ContractError("network structure changed with the output bitstring")
        return net

    def plan(self, max_log2_size: int = DEFAULT_MAX_LOG2_SIZE, seed: int = 0, restarts: int = 1) -> SlicePlan:
        order = find_order(self.base, seed, restarts)
        return select_slices(self.base, order, max_log2_size, seed, restarts)


# per-process state for process pools
_STATE: dict = {}


def _init_process(networks, sliceplan):
    _STATE["networks"] = networks
    _STATE["plan"] = sliceplan


def _process_job(job):
    amp, k = job
    return evaluate_subtask(_STATE["networks"][amp], _STATE["plan"], k)


def _run_jobs(networks, sliceplan, jobs, parallelism, backend) -> list[complex]:
    slots: list[complex | None] = [None] * len(jobs)
    if parallelism <= 1:
        for n, (amp, k) in enumerate(jobs):
            slots[n] = evaluate_subtask(networks[amp], sliceplan, k)
        return slots
    pool: Executor
    if backend == "process":
        pool = ProcessPoolExecutor(parallelism, initializer=_init_process, initargs=(networks, sliceplan))
        chunk = max(1, len(jobs) // (4 * parallelism))
        with pool:
            for n, v in enumerate(pool.map(_process_job, jobs, chunksize=chunk)):
                slots[n] = v
        return slots
    if backend != "thread":
        raise ValueError(f"unknown backend {backend!r}")
    with ThreadPoolExecutor(parallelism) as pool:
        futures = {pool.submit(evaluate_subtask, networks[amp], sliceplan, k): n
                   for n, (amp, k) in enumerate(jobs)}
        for fut, n in futures.items():
            slots[n] = fut.result()
    return slots


def amplitude(
    network: TensorNetwork,
    sliceplan: SlicePlan,
    parallelism: int = 1,
    backend: str = "thread",
    bitstring: Bitstring | None = None,
) -> AmplitudeResult:
    if parallelism < 1:
        raise ValueError("parallelism must be at least 1")
    start = time.perf_counter()
    jobs = [(0, k) for k in range(sliceplan.subtask_count)]
    values = _run_jobs([network], sliceplan, jobs, parallelism, backend)
    value = reduce_ordered(values)
    return AmplitudeResult(
        bitstring if bitstring is not None else Bitstring(()),
        value, len(values), time.perf_counter() - start,
    )


def batch_amplitudes(
    template: NetworkTemplate,
    sliceplan: SlicePlan,
    outputs: Sequence[Bitstring],
    parallelism: int = 1,
    backend: str = "thread",
) -> list[AmplitudeResult]:
    """All amplitudes in one pool; each record carries the batch wall time divided by its size."""
    if parallelism < 1:
        raise ValueError("parallelism must be at least 1")
    if len({o.n for o in outputs}) > 1:
        raise ValueError("all outputs must have the same length")
    if not outputs:
        return []
    start = time.perf_counter()
    networks = [template.network(o) for o in outputs]
    ns = sliceplan.subtask_count
    jobs = [(a, k) for a in range(len(outputs)) for k in range(ns)]
    values = _run_jobs(networks, sliceplan, jobs, parallelism, backend)
    per = (time.perf_counter() - start) / len(outputs)
    return [
        AmplitudeResult(o, reduce_ordered(values[a * ns:(a + 1) * ns]), ns, per)
        for a, o in enumerate(outputs)
    ]


def default_parallelism() -> int:
    return os.cpu_count() or 1
