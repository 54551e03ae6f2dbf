"""Contraction order search, slicing and cost accounting.

Everything here works on index structure only (``{node: indices}`` plus
per-index dimensions); tensor data is never touched.

The order search is a greedy heuristic: at every step contract the pair of
index-sharing nodes minimising ``size(result) - size(a) - size(b)``, then
``size(result)``.  Remaining ties are broken by a seeded random relabelling
of node ids, and the best of ``restarts`` trials (by flops, then trial
number) is kept.  One "flop" is one complex multiply-add, so a pairwise step
costs the product of the dimensions of the union of both operands' indices.
"""

from __future__ import annotations

import heapq
import itertools
import json
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .tensor_network import SliceError, TensorNetwork

__all__ = [
    "DEFAULT_MAX_LOG2_SIZE",
    "ContractionPlan",
    "CostReport",
    "PlanError",
    "SlicePlan",
    "estimate_cost",
    "find_order",
    "predict_wall_time",
    "replay_structure",
    "select_slices",
]

DEFAULT_MAX_LOG2_SIZE = 26


class PlanError(ValueError):
    pass


@dataclass(frozen=True)
class ContractionPlan:
    """Pairwise steps ``(keep, gone)``; the result of each step takes id ``keep``."""

    steps: tuple[tuple[int, int], ...]
    est_flops: int
    est_max_log2_size: int

    def to_dict(self) -> dict:
        return {
            "steps": [list(s) for s in self.steps],
            "est_flops": self.est_flops,
            "est_max_log2_size": self.est_max_log2_size,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ContractionPlan":
        return cls(tuple((int(a), int(b)) for a, b in d["steps"]), int(d["est_flops"]),
                   int(d["est_max_log2_size"]))


@dataclass(frozen=True)
class SlicePlan:
    sliced_indices: tuple[int, ...]
    per_slice_plan: ContractionPlan

    @property
    def subtask_count(self) -> int:
        return 1 << len(self.sliced_indices)

    @property
    def per_slice_max_log2_size(self) -> int:
        return self.per_slice_plan.est_max_log2_size

    def assignment(self, k: int) -> dict[int, int]:
        """Slice values for subtask ``k``; the first sliced index is the high bit."""
        if not 0 <= k < self.subtask_count:
            raise SliceError(f"subtask {k} out of range 0..{self.subtask_count - 1}")
        m = len(self.sliced_indices)
        return {ix: (k >> (m - 1 - j)) & 1 for j, ix in enumerate(self.sliced_indices)}

    def to_dict(self) -> dict:
        return {
            "v": 1,
            "sliced_indices": list(self.sliced_indices),
            "subtask_count": self.subtask_count,
            "per_slice_max_log2_size": self.per_slice_max_log2_size,
            "per_slice_plan": self.per_slice_plan.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: Mapping) -> "SlicePlan":
        return cls(tuple(int(i) for i in d["sliced_indices"]),
                   ContractionPlan.from_dict(d["per_slice_plan"]))

    @classmethod
    def from_json(cls, text: str) -> "SlicePlan":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class CostReport:
    per_slice_flops: int
    max_log2_size: int
    subtask_count: int

    @property
    def total_flops(self) -> int:
        return self.subtask_count * self.per_slice_flops

    def to_dict(self) -> dict:
        return {
            "total_flops": self.total_flops,
            "per_slice_flops": self.per_slice_flops,
            "max_log2_size": self.max_log2_size,
            "subtask_count": self.subtask_count,
        }


def _log2(size: int) -> int:
    return max(size - 1, 0).bit_length()


def _size(inds, dims) -> int:
    out = 1
    for i in inds:
        out *= dims[i]
    return out


def replay_structure(
    structure: Mapping[int, Sequence[int]],
    dims: Mapping[int, int],
    steps: Sequence[tuple[int, int]],
    open_indices: Sequence[int] = (),
) -> tuple[int, int]:
    """Replay ``steps`` on index sets; return ``(flops, max log2 intermediate size)``.

    Raises PlanError if the steps are not a valid elimination to one node.
    """
    nodes = {k: frozenset(v) for k, v in structure.items()}
    count: dict[int, int] = {}
    for inds in nodes.values():
        for i in inds:
            count[i] = count.get(i, 0) + 1
    opened = set(open_indices)
    flops, peak = 0, 0
    for a, b in steps:
        if a == b or a not in nodes or b not in nodes:
            raise PlanError(f"invalid step {(a, b)}")
        ia, ib = nodes[a], nodes.pop(b)
        union = ia | ib
        flops += _size(union, dims)
        res = set(union)
        for i in ia & ib:
            count[i] -= 1
            if count[i] == 1 and i not in opened:
                res.discard(i)
                del count[i]
        nodes[a] = frozenset(res)
        peak = max(peak, _log2(_size(res, dims)))
    if len(nodes) > 1:
        raise PlanError(f"plan leaves {len(nodes)} nodes")
    return flops, peak


def _components(structure: Mapping[int, Sequence[int]]) -> int:
    parent = {k: k for k in structure}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    holder: dict[int, int] = {}
    for k, inds in structure.items():
        for i in inds:
            if i in holder:
                parent[find(k)] = find(holder[i])
            else:
                holder[i] = k
    return len({find(k) for k in structure})


def _greedy(structure, dims, open_indices, rank_of) -> tuple[tuple[int, int], ...]:
    nodes = {k: frozenset(v) for k, v in structure.items()}
    holders: dict[int, set[int]] = {}
    for k, inds in nodes.items():
        for i in inds:
            holders.setdefault(i, set()).add(k)
    opened = set(open_indices)
    version = {k: 0 for k in nodes}

    def result(a, b):
        ia, ib = nodes[a], nodes[b]
        return frozenset(
            i for i in ia | ib
            if not (i in ia and i in ib) or len(holders[i]) > 2 or i in opened
        )

    def push(heap, a, b):
        ka, kb = sorted((rank_of[a], rank_of[b]))
        res = _size(result(a, b), dims)
        cost = res - _size(nodes[a], dims) - _size(nodes[b], dims)
        heapq.heappush(heap, (cost, res, ka, kb, a, b, version[a], version[b]))

    heap: list = []
    for i, hs in holders.items():
        for a, b in itertools.combinations(sorted(hs), 2):
            push(heap, a, b)
    seen_pairs = set()
    steps = []
    while len(nodes) > 1:
        if not heap:
            # remaining nodes share nothing: join them smallest first
            order = sorted(nodes, key=lambda k: (_size(nodes[k], dims), rank_of[k]))
            keep = order[0]
            for k in order[1:]:
                steps.append((min(keep, k), max(keep, k)))
                nodes[min(keep, k)] = result(keep, k)
                del nodes[max(keep, k)]
                keep = min(keep, k)
            break
        *_, a, b, va, vb = heapq.heappop(heap)
        if a not in nodes or b not in nodes or version[a] != va or version[b] != vb:
            continue
        keep, gone = min(a, b), max(a, b)
        res = result(a, b)
        for i in nodes[gone]:
            holders[i].discard(gone)
        for i in nodes[keep] | nodes[gone]:
            if i in res:
                holders[i].add(keep)
            else:
                holders[i].discard(keep)
                if not holders[i]:
                    del holders[i]
        nodes[keep] = res
        del nodes[gone]
        version[keep] += 1
        steps.append((keep, gone))
        seen_pairs.clear()
        for i in res:
            for m in holders.get(i, ()):
                if m != keep and m not in seen_pairs:
                    seen_pairs.add(m)
                    push(heap, keep, m)
    return tuple(steps)


def _plan_structure(structure, dims, seed, restarts, open_indices=()) -> ContractionPlan:
    best = None
    ids = sorted(structure)
    for trial in range(max(restarts, 1)):
        perm = np.random.Generator(np.random.PCG64([seed & 0xFFFF_FFFF_FFFF_FFFF, trial])).permutation(len(ids))
        rank_of = {nid: int(r) for nid, r in zip(ids, perm)}
        steps = _greedy(structure, dims, open_indices, rank_of)
        flops, peak = replay_structure(structure, dims, steps, open_indices)
        plan = ContractionPlan(steps, flops, peak)
        if best is None or plan.est_flops < best.est_flops:
            best = plan
    return best


def find_order(network: TensorNetwork, seed: int = 0, restarts: int = 1) -> ContractionPlan:
    structure = network.structure()
    if not structure:
        raise PlanError("empty network")
    if _components(structure) > 1:
        raise PlanError("network is disconnected; contract components separately")
    return _plan_structure(structure, network.dims(), seed, restarts, network.open_indices)


def _pinned(structure, sliced):
    drop = set(sliced)
    return {k: tuple(i for i in v if i not in drop) for k, v in structure.items()}


def select_slices(
    network: TensorNetwork,
    plan: ContractionPlan,
    max_log2_size: int = DEFAULT_MAX_LOG2_SIZE,
    seed: int = 0,
    restarts: int = 1,
) -> SlicePlan:
    """Pin indices one at a time until every intermediate fits ``2**max_log2_size`` entries.

    Each round scores every candidate index by replaying the current plan
    with it pinned, picks the best ``(max size, flops, index id)``, then
    re-plans the pinned network and keeps whichever of the two orders is
    cheaper.
    """
    if max_log2_size < 1:
        raise SliceError("max_log2_size must be at least 1")
    structure = network.structure()
    dims = network.dims()
    opened = network.open_indices
    sliced: list[int] = []
    current = plan
    while current.est_max_log2_size > max_log2_size:
        pinned = _pinned(structure, sliced)
        candidates = sorted({i for v in pinned.values() for i in v} - set(opened))
        if not candidates:
            raise SliceError(f"cannot reach 2**{max_log2_size} entries even with every index sliced")
        scored = []
        for i in candidates:
            flops, peak = replay_structure(_pinned(pinned, [i]), dims, current.steps, opened)
            scored.append((peak, flops, i))
        peak, flops, pick = min(scored)
        sliced.append(pick)
        reused = ContractionPlan(current.steps, flops, peak)
        replanned = _plan_structure(_pinned(structure, sliced), dims, seed, restarts, opened)
        current = min(
            (reused, replanned), key=lambda p: (p.est_max_log2_size, p.est_flops)
        )
    return SlicePlan(tuple(sliced), current)


def estimate_cost(sliceplan: SlicePlan) -> CostReport:
    p = sliceplan.per_slice_plan
    return CostReport(p.est_flops, p.est_max_log2_size, sliceplan.subtask_count)


def predict_wall_time(
    subtask_count: int, per_subtask_seconds: float, workers: int, n_amplitudes: int = 1
) -> float:
    """Equal-cost subtasks spread over ``workers``: the busiest one sets the wall time."""
    if workers < 1:
        raise ValueError("workers must be positive")
    return per_subtask_seconds * math.ceil(n_amplitudes * subtask_count / workers)
