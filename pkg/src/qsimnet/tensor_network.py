"""Dense tensors with integer index ids and the amplitude network of a circuit.

Nodes hold tensors; an index id shared by several nodes is a hyperedge that
is summed once no other node holds it.  Every tensor axis has dimension 2 in
networks built from circuits, but nothing below assumes it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .circuit import Circuit, gate_matrix

__all__ = [
    "BuildError",
    "ContractError",
    "SliceError",
    "Bitstring",
    "Tensor",
    "TensorNetwork",
    "build_network",
    "contract_pair",
    "fix_index",
    "simplify",
]

# merged worldline of a single-partner qubit may not exceed this rank
LEAF_QUBIT_MAX_RANK = 16


class BuildError(ValueError):
    pass


class ContractError(ValueError):
    pass


class SliceError(ValueError):
    pass


@dataclass(frozen=True)
class Bitstring:
    bits: tuple[int, ...]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if any(b not in (0, 1) for b in bits):
            raise ValueError("bits must be 0 or 1")
        object.__setattr__(self, "bits", bits)

    @property
    def n(self) -> int:
        return len(self.bits)

    @classmethod
    def from_str(cls, s: str) -> "Bitstring":
        return cls(tuple(int(ch) for ch in s.strip()))

    @classmethod
    def from_int(cls, value: int, n: int) -> "Bitstring":
        """Qubit 0 is the most significant bit of ``value``."""
        return cls(tuple((value >> (n - 1 - q)) & 1 for q in range(n)))

    def to_int(self) -> int:
        out = 0
        for b in self.bits:
            out = (out << 1) | b
        return out

    def __str__(self) -> str:
        return "".join(map(str, self.bits))


@dataclass(frozen=True)
class Tensor:
    """Dense complex tensor; axis ``k`` of ``data`` is labelled ``indices[k]``."""

    indices: tuple[int, ...]
    data: np.ndarray

    def __post_init__(self):
        indices = tuple(int(i) for i in self.indices)
        data = np.asarray(self.data, dtype=np.complex128)
        if len(set(indices)) != len(indices):
            raise ValueError(f"repeated index in {indices}")
        if data.ndim != len(indices):
            raise ValueError(f"data rank {data.ndim} does not match {len(indices)} indices")
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "data", data)

    @property
    def rank(self) -> int:
        return len(self.indices)

    @property
    def dims(self) -> dict[int, int]:
        return dict(zip(self.indices, self.data.shape))

    @property
    def size(self) -> int:
        return int(self.data.size)

    def transpose_to(self, order: Sequence[int]) -> np.ndarray:
        return np.transpose(self.data, [self.indices.index(i) for i in order])


def contract_pair(a: Tensor, b: Tensor, keep: Iterable[int] = ()) -> Tensor:
    """Sum over the indices shared by ``a`` and ``b``.

    Shared indices listed in ``keep`` stay on the result (hyperedges still
    held by other nodes).  Result indices are ``a``'s survivors followed by
    ``b``'s new ones.
    """
    da, db = a.dims, b.dims
    shared = [i for i in a.indices if i in db]
    for i in shared:
        if da[i] != db[i]:
            raise ContractError(f"index {i} has dimension {da[i]} vs {db[i]}")
    keep = set(keep) & set(shared)
    if not keep:
        ax_a = [a.indices.index(i) for i in shared]
        ax_b = [b.indices.index(i) for i in shared]
        data = np.tensordot(a.data, b.data, axes=(ax_a, ax_b))
        out = [i for i in a.indices if i not in db] + [i for i in b.indices if i not in da]
        return Tensor(tuple(out), data)
    out = [i for i in a.indices if i not in db or i in keep] + [i for i in b.indices if i not in da]
    labels = {ix: k for k, ix in enumerate(dict.fromkeys(a.indices + b.indices))}
    data = np.einsum(
        a.data, [labels[i] for i in a.indices], b.data, [labels[i] for i in b.indices],
        [labels[i] for i in out],
    )
    return Tensor(tuple(out), data)


def fix_index(tensor: Tensor, index: int, value: int) -> Tensor:
    if index not in tensor.indices:
        raise SliceError(f"index {index} not in tensor {tensor.indices}")
    axis = tensor.indices.index(index)
    if not 0 <= value < tensor.data.shape[axis]:
        raise SliceError(f"value {value} out of range for index {index}")
    data = np.take(tensor.data, value, axis=axis)
    return Tensor(tensor.indices[:axis] + tensor.indices[axis + 1:], data)


@dataclass(frozen=True)
class TensorNetwork:
    """Closed or open tensor network.

    ``tags`` records which circuit qubits each node's tensor came from and
    ``wire_qubit`` which qubit owns each index; both are bookkeeping only.
    """

    nodes: Mapping[int, Tensor]
    open_indices: tuple[int, ...] = ()
    tags: Mapping[int, frozenset] = field(default_factory=dict)
    wire_qubit: Mapping[int, int] = field(default_factory=dict)

    @property
    def edges(self) -> dict[int, set[int]]:
        out: dict[int, set[int]] = {}
        for nid, t in self.nodes.items():
            for i in t.indices:
                out.setdefault(i, set()).add(nid)
        return out

    def structure(self) -> dict[int, tuple[int, ...]]:
        return {nid: t.indices for nid, t in self.nodes.items()}

    def dims(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for t in self.nodes.values():
            out.update(t.dims)
        return out

    def live_qubits(self) -> set[int]:
        """Qubits that still own at least one index in the network."""
        return {self.wire_qubit[i] for i in self.edges if i in self.wire_qubit}

    def fix(self, assignment: Mapping[int, int]) -> "TensorNetwork":
        nodes = {}
        for nid, t in self.nodes.items():
            for i, v in assignment.items():
                if i in t.indices:
                    t = fix_index(t, i, v)
            nodes[nid] = t
        missing = set(assignment) - set(self.edges)
        if missing:
            raise SliceError(f"indices {sorted(missing)} not in network")
        return TensorNetwork(nodes, self.open_indices, self.tags, self.wire_qubit)

    def to_json(self) -> str:
        doc = {
            "v": 1,
            "open_indices": list(self.open_indices),
            "nodes": [
                {
                    "id": nid,
                    "indices": list(t.indices),
                    "dims": list(t.data.shape),
                    "data": [[float(z.real), float(z.imag)] for z in t.data.reshape(-1)],
                    "tags": sorted(self.tags.get(nid, ())),
                }
                for nid, t in sorted(self.nodes.items())
            ],
            "edges": {str(i): sorted(ns) for i, ns in sorted(self.edges.items())},
            "wire_qubit": {str(i): q for i, q in sorted(self.wire_qubit.items())},
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TensorNetwork":
        doc = json.loads(text)
        nodes, tags = {}, {}
        for nd in doc["nodes"]:
            flat = np.array([complex(re, im) for re, im in nd["data"]], dtype=np.complex128)
            nodes[nd["id"]] = Tensor(tuple(nd["indices"]), flat.reshape(nd["dims"]))
            tags[nd["id"]] = frozenset(nd["tags"])
        wire = {int(i): q for i, q in doc.get("wire_qubit", {}).items()}
        return cls(nodes, tuple(doc["open_indices"]), tags, wire)


def build_network(circuit: Circuit, output: Bitstring) -> TensorNetwork:
    """Network contracting to ``<output| C |0...0>``.

    Node ids: inputs ``0..n-1``, then one node per gate in circuit order, then
    the output projectors.  Index ids are assigned in the same sweep.
    """
    n = circuit.n_qubits
    if output.n != n:
        raise BuildError(f"bitstring has {output.n} bits for {n} qubits")
    nodes: dict[int, Tensor] = {}
    tags: dict[int, frozenset] = {}
    wire_qubit: dict[int, int] = {}
    next_index = 0

    def new_index(q):
        nonlocal next_index
        wire_qubit[next_index] = q
        next_index += 1
        return next_index - 1

    wire = [new_index(q) for q in range(n)]
    zero = np.array([1, 0], dtype=np.complex128)
    for q in range(n):
        nodes[q] = Tensor((wire[q],), zero)
        tags[q] = frozenset((q,))
    nid = n
    for g in circuit.gates:
        ins = [wire[q] for q in g.qubits]
        outs = [new_index(q) for q in g.qubits]
        mat = gate_matrix(g.kind)
        k = g.kind.arity
        nodes[nid] = Tensor(tuple(outs) + tuple(ins), mat.reshape((2,) * (2 * k)))
        tags[nid] = frozenset(g.qubits)
        for q, o in zip(g.qubits, outs):
            wire[q] = o
        nid += 1
    for q in range(n):
        proj = np.zeros(2, dtype=np.complex128)
        proj[output.bits[q]] = 1
        nodes[nid] = Tensor((wire[q],), proj)
        tags[nid] = frozenset((q,))
        nid += 1
    return TensorNetwork(nodes, (), tags, wire_qubit)


class _Work:
    """Mutable scratch copy of a network used while simplifying."""

    def __init__(self, net: TensorNetwork):
        self.nodes = dict(net.nodes)
        self.tags = {k: frozenset(net.tags.get(k, ())) for k in self.nodes}
        self.edges = {i: set(ns) for i, ns in net.edges.items()}
        self.open = set(net.open_indices)

    def neighbors(self, nid: int) -> set[int]:
        out = set()
        for i in self.nodes[nid].indices:
            out |= self.edges[i]
        out.discard(nid)
        return out

    def merge(self, keep: int, gone: int) -> None:
        a, b = self.nodes[keep], self.nodes.pop(gone)
        shared = set(a.indices) & set(b.indices)
        hold = {i for i in shared if self.edges[i] - {keep, gone} or i in self.open}
        self.nodes[keep] = contract_pair(a, b, keep=hold)
        self.tags[keep] = self.tags[keep] | self.tags.pop(gone)
        for i in b.indices:
            self.edges[i].discard(gone)
            if i in shared and i not in hold:
                del self.edges[i]
            else:
                self.edges[i].add(keep)


def simplify(network: TensorNetwork) -> TensorNetwork:
    """Absorb cheap tensors into neighbours.

    Passes, repeated to a fixpoint, all decided from index structure alone so
    that networks differing only in tensor values simplify identically:

    * a qubit whose wire-holding nodes touch the wires of only one other
      qubit has all those nodes merged into one, if its rank stays within
      ``LEAF_QUBIT_MAX_RANK`` (this runs first, while wires are still
      unmixed);
    * a node of rank <= 2, or whose indices all lead to one other node, is
      merged into a neighbour (the neighbour whose result is smallest, lowest
      id on ties; the survivor keeps the neighbour's id);
    * scalar nodes are folded into the lowest-id remaining node.
    """
    w = _Work(network)
    changed = True
    while changed:
        changed = _absorb_leaf_qubits(w, network.wire_qubit) | _absorb_small(w)
    scalars = sorted(k for k, t in w.nodes.items() if t.rank == 0)
    rest = sorted(k for k in w.nodes if k not in scalars)
    if len(w.nodes) > 1 and scalars:
        target = rest[0] if rest else scalars[0]
        for s in scalars:
            if s != target:
                w.merge(target, s)
    return TensorNetwork(
        dict(sorted(w.nodes.items())), network.open_indices,
        {k: w.tags[k] for k in sorted(w.nodes)}, network.wire_qubit,
    )


def _absorb_small(w: _Work) -> bool:
    changed = False
    progress = True
    while progress:
        progress = False
        for nid in sorted(w.nodes):
            if nid not in w.nodes:
                continue
            t = w.nodes[nid]
            nbrs = w.neighbors(nid)
            if not nbrs or any(i in w.open for i in t.indices):
                continue
            if t.rank > 2 and len(nbrs) > 1:
                continue
            target = min(nbrs, key=lambda m: (_merged_rank(w, m, nid), m))
            if _merged_rank(w, target, nid) > max(w.nodes[target].rank, t.rank):
                continue
            w.merge(target, nid)
            progress = changed = True
    return changed


def _merged_rank(w: _Work, a: int, b: int) -> int:
    ia, ib = set(w.nodes[a].indices), set(w.nodes[b].indices)
    out = ia ^ ib
    out |= {i for i in ia & ib if w.edges[i] - {a, b} or i in w.open}
    return len(out)


def _absorb_leaf_qubits(w: _Work, wire_qubit: Mapping[int, int]) -> bool:
    changed = False
    owned: dict[int, set[int]] = {}
    for i, holders in w.edges.items():
        if i in wire_qubit:
            owned.setdefault(wire_qubit[i], set()).update(holders)
    for q in sorted(owned):
        members = sorted(k for k in owned[q] if k in w.nodes)
        if len(members) < 2:
            continue
        touched = {wire_qubit.get(i) for k in members for i in w.nodes[k].indices}
        if len(touched - {q}) != 1 or None in touched:
            continue
        external = {
            i for k in members for i in w.nodes[k].indices
            if (w.edges[i] - set(members)) or i in w.open
        }
        if len(external) > LEAF_QUBIT_MAX_RANK:
            continue
        keep, rest = members[0], set(members[1:])
        while rest:
            nbrs = w.neighbors(keep) & rest
            nxt = min(nbrs) if nbrs else min(rest)
            w.merge(keep, nxt)
            rest.discard(nxt)
        changed = True
    return changed
