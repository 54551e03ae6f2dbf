"""Random quantum circuits: representation, GRCS text I/O and generation.

Qubits on a grid are numbered row-major (``row * cols + col``).  Cycle 0 and
cycle ``t + 1`` are the boundary Hadamard layers; cycles ``1..t`` each carry
one CZ configuration plus single-qubit gates on the remaining qubits.

CZ configurations
-----------------
The eight brick patterns are indexed by ``layer = (cycle - 1) % 8`` and
remapped through ``CZ_LAYER_ORDER`` to an internal pattern ``p``:

* ``p`` even: horizontal pairs ``(r, c)-(r, c+1)`` with ``(2r + c) % 4 == p // 2``
* ``p`` odd: vertical pairs ``(r, c)-(r+1, c)`` with ``(r + 2c) % 4 == p // 2``

Random choices
--------------
The generator draws from numpy's ``PCG64`` bit generator seeded with the
user seed.  Each √X/√Y choice consumes one raw 64-bit output and picks √Y
iff its top bit is set, so the stream depends only on the PCG64 algorithm.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "CZ_LAYER_ORDER",
    "Circuit",
    "Gate",
    "GateKind",
    "GridSpec",
    "ParseError",
    "Violation",
    "circuit_from_cz_layers",
    "cz_layer_edges",
    "gate_matrix",
    "generate_random_circuit",
    "parse_grcs",
    "render_grcs",
    "validate_prescription",
]

CZ_LAYER_ORDER = (0, 3, 2, 1, 4, 7, 6, 5)


class ParseError(ValueError):
    """Malformed GRCS text.  ``line`` is 1-based, or 0 for whole-file errors."""

    def __init__(self, message: str, line: int = 0):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


class GateKind(enum.Enum):
    H = "h"
    T = "t"
    SqrtX = "x_1_2"
    SqrtY = "y_1_2"
    CZ = "cz"

    @property
    def arity(self) -> int:
        return 2 if self is GateKind.CZ else 1


_S2 = 1 / np.sqrt(2)
_MATRICES = {
    GateKind.H: np.array([[_S2, _S2], [_S2, -_S2]], dtype=np.complex128),
    GateKind.T: np.array([[1, 0], [0, np.exp(1j * np.pi / 4)]], dtype=np.complex128),
    GateKind.SqrtX: 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]], dtype=np.complex128),
    GateKind.SqrtY: 0.5 * np.array([[1 + 1j, -1 - 1j], [1 + 1j, 1 + 1j]], dtype=np.complex128),
    GateKind.CZ: np.diag([1, 1, 1, -1]).astype(np.complex128),
}
for _m in _MATRICES.values():
    _m.flags.writeable = False


def gate_matrix(kind: GateKind) -> np.ndarray:
    """Unitary of ``kind``: 2x2, or 4x4 for CZ with the first qubit as the high bit."""
    return _MATRICES[kind]


@dataclass(frozen=True, order=True)
class Gate:
    cycle: int
    kind: GateKind = field(compare=False)
    qubits: tuple[int, ...] = field(compare=False)

    def __post_init__(self):
        qubits = tuple(int(q) for q in self.qubits)
        if len(qubits) != self.kind.arity:
            raise ValueError(f"{self.kind.name} takes {self.kind.arity} qubit(s), got {qubits}")
        if len(set(qubits)) != len(qubits):
            raise ValueError(f"repeated qubit in {qubits}")
        if self.cycle < 0 or min(qubits) < 0:
            raise ValueError("cycle and qubit ids must be non-negative")
        if self.kind is GateKind.CZ:
            qubits = tuple(sorted(qubits))
        object.__setattr__(self, "qubits", qubits)


@dataclass(frozen=True)
class GridSpec:
    rows: int
    cols: int

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid dimensions must be positive")

    @property
    def n_qubits(self) -> int:
        return self.rows * self.cols

    def qubit(self, row: int, col: int) -> int:
        return row * self.cols + col


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    depth_t: int
    gates: tuple[Gate, ...]
    grid: tuple[int, int] | None = None

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("circuit needs at least one qubit")
        gates = tuple(self.gates)
        seen = set()
        for g in gates:
            for q in g.qubits:
                if q >= self.n_qubits:
                    raise ValueError(f"qubit {q} out of range for {self.n_qubits} qubits")
                if (g.cycle, q) in seen:
                    raise ValueError(f"qubit {q} has two gates in cycle {g.cycle}")
                seen.add((g.cycle, q))
        # stable sort keeps file order within a cycle
        object.__setattr__(self, "gates", tuple(sorted(gates, key=lambda g: g.cycle)))

    @property
    def n_cycles(self) -> int:
        return max((g.cycle for g in self.gates), default=-1) + 1

    def layers(self) -> list[list[Gate]]:
        out: list[list[Gate]] = [[] for _ in range(self.n_cycles)]
        for g in self.gates:
            out[g.cycle].append(g)
        return out


def cz_layer_edges(grid: GridSpec, layer: int) -> list[tuple[int, int]]:
    """Qubit pairs of CZ configuration ``layer`` (taken mod 8) on ``grid``."""
    p = CZ_LAYER_ORDER[layer % 8]
    vertical = p % 2
    shift = p >> 1
    edges = []
    for r in range(grid.rows):
        for c in range(grid.cols):
            r2, c2 = r + vertical, c + 1 - vertical
            if r2 >= grid.rows or c2 >= grid.cols:
                continue
            if (r * (2 - vertical) + c * (1 + vertical)) % 4 != shift:
                continue
            edges.append((grid.qubit(r, c), grid.qubit(r2, c2)))
    return edges


def generate_random_circuit(grid: GridSpec, t: int, seed: int) -> Circuit:
    if t < 0:
        raise ValueError("t must be non-negative")
    layers = [cz_layer_edges(grid, c) for c in range(t)]
    c = circuit_from_cz_layers(grid.n_qubits, layers, seed)
    return Circuit(c.n_qubits, c.depth_t, c.gates, (grid.rows, grid.cols))


def circuit_from_cz_layers(n_qubits: int, layers: Sequence[Sequence[tuple[int, int]]], seed: int) -> Circuit:
    """Wrap the given CZ layers in H boundaries and fill in single-qubit gates.

    Works for any coupling layout, e.g. chip adjacencies that are not grids.
    """
    n = n_qubits
    bits = np.random.PCG64(seed & 0xFFFF_FFFF_FFFF_FFFF)
    gates = [Gate(0, GateKind.H, (q,)) for q in range(n)]
    # what each qubit did in the previous cycle: "cz", "sq" (H/sqrt-X/sqrt-Y), "t" or None
    prev: list[str | None] = ["sq"] * n
    for cycle, edges in enumerate(layers, start=1):
        cur: list[str | None] = [None] * n
        for a, b in edges:
            gates.append(Gate(cycle, GateKind.CZ, (a, b)))
            cur[a] = cur[b] = "cz"
        for q in range(n):
            if cur[q] is not None:
                continue
            if prev[q] == "cz":
                top = int(bits.random_raw()) >> 63
                gates.append(Gate(cycle, GateKind.SqrtY if top else GateKind.SqrtX, (q,)))
                cur[q] = "sq"
            elif prev[q] == "sq":
                gates.append(Gate(cycle, GateKind.T, (q,)))
                cur[q] = "t"
        prev = cur
    t = len(layers)
    gates.extend(Gate(t + 1, GateKind.H, (q,)) for q in range(n))
    return Circuit(n, t, tuple(gates))


def parse_grcs(text: str) -> Circuit:
    n = None
    gates = []
    seen: dict[tuple[int, int], int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if n is None:
            if len(parts) != 1 or not parts[0].isdigit() or int(parts[0]) < 1:
                raise ParseError(f"expected qubit count, got {line!r}", lineno)
            n = int(parts[0])
            continue
        if len(parts) < 3:
            raise ParseError(f"too few fields in {line!r}", lineno)
        try:
            kind = GateKind(parts[1])
        except ValueError:
            raise ParseError(f"unknown gate {parts[1]!r}", lineno) from None
        try:
            cycle = int(parts[0])
            qubits = tuple(int(p) for p in parts[2:])
        except ValueError:
            raise ParseError(f"non-integer field in {line!r}", lineno) from None
        if len(qubits) != kind.arity:
            raise ParseError(f"{parts[1]} takes {kind.arity} qubit(s)", lineno)
        for q in qubits:
            if not 0 <= q < n:
                raise ParseError(f"qubit {q} outside declared count {n}", lineno)
            if (cycle, q) in seen:
                raise ParseError(
                    f"qubit {q} already has a gate in cycle {cycle} (line {seen[cycle, q]})", lineno
                )
            seen[cycle, q] = lineno
        try:
            gates.append(Gate(cycle, kind, qubits))
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
    if n is None:
        raise ParseError("empty circuit text")
    cycles = {g.cycle for g in gates}
    depth_t = max(max(cycles) - 1, 0) if cycles else 0
    return Circuit(n, depth_t, tuple(gates))


def render_grcs(circuit: Circuit) -> str:
    lines = [str(circuit.n_qubits)]
    lines.extend(f"{g.cycle} {g.kind.value} " + " ".join(map(str, g.qubits)) for g in circuit.gates)
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Violation:
    cycle: int
    qubit: int
    rule: str
    detail: str = ""


def validate_prescription(circuit: Circuit) -> list[Violation]:
    """Check single-qubit placements of cycles 1..t against the placement rules.

    Rule ``"3a"``: after a CZ, a CZ-free qubit gets √X or √Y.  Rule ``"3b"``:
    after H/√X/√Y, a CZ-free qubit gets T.  Otherwise the qubit stays idle.
    Boundary layers are reported under rule ``"boundary"``.
    """
    layers = circuit.layers()
    n = circuit.n_qubits
    out: list[Violation] = []
    if len(layers) < 2:
        return [Violation(0, q, "boundary", "missing H layers") for q in range(n)]

    for idx in (0, len(layers) - 1):
        kinds = {g.qubits[0]: g.kind for g in layers[idx] if g.kind.arity == 1}
        extra = [g for g in layers[idx] if g.kind.arity == 2]
        for q in range(n):
            if kinds.get(q) is not GateKind.H:
                out.append(Violation(idx, q, "boundary", "expected H"))
        for g in extra:
            out.append(Violation(idx, g.qubits[0], "boundary", "CZ in boundary layer"))

    def summarize(layer):
        state: list[GateKind | None] = [None] * n
        for g in layer:
            for q in g.qubits:
                state[q] = g.kind
        return state

    prev = summarize(layers[0])
    for cycle in range(1, len(layers) - 1):
        cur = summarize(layers[cycle])
        for q in range(n):
            got = cur[q]
            if got is GateKind.CZ:
                continue
            if prev[q] is GateKind.CZ:
                if got not in (GateKind.SqrtX, GateKind.SqrtY):
                    out.append(Violation(cycle, q, "3a", f"expected sqrt-X/Y, got {_name(got)}"))
            elif prev[q] in (GateKind.H, GateKind.SqrtX, GateKind.SqrtY):
                if got is not GateKind.T:
                    out.append(Violation(cycle, q, "3b", f"expected T, got {_name(got)}"))
            elif got is not None:
                out.append(Violation(cycle, q, "idle", f"expected no gate, got {_name(got)}"))
        prev = cur
    return out


def _name(kind: GateKind | None) -> str:
    return "nothing" if kind is None else kind.name
