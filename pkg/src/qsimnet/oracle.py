"""Brute-force state-vector simulation, the reference for every amplitude check.

Basis convention: qubit 0 is the most significant bit, so basis index
``sum(b_q << (n - 1 - q))`` holds the amplitude of bitstring ``b_0 b_1 ...``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuit import Circuit, gate_matrix
from .tensor_network import Bitstring

__all__ = ["DEFAULT_MAX_QUBITS", "CapacityError", "StateVector", "apply_gate", "oracle_amplitude", "simulate"]

DEFAULT_MAX_QUBITS = 24


class CapacityError(ValueError):
    pass


@dataclass(frozen=True)
class StateVector:
    n: int
    amplitudes: np.ndarray

    def amplitude(self, output: Bitstring) -> complex:
        return complex(self.amplitudes[output.to_int()])

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def apply_gate(state: np.ndarray, matrix: np.ndarray, qubits: tuple[int, ...], n: int) -> np.ndarray:
    """Apply a k-qubit ``matrix`` (first listed qubit = high bit) in place on a flat vector."""
    k = len(qubits)
    psi = state.reshape((2,) * n)
    u = matrix.reshape((2,) * (2 * k))
    moved = np.tensordot(u, psi, axes=(list(range(k, 2 * k)), list(qubits)))
    psi[...] = np.moveaxis(moved, list(range(k)), list(qubits))
    return state


def simulate(circuit: Circuit, max_qubits: int = DEFAULT_MAX_QUBITS) -> StateVector:
    n = circuit.n_qubits
    if n > max_qubits:
        raise CapacityError(f"{n} qubits exceeds the oracle cap of {max_qubits}")
    state = np.zeros(1 << n, dtype=np.complex128)
    state[0] = 1
    for g in circuit.gates:
        apply_gate(state, gate_matrix(g.kind), g.qubits, n)
    return StateVector(n, state)


def oracle_amplitude(circuit: Circuit, output: Bitstring, max_qubits: int = DEFAULT_MAX_QUBITS) -> complex:
    if output.n != circuit.n_qubits:
        raise ValueError(f"bitstring has {output.n} bits for {circuit.n_qubits} qubits")
    return simulate(circuit, max_qubits).amplitude(output)
