"""Sliced tensor-network simulation of random quantum circuit amplitudes."""

from .circuit import Circuit, Gate, GateKind, GridSpec, generate_random_circuit, parse_grcs, render_grcs
from .engine import AmplitudeResult, NetworkTemplate, amplitude, batch_amplitudes, evaluate_subtask
from .oracle import oracle_amplitude, simulate
from .planner import ContractionPlan, CostReport, SlicePlan, estimate_cost, find_order, select_slices
from .tensor_network import Bitstring, Tensor, TensorNetwork, build_network, simplify

__version__ = "0.1.0"

__all__ = [
    "AmplitudeResult",
    "Bitstring",
    "Circuit",
    "ContractionPlan",
    "CostReport",
    "Gate",
    "GateKind",
    "GridSpec",
    "NetworkTemplate",
    "SlicePlan",
    "Tensor",
    "TensorNetwork",
    "amplitude",
    "batch_amplitudes",
    "build_network",
    "estimate_cost",
    "evaluate_subtask",
    "find_order",
    "generate_random_circuit",
    "oracle_amplitude",
    "parse_grcs",
    "render_grcs",
    "select_slices",
    "simplify",
    "simulate",
]
