import numpy as np
import pytest

from qsimnet.circuit import GridSpec, circuit_from_cz_layers, cz_layer_edges, generate_random_circuit
from qsimnet.tensor_network import Bitstring, Tensor, TensorNetwork


def random_outputs(n, count, seed):
    rng = np.random.default_rng(seed)
    return [Bitstring(tuple(rng.integers(0, 2, n))) for _ in range(count)]


def rel_err(got, ref):
    return abs(got - ref) / abs(ref)


def leaf_layout_circuit(t, seed=3):
    """3x3 grid plus qubit 9 coupled only to qubit 2, like a Bristlecone corner."""
    grid = GridSpec(3, 3)
    layers = []
    for c in range(t):
        edges = cz_layer_edges(grid, c)
        used = {q for e in edges for q in e}
        if 2 not in used and c % 4 == 1:
            edges = edges + [(2, 9)]
        layers.append(edges)
    return circuit_from_cz_layers(10, layers, seed)


def random_closed_network(n_nodes, n_edges, seed):
    """Connected closed network: a random spanning tree plus extra random edges."""
    rng = np.random.default_rng(seed)
    pairs = [(int(rng.integers(0, k)), k) for k in range(1, n_nodes)]
    while len(pairs) < n_edges:
        a, b = sorted(int(x) for x in rng.choice(n_nodes, 2, replace=False))
        pairs.append((a, b))
    legs = {k: [] for k in range(n_nodes)}
    for ix, (a, b) in enumerate(pairs):
        legs[a].append(ix)
        legs[b].append(ix)
    nodes = {}
    for k, inds in legs.items():
        shape = (2,) * len(inds)
        data = rng.normal(size=shape) + 1j * rng.normal(size=shape)
        nodes[k] = Tensor(tuple(inds), data)
    return TensorNetwork(nodes)


@pytest.fixture(scope="session")
def circuit_4x4_t10():
    return generate_random_circuit(GridSpec(4, 4), 10, 11)
