"""Shared builders for randomized tests.

All randomness flows through explicitly seeded generators so every
property loop is reproducible from the test source alone.
"""

import numpy as np

from cvshape import (
    ClusterGraph,
    GaussianState,
    apply,
    displacement,
    phase_shift,
    squeeze_gate,
    squeezed_vacuum,
    tensor,
    vacuum,
)


def random_signed_graph(rng: np.random.Generator, n_min: int = 2, n_max: int = 8):
    """Connected graph with random +/-1 edge signs and per-node squeezing.

    Returns:
        (graph, db_map) with db levels drawn uniformly from [0, 15].
    """
    n = int(rng.integers(n_min, n_max + 1))
    nodes = list(range(1, n + 1))
    edges = []
    for k in range(2, n + 1):
        anchor = int(rng.integers(1, k))
        edges.append((anchor, k, int(rng.choice((-1, 1)))))
    extra = int(rng.integers(0, n))
    for _ in range(extra):
        i, j = sorted(rng.choice(nodes, size=2, replace=False).tolist())
        if i != j and not any({a, b} == {i, j} for a, b, _ in edges):
            edges.append((i, j, int(rng.choice((-1, 1)))))
    graph = ClusterGraph.from_edges(edges, nodes=nodes)
    db_map = {node: float(rng.uniform(0.0, 15.0)) for node in nodes}
    return graph, db_map


def random_single_mode(rng: np.random.Generator) -> GaussianState:
    """Squeezed, rotated, displaced single-mode state."""
    st = squeezed_vacuum(float(rng.uniform(0.0, 10.0)), "p")
    st = apply(st, phase_shift(1, 0, float(rng.uniform(0.0, np.pi))))
    st = apply(st, displacement(1, 0, "x", float(rng.uniform(-2.0, 2.0))))
    st = apply(st, displacement(1, 0, "p", float(rng.uniform(-2.0, 2.0))))
    return st


def random_product_state(rng: np.random.Generator, n: int) -> GaussianState:
    return tensor(*(random_single_mode(rng) for _ in range(n)))


def random_symplectic_state(rng: np.random.Generator, n: int) -> GaussianState:
    """Pure n-mode state from alternating squeezers and random passives."""
    st = vacuum(n)
    for mode in range(n):
        st = apply(st, squeeze_gate(n, mode, float(rng.uniform(0.0, 8.0))))
        st = apply(st, phase_shift(n, mode, float(rng.uniform(0.0, 2 * np.pi))))
    return st
