import itertools

import numpy as np
import pytest

from gsrdetect import seeded_rng


@pytest.fixture
def rng():
    return seeded_rng(2024, 0)


def brute_force_mst_weight(block: np.ndarray) -> float:
    """Independent MST oracle: enumerate all spanning trees.

    Checks every (m-1)-subset of edges for acyclicity/connectivity via
    union-find; only feasible for small m.
    """
    block = np.asarray(block, dtype=np.float64)
    if block.ndim == 1:
        block = block[:, None]
    m = block.shape[0]
    edges = []
    for i, j in itertools.combinations(range(m), 2):
        diff = block[i] - block[j]
        edges.append((i, j, float(diff @ diff)))
    best = np.inf
    for subset in itertools.combinations(edges, m - 1):
        parent = list(range(m))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        ok = True
        for i, j, _ in subset:
            ri, rj = find(i), find(j)
            if ri == rj:
                ok = False
                break
            parent[ri] = rj
        if ok:
            best = min(best, sum(w for _, _, w in subset))
    return best


def pairwise_sum_oracle(block: np.ndarray) -> float:
    """Independent complete-graph oracle: literal double loop over pairs."""
    block = np.asarray(block, dtype=np.float64)
    if block.ndim == 1:
        block = block[:, None]
    total = 0.0
    m = block.shape[0]
    for i in range(m):
        for j in range(i + 1, m):
            diff = block[i] - block[j]
            total += float(diff @ diff)
    return total
