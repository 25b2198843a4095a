"""Similarity graphs over observation blocks and their spanning distances.

A block of m observations is represented as a weighted undirected graph with
squared Euclidean edge weights; the spanning distance is the sum of the
graph's edge weights.  Two graph kinds are supported: the complete graph and
the minimum spanning tree.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from . import _kernels
from .core import GraphKind, ObservationError, as_block, as_observation


@dataclasses.dataclass(frozen=True)
class WindowGraph:
    """A materialized graph over a block, mostly useful for inspection.

    ``edges`` holds (i, j, weight) triples with i < j; ``spanning_distance``
    equals the sum of the stored weights.
    """

    kind: GraphKind
    node_count: int
    edges: tuple[tuple[int, int, float], ...]
    spanning_distance: float


def squared_distance(a, b) -> float:
    """Squared Euclidean distance between two observations."""
    av = as_observation(a)
    bv = as_observation(b)
    if av.size != bv.size:
        raise ObservationError(f"dimension mismatch: {av.size} vs {bv.size}")
    diff = av - bv
    return float(diff @ diff)


def complete_spanning_distance(block) -> float:
    """Sum of squared distances over all pairs, via the O(m*d) identity.

    For m points the pairwise sum equals ``m * sum_i ||y_i - mean||^2 -
    ||sum_i (y_i - mean)||^2``; centering first keeps the subtraction benign
    even when the coordinates carry a large common offset.
    """
    x = as_block(block)
    m = x.shape[0]
    if m < 2:
        raise ObservationError(f"block must contain at least 2 observations, got {m}")
    xc = x - x.mean(axis=0)
    q = float(np.einsum("ij,ij->", xc, xc))
    s = xc.sum(axis=0)
    return max(m * q - float(s @ s), 0.0)


def complete_spanning_distance_naive(block) -> float:
    """Pairwise-sum reference path, retained for verification."""
    x = as_block(block)
    if x.shape[0] < 2:
        raise ObservationError(f"block must contain at least 2 observations, got {x.shape[0]}")
    dists = _kernels.pairwise_sq_dists(x)
    return float(dists.sum()) / 2.0


def _mst_edges(D: np.ndarray) -> list[tuple[int, int, float]]:
    """Prim over a dense distance matrix, returning the chosen edges.

    Ties prefer the lexicographically smaller (i, j): vertices are scanned in
    index order and keys are only replaced on strict improvement.
    """
    m = D.shape[0]
    key = D[0].astype(np.float64, copy=True)
    key[0] = np.inf
    parent = np.zeros(m, dtype=np.int64)
    used = np.zeros(m, dtype=bool)
    used[0] = True
    edges = []
    for _ in range(m - 1):
        masked = np.where(used, np.inf, key)
        v = int(np.argmin(masked))
        used[v] = True
        i, j = int(parent[v]), v
        if i > j:
            i, j = j, i
        edges.append((i, j, float(D[parent[v], v])))
        better = D[v] < key
        parent[better] = v
        np.minimum(key, D[v], out=key)
    edges.sort(key=lambda e: (e[0], e[1]))
    return edges


def mst_spanning_distance(block) -> tuple[float, list[tuple[int, int, float]]]:
    """Minimum spanning tree weight of a block plus one attaining edge set.

    The weight is unique even when the tree itself is not; the returned edge
    set is deterministic under the lexicographic tie rule.
    """
    x = as_block(block)
    m = x.shape[0]
    if m < 2:
        raise ObservationError(f"block must contain at least 2 observations, got {m}")
    D = _kernels.pairwise_sq_dists(x)
    edges = _mst_edges(D)
    return sum(w for _, _, w in edges), edges


def build_graph(block, kind: GraphKind) -> WindowGraph:
    """Materialize the full edge list of a block's graph."""
    x = as_block(block)
    m = x.shape[0]
    if m < 2:
        raise ObservationError(f"block must contain at least 2 observations, got {m}")
    kind = GraphKind(kind)
    if kind is GraphKind.COMPLETE:
        D = _kernels.pairwise_sq_dists(x)
        edges = tuple(
            (i, j, float(D[i, j])) for i in range(m) for j in range(i + 1, m)
        )
    else:
        _, edge_list = mst_spanning_distance(x)
        edges = tuple(edge_list)
    total = float(sum(w for _, _, w in edges))
    return WindowGraph(kind=kind, node_count=m, edges=edges, spanning_distance=total)


def _complete_split_stats(x: np.ndarray, split: int) -> tuple[float, float, float]:
    """(dG, dG1, dG2) for a complete graph, with dG >= dG1 + dG2 guaranteed.

    dG is assembled as dG1 + dG2 + cross, where the cross term
    ``m2*q1 + m1*q2 - 2*S1.S2`` is clamped at zero, so the monotonicity holds
    exactly in floating point as well as in algebra.
    """
    xc = x - x.mean(axis=0)
    first, second = xc[:split], xc[split:]
    m1, m2 = first.shape[0], second.shape[0]
    q1 = float(np.einsum("ij,ij->", first, first))
    q2 = float(np.einsum("ij,ij->", second, second))
    s1 = first.sum(axis=0)
    s2 = second.sum(axis=0)
    dg1 = max(m1 * q1 - float(s1 @ s1), 0.0)
    dg2 = max(m2 * q2 - float(s2 @ s2), 0.0)
    cross = max(m2 * q1 + m1 * q2 - 2.0 * float(s1 @ s2), 0.0)
    return dg1 + dg2 + cross, dg1, dg2


def build_window_graphs(block, split: int, kind: GraphKind) -> tuple[float, float, float]:
    """Spanning distances (dG, dG1, dG2) of the whole block and its two sides.

    ``split`` is the number of observations in the first side; both sides
    must hold at least 2 points.
    """
    x = as_block(block)
    m = x.shape[0]
    if not 0 < split < m:
        raise ObservationError(f"split {split} outside block of length {m}")
    if split < 2 or m - split < 2:
        raise ObservationError(
            f"each side needs at least 2 observations, got {split} and {m - split}"
        )
    kind = GraphKind(kind)
    if kind is GraphKind.COMPLETE:
        return _complete_split_stats(x, split)
    D = _kernels.pairwise_sq_dists(x)
    dg = _kernels.prim_span(D)
    dg1 = _kernels.prim_span(D[:split, :split])
    dg2 = _kernels.prim_span(D[split:, split:])
    return float(dg), float(dg1), float(dg2)
