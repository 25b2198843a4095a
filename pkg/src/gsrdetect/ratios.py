"""The graph-spanning-ratio statistics.

Two dimensionless ratios compare a window's whole-graph span against the
spans of its halves: the mean ratio ``dG / (dG1 + dG2)`` grows under a
location change, and the variance ratio ``dG1/dG2 + dG2/dG1`` grows when the
two halves spread differently.
"""

from __future__ import annotations

import numpy as np

from . import _kernels, graph
from .core import DegenerateWindowError, GraphKind, ObservationError, SplitStatistics, as_block


def mean_ratio(dg: float, dg1: float, dg2: float) -> float:
    """Whole-window span over the summed half spans."""
    if dg1 + dg2 <= 0.0:
        raise DegenerateWindowError("both halves span zero distance")
    return dg / (dg1 + dg2)


def variance_ratio(dg1: float, dg2: float) -> float:
    """Symmetric ratio of the half spans, ``z + 1/z`` with ``z = dG1/dG2``.

    Evaluated as ``2 + (dG1 - dG2)^2 / (dG1 * dG2)``, which is algebraically
    identical and never dips below the true lower bound of 2 in floating
    point.
    """
    if dg1 <= 0.0 or dg2 <= 0.0:
        raise DegenerateWindowError("a half spans zero distance")
    diff = dg1 - dg2
    return 2.0 + diff * diff / (dg1 * dg2)


def scan_ratios(block, kind: GraphKind) -> SplitStatistics:
    """Both ratio statistics of a block split at its midpoint.

    The block length must be even and at least 4.  Raises
    DegenerateWindowError when either half spans zero distance (for example a
    constant block), in which case the variance ratio is undefined.
    """
    x = as_block(block)
    n = x.shape[0]
    if n < 4 or n % 2:
        raise ObservationError(f"window length must be even and >= 4, got {n}")
    h = n // 2
    kind = GraphKind(kind)
    if kind is GraphKind.COMPLETE:
        xc = x - x.mean(axis=0)
        first, second = xc[:h], xc[h:]
        q1 = float(np.einsum("ij,ij->", first, first))
        q2 = float(np.einsum("ij,ij->", second, second))
        s1 = first.sum(axis=0)
        s2 = second.sum(axis=0)
        dg1 = max(h * q1 - float(s1 @ s1), 0.0)
        dg2 = max(h * q2 - float(s2 @ s2), 0.0)
        if dg1 <= _kernels.ZERO_SPAN_RTOL * h * q1 or dg2 <= _kernels.ZERO_SPAN_RTOL * h * q2:
            raise DegenerateWindowError("a window half spans zero distance")
        cross = max(h * (q1 + q2) - 2.0 * float(s1 @ s2), 0.0)
        tmu = 1.0 + cross / (dg1 + dg2)
    else:
        dg, dg1, dg2 = graph.build_window_graphs(x, h, kind)
        if dg1 <= 0.0 or dg2 <= 0.0:
            raise DegenerateWindowError("a window half spans zero distance")
        tmu = dg / (dg1 + dg2)
    return SplitStatistics(
        mean_ratio=tmu,
        variance_ratio=variance_ratio(dg1, dg2),
        split_index=h,
    )
