"""Hot numeric kernels: numba-compiled loops with a pure-numpy fallback.

The numba path is used whenever numba imports cleanly; set
``GSRDETECT_DISABLE_NUMBA=1`` to force the numpy implementations (useful for
debugging and for the benchmark in ``benchmarks/bench_kernels.py``).  Both
paths are exported with ``_nb`` / ``_np`` suffixes so they can be compared
directly; the unsuffixed names dispatch to the active one.

All kernels expect float64 C-contiguous data.  Callers should center the
observation matrix (subtract the column means) before calling: spanning
distances are translation invariant and centering keeps the sum-of-squares
identities far from catastrophic cancellation.

Degeneracy convention: a window position contributes statistics only when
both half spans are positive (within a relative floor for the complete-graph
identity, exactly zero for MST weights).  A permutation with no contributing
position is flagged degenerate and reported as NaN.
"""

from __future__ import annotations

import os

import numpy as np

ENV_FLAG = "GSRDETECT_DISABLE_NUMBA"

# Relative floor below which a complete-graph half span counts as zero.
ZERO_SPAN_RTOL = 1e-12


def _flag_disabled() -> bool:
    return os.environ.get(ENV_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}


try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        raise RuntimeError("numba is not available")


NUMBA_ENABLED = HAVE_NUMBA and not _flag_disabled()


# ---------------------------------------------------------------------------
# complete-graph spanning sums (loop implementations, compiled under numba)
# ---------------------------------------------------------------------------

def _complete_null_static_impl(x, n, perms):
    """Per permutation: statistics of the first n entries, midpoint split."""
    k = perms.shape[0]
    d = x.shape[1]
    h = n // 2
    mu = np.empty(k)
    sig = np.empty(k)
    deg = np.zeros(k, np.bool_)
    s1 = np.empty(d)
    s2 = np.empty(d)
    for b in range(k):
        q1 = 0.0
        q2 = 0.0
        for j in range(d):
            s1[j] = 0.0
            s2[j] = 0.0
        for i in range(h):
            row = perms[b, i]
            for j in range(d):
                v = x[row, j]
                s1[j] += v
                q1 += v * v
        for i in range(h, n):
            row = perms[b, i]
            for j in range(d):
                v = x[row, j]
                s2[j] += v
                q2 += v * v
        n1 = 0.0
        n2 = 0.0
        dot = 0.0
        for j in range(d):
            n1 += s1[j] * s1[j]
            n2 += s2[j] * s2[j]
            dot += s1[j] * s2[j]
        dg1 = h * q1 - n1
        dg2 = h * q2 - n2
        if dg1 < 0.0:
            dg1 = 0.0
        if dg2 < 0.0:
            dg2 = 0.0
        if dg1 <= ZERO_SPAN_RTOL * h * q1 or dg2 <= ZERO_SPAN_RTOL * h * q2:
            deg[b] = True
            mu[b] = np.nan
            sig[b] = np.nan
            continue
        cross = h * (q1 + q2) - 2.0 * dot
        if cross < 0.0:
            cross = 0.0
        mu[b] = 1.0 + cross / (dg1 + dg2)
        diff = dg1 - dg2
        sig[b] = 2.0 + diff * diff / (dg1 * dg2)
    return mu, sig, deg


def _complete_null_online_impl(x, n, perms):
    """Per permutation: max statistics over every window start, midpoint split."""
    k = perms.shape[0]
    N = x.shape[0]
    d = x.shape[1]
    h = n // 2
    mu = np.empty(k)
    sig = np.empty(k)
    deg = np.zeros(k, np.bool_)
    cv = np.empty((N + 1, d))
    cq = np.empty(N + 1)
    for b in range(k):
        for j in range(d):
            cv[0, j] = 0.0
        cq[0] = 0.0
        for i in range(N):
            row = perms[b, i]
            q = 0.0
            for j in range(d):
                v = x[row, j]
                cv[i + 1, j] = cv[i, j] + v
                q += v * v
            cq[i + 1] = cq[i] + q
        best_mu = -np.inf
        best_sig = -np.inf
        found = False
        for s in range(N - n + 1):
            m = s + h
            e = s + n
            q1 = cq[m] - cq[s]
            q2 = cq[e] - cq[m]
            n1 = 0.0
            n2 = 0.0
            dot = 0.0
            for j in range(d):
                a = cv[m, j] - cv[s, j]
                c = cv[e, j] - cv[m, j]
                n1 += a * a
                n2 += c * c
                dot += a * c
            dg1 = h * q1 - n1
            dg2 = h * q2 - n2
            if dg1 < 0.0:
                dg1 = 0.0
            if dg2 < 0.0:
                dg2 = 0.0
            if dg1 <= ZERO_SPAN_RTOL * h * q1 or dg2 <= ZERO_SPAN_RTOL * h * q2:
                continue
            cross = h * (q1 + q2) - 2.0 * dot
            if cross < 0.0:
                cross = 0.0
            tmu = 1.0 + cross / (dg1 + dg2)
            diff = dg1 - dg2
            tsig = 2.0 + diff * diff / (dg1 * dg2)
            if tmu > best_mu:
                best_mu = tmu
            if tsig > best_sig:
                best_sig = tsig
            found = True
        if found:
            mu[b] = best_mu
            sig[b] = best_sig
        else:
            deg[b] = True
            mu[b] = np.nan
            sig[b] = np.nan
    return mu, sig, deg


# ---------------------------------------------------------------------------
# Prim MST over a master distance matrix (loop implementations)
# ---------------------------------------------------------------------------

def _prim_span_impl(D, idx, lo, hi):
    """Total MST weight of nodes ``idx[lo:hi]`` under distances ``D``.

    Dense O(m^2) scan; ties pick the smallest in-window index so the edge set
    is deterministic (the total weight is tie-free regardless).
    """
    m = hi - lo
    if m < 2:
        return 0.0
    key = np.full(m, np.inf)
    used = np.zeros(m, np.bool_)
    key[0] = 0.0
    total = 0.0
    for _ in range(m):
        best = -1
        bk = np.inf
        for v in range(m):
            if not used[v] and key[v] < bk:
                bk = key[v]
                best = v
        used[best] = True
        total += key[best]
        g = idx[lo + best]
        for v in range(m):
            if not used[v]:
                w = D[g, idx[lo + v]]
                if w < key[v]:
                    key[v] = w
    return total


def _mst_null_static_impl(D, n, perms):
    k = perms.shape[0]
    h = n // 2
    mu = np.empty(k)
    sig = np.empty(k)
    deg = np.zeros(k, np.bool_)
    for b in range(k):
        idx = perms[b]
        dg = _prim_span(D, idx, 0, n)
        dg1 = _prim_span(D, idx, 0, h)
        dg2 = _prim_span(D, idx, h, n)
        if dg1 <= 0.0 or dg2 <= 0.0:
            deg[b] = True
            mu[b] = np.nan
            sig[b] = np.nan
            continue
        mu[b] = dg / (dg1 + dg2)
        diff = dg1 - dg2
        sig[b] = 2.0 + diff * diff / (dg1 * dg2)
    return mu, sig, deg


def _mst_null_online_impl(D, n, perms):
    k = perms.shape[0]
    N = perms.shape[1]
    h = n // 2
    mu = np.empty(k)
    sig = np.empty(k)
    deg = np.zeros(k, np.bool_)
    for b in range(k):
        idx = perms[b]
        best_mu = -np.inf
        best_sig = -np.inf
        found = False
        for s in range(N - n + 1):
            dg1 = _prim_span(D, idx, s, s + h)
            dg2 = _prim_span(D, idx, s + h, s + n)
            if dg1 <= 0.0 or dg2 <= 0.0:
                continue
            dg = _prim_span(D, idx, s, s + n)
            tmu = dg / (dg1 + dg2)
            diff = dg1 - dg2
            tsig = 2.0 + diff * diff / (dg1 * dg2)
            if tmu > best_mu:
                best_mu = tmu
            if tsig > best_sig:
                best_sig = tsig
            found = True
        if found:
            mu[b] = best_mu
            sig[b] = best_sig
        else:
            deg[b] = True
            mu[b] = np.nan
            sig[b] = np.nan
    return mu, sig, deg


def _straddle_count_impl(D, idx, n, h):
    """MST straddle count: edges of the MST on idx[:n] crossing position h."""
    key = np.full(n, np.inf)
    parent = np.full(n, -1, np.int64)
    used = np.zeros(n, np.bool_)
    key[0] = 0.0
    count = 0
    for _ in range(n):
        best = -1
        bk = np.inf
        for v in range(n):
            if not used[v] and key[v] < bk:
                bk = key[v]
                best = v
        used[best] = True
        if parent[best] >= 0 and (parent[best] < h) != (best < h):
            count += 1
        g = idx[best]
        for v in range(n):
            if not used[v]:
                w = D[g, idx[v]]
                if w < key[v]:
                    key[v] = w
                    parent[v] = best
    return count


def _ibgec_null_static_impl(D, n, perms):
    k = perms.shape[0]
    h = n // 2
    counts = np.empty(k)
    for b in range(k):
        counts[b] = _straddle_count(D, perms[b], n, h)
    return counts


if NUMBA_ENABLED or HAVE_NUMBA:
    _prim_span = njit(cache=True)(_prim_span_impl)
    _straddle_count = njit(cache=True)(_straddle_count_impl)
    complete_null_static_nb = njit(cache=True)(_complete_null_static_impl)
    complete_null_online_nb = njit(cache=True)(_complete_null_online_impl)
    mst_null_static_nb = njit(cache=True)(_mst_null_static_impl)
    mst_null_online_nb = njit(cache=True)(_mst_null_online_impl)
    ibgec_null_static_nb = njit(cache=True)(_ibgec_null_static_impl)

    @njit(cache=True)
    def prim_span_nb(D):
        m = D.shape[0]
        idx = np.arange(m)
        return _prim_span(D, idx, 0, m)

else:  # pragma: no cover - exercised only when numba is absent
    _prim_span = _prim_span_impl
    _straddle_count = _straddle_count_impl


# ---------------------------------------------------------------------------
# pure-numpy fallbacks
# ---------------------------------------------------------------------------

def _complete_halves(first, second):
    """Vectorized spanning sums for (k, h, d) half blocks."""
    h = first.shape[1]
    s1 = first.sum(axis=1)
    s2 = second.sum(axis=1)
    q1 = np.einsum("bij,bij->b", first, first)
    q2 = np.einsum("bij,bij->b", second, second)
    dg1 = np.maximum(h * q1 - np.einsum("bj,bj->b", s1, s1), 0.0)
    dg2 = np.maximum(h * q2 - np.einsum("bj,bj->b", s2, s2), 0.0)
    cross = np.maximum(h * (q1 + q2) - 2.0 * np.einsum("bj,bj->b", s1, s2), 0.0)
    bad = (dg1 <= ZERO_SPAN_RTOL * h * q1) | (dg2 <= ZERO_SPAN_RTOL * h * q2)
    return dg1, dg2, cross, bad


def complete_null_static_np(x, n, perms):
    h = n // 2
    xp = x[perms[:, :n]]
    dg1, dg2, cross, bad = _complete_halves(xp[:, :h], xp[:, h:])
    with np.errstate(divide="ignore", invalid="ignore"):
        mu = 1.0 + cross / (dg1 + dg2)
        sig = 2.0 + (dg1 - dg2) ** 2 / (dg1 * dg2)
    mu[bad] = np.nan
    sig[bad] = np.nan
    return mu, sig, bad


def complete_null_online_np(x, n, perms):
    k, N = perms.shape
    h = n // 2
    z = N - n + 1
    mu = np.full(k, np.nan)
    sig = np.full(k, np.nan)
    deg = np.zeros(k, np.bool_)
    for b in range(k):
        xp = x[perms[b]]
        cv = np.vstack([np.zeros((1, x.shape[1])), np.cumsum(xp, axis=0)])
        cq = np.concatenate([[0.0], np.cumsum(np.einsum("ij,ij->i", xp, xp))])
        a = cv[h : h + z] - cv[:z]
        c = cv[n : n + z] - cv[h : h + z]
        q1 = cq[h : h + z] - cq[:z]
        q2 = cq[n : n + z] - cq[h : h + z]
        dg1 = np.maximum(h * q1 - np.einsum("sj,sj->s", a, a), 0.0)
        dg2 = np.maximum(h * q2 - np.einsum("sj,sj->s", c, c), 0.0)
        cross = np.maximum(h * (q1 + q2) - 2.0 * np.einsum("sj,sj->s", a, c), 0.0)
        ok = (dg1 > ZERO_SPAN_RTOL * h * q1) & (dg2 > ZERO_SPAN_RTOL * h * q2)
        if not ok.any():
            deg[b] = True
            continue
        d1, d2, cr = dg1[ok], dg2[ok], cross[ok]
        mu[b] = (1.0 + cr / (d1 + d2)).max()
        sig[b] = (2.0 + (d1 - d2) ** 2 / (d1 * d2)).max()
    return mu, sig, deg


def prim_span_np(D):
    """Vectorized Prim over a dense distance matrix; returns total weight."""
    m = D.shape[0]
    if m < 2:
        return 0.0
    key = D[0].astype(np.float64, copy=True)
    key[0] = np.inf
    used = np.zeros(m, np.bool_)
    used[0] = True
    total = 0.0
    for _ in range(m - 1):
        masked = np.where(used, np.inf, key)
        v = int(np.argmin(masked))
        total += key[v]
        used[v] = True
        np.minimum(key, D[v], out=key)
    return total


def _mst_block_np(D, n, h):
    dg1 = prim_span_np(D[:h, :h])
    dg2 = prim_span_np(D[h:n, h:n])
    if dg1 <= 0.0 or dg2 <= 0.0:
        return np.nan, np.nan, True
    dg = prim_span_np(D[:n, :n])
    mu = dg / (dg1 + dg2)
    sig = 2.0 + (dg1 - dg2) ** 2 / (dg1 * dg2)
    return mu, sig, False


def mst_null_static_np(D, n, perms):
    k = perms.shape[0]
    h = n // 2
    mu = np.full(k, np.nan)
    sig = np.full(k, np.nan)
    deg = np.zeros(k, np.bool_)
    for b in range(k):
        idx = perms[b, :n]
        sub = D[np.ix_(idx, idx)]
        mu[b], sig[b], deg[b] = _mst_block_np(sub, n, h)
    return mu, sig, deg


def mst_null_online_np(D, n, perms):
    k, N = perms.shape
    h = n // 2
    mu = np.full(k, np.nan)
    sig = np.full(k, np.nan)
    deg = np.zeros(k, np.bool_)
    for b in range(k):
        sub = D[np.ix_(perms[b], perms[b])]
        best_mu = -np.inf
        best_sig = -np.inf
        found = False
        for s in range(N - n + 1):
            win = sub[s : s + n, s : s + n]
            m, g, bad = _mst_block_np(win, n, h)
            if bad:
                continue
            best_mu = max(best_mu, m)
            best_sig = max(best_sig, g)
            found = True
        if found:
            mu[b] = best_mu
            sig[b] = best_sig
        else:
            deg[b] = True
    return mu, sig, deg


def straddle_count_np(D, h):
    """Straddle count of the MST of a full (n, n) distance matrix."""
    n = D.shape[0]
    key = D[0].astype(np.float64, copy=True)
    key[0] = np.inf
    parent = np.zeros(n, np.int64)
    used = np.zeros(n, np.bool_)
    used[0] = True
    count = 0
    for _ in range(n - 1):
        masked = np.where(used, np.inf, key)
        v = int(np.argmin(masked))
        used[v] = True
        if (parent[v] < h) != (v < h):
            count += 1
        better = D[v] < key
        parent[better] = v
        np.minimum(key, D[v], out=key)
    return count


def ibgec_null_static_np(D, n, perms):
    k = perms.shape[0]
    h = n // 2
    counts = np.empty(k)
    for b in range(k):
        idx = perms[b, :n]
        counts[b] = straddle_count_np(D[np.ix_(idx, idx)], h)
    return counts


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

if NUMBA_ENABLED:
    complete_null_static = complete_null_static_nb
    complete_null_online = complete_null_online_nb
    mst_null_static = mst_null_static_nb
    mst_null_online = mst_null_online_nb
    ibgec_null_static = ibgec_null_static_nb

    def prim_span(D):
        return prim_span_nb(np.ascontiguousarray(D))

else:
    complete_null_static = complete_null_static_np
    complete_null_online = complete_null_online_np
    mst_null_static = mst_null_static_np
    mst_null_online = mst_null_online_np
    ibgec_null_static = ibgec_null_static_np
    prim_span = prim_span_np


def pairwise_sq_dists(x: np.ndarray) -> np.ndarray:
    """All pairwise squared Euclidean distances of an (m, d) block.

    Computed by direct differencing, which stays accurate under large common
    offsets (unlike the expanded Gram form).
    """
    diff = x[:, None, :] - x[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)
