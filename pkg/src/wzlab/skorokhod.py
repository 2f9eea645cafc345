"""Skorokhod M1 and J1 distances on finitely represented cadlag paths.

Paths are turned into completed graphs (polylines with vertical segments at
jumps), sampled along arc length, and matched by monotone staircases.  The M1
metric used here is the sum form

    inf over parametric representations of (sup time gap + sup value gap),

so the dynamic program tracks, per lattice cell, the Pareto frontier of
(max time gap so far, max value gap so far) instead of a single scalar.  The
DP value is exact for the sampled polylines; certified lower/upper bounds
against the continuous-time infimum come from the sampling radius and the
chord deviation of subsampled graphs (both zero when every vertex is kept).

The J1 value is an upper-bound estimator: a min-max staircase DP on values
plus the log-slope penalty of the induced time warp; its certified lower
bound drops the log term and subtracts per-cell oscillations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cadlag import CadlagPath

_HORIZON_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class CompletedGraph:
    """Polyline vertices of a path's completed graph in traversal order."""

    times: np.ndarray
    values: np.ndarray


@dataclass(frozen=True, eq=False)
class SampledGraph:
    """Arc-length sampling of a completed graph.

    `radius` bounds how far (in |dt| + |dz|) any graph point can be from the
    nearest sample; `dev` is the chord deviation of the sampled polyline from
    the original graph (zero when all vertices are kept).
    """

    times: np.ndarray
    values: np.ndarray
    radius: float
    dev: float


@dataclass(frozen=True)
class MetricResult:
    value: float
    lower: float
    upper: float
    resolution: int


def completed_graph(path: CadlagPath) -> CompletedGraph:
    """Graph of the path with vertical segments filling each discontinuity;
    exactly collinear interior vertices are merged."""
    t = path.grid
    v = path.values
    w = path.left_values
    tt = np.repeat(t, 2)
    zz = np.empty(tt.size)
    zz[0::2] = w
    zz[1::2] = v
    keep = np.concatenate(([True], (np.diff(tt) != 0.0) | (np.diff(zz) != 0.0)))
    tt, zz = tt[keep], zz[keep]
    if tt.size > 2:
        cross = (tt[1:-1] - tt[:-2]) * (zz[2:] - zz[:-2]) - (tt[2:] - tt[:-2]) * (zz[1:-1] - zz[:-2])
        keep2 = np.concatenate(([True], cross != 0.0, [True]))
        tt, zz = tt[keep2], zz[keep2]
    if tt.size == 1:
        tt = np.array([t[0], t[-1]])
        zz = np.array([v[0], v[-1]])
    return CompletedGraph(tt, zz)


def _l1_point_seg(pt, pz, at, az, bt, bz) -> float:
    cands = [0.0, 1.0]
    if bt != at:
        cands.append((pt - at) / (bt - at))
    if bz != az:
        cands.append((pz - az) / (bz - az))
    best = np.inf
    for th in cands:
        th = min(max(th, 0.0), 1.0)
        d = abs(pt - (at + th * (bt - at))) + abs(pz - (az + th * (bz - az)))
        if d < best:
            best = d
    return float(best)


def sample_graph(g: CompletedGraph, m: int) -> SampledGraph:
    """About m+1 samples along the graph.  Small graphs keep every vertex and
    get at least 8 samples per segment; large graphs are subsampled uniformly
    by L1 arc length with jump-segment endpoints always kept as anchors."""
    t, z = g.times, g.values
    nseg = t.size - 1
    seg = np.abs(np.diff(t)) + np.abs(np.diff(z))
    total = float(seg.sum())
    if total == 0.0:
        return SampledGraph(t.copy(), z.copy(), 0.0, 0.0)

    if nseg <= m // 2:
        minq = 8 if 8 * nseg <= m else 1
        quota = np.maximum(minq, np.round(m * seg / total).astype(int))
        ts = [t[:1]]
        zs = [z[:1]]
        for k in range(nseg):
            lam = np.linspace(0.0, 1.0, quota[k] + 1)[1:]
            ts.append(t[k] + lam * (t[k + 1] - t[k]))
            zs.append(z[k] + lam * (z[k + 1] - z[k]))
        tt = np.concatenate(ts)
        zz = np.concatenate(zs)
        dev = 0.0
    else:
        cum = np.concatenate(([0.0], np.cumsum(seg)))
        anchor_idx = {0, nseg}
        for k in np.nonzero(np.diff(t) == 0.0)[0]:
            anchor_idx.add(int(k))
            anchor_idx.add(int(k) + 1)
        aidx = np.array(sorted(anchor_idx))
        targets = np.linspace(0.0, total, m + 1)
        loc = np.clip(np.searchsorted(cum, targets, side="right") - 1, 0, nseg - 1)
        theta = (targets - cum[loc]) / np.where(seg[loc] > 0.0, seg[loc], 1.0)
        theta = np.clip(theta, 0.0, 1.0)
        pt = t[loc] + theta * (t[loc + 1] - t[loc])
        pz = z[loc] + theta * (z[loc + 1] - z[loc])
        pos = np.concatenate((targets, cum[aidx]))
        tt = np.concatenate((pt, t[aidx]))
        zz = np.concatenate((pz, z[aidx]))
        order = np.argsort(pos, kind="stable")
        pos, tt, zz = pos[order], tt[order], zz[order]
        keep = np.concatenate(([True], np.diff(pos) > 0.0))
        pos, tt, zz = pos[keep], tt[keep], zz[keep]
        bracket = np.clip(np.searchsorted(pos, cum[:-1], side="right") - 1, 0, pos.size - 2)
        dev = 0.0
        for i in range(1, nseg):
            j = bracket[i]
            d = _l1_point_seg(t[i], z[i], tt[j], zz[j], tt[j + 1], zz[j + 1])
            if d > dev:
                dev = d
    spacing = float(np.max(np.abs(np.diff(tt)) + np.abs(np.diff(zz)))) if tt.size > 1 else 0.0
    return SampledGraph(tt, zz, 0.5 * spacing + dev, dev)


# ---------------------------------------------------------------------------
# M1: Pareto-frontier staircase DP (sum form)
# ---------------------------------------------------------------------------


def _witness_value(Pt, Pz, Qt, Qz, mode: str) -> float:
    n, mq = len(Pt), len(Qt)
    i = j = 0
    A = B = 0.0
    while True:
        dt = abs(Pt[i] - Qt[j])
        dz = abs(Pz[i] - Qz[j])
        if dt > A:
            A = dt
        if dz > B:
            B = dz
        if i == n - 1 and j == mq - 1:
            break
        if i == n - 1:
            j += 1
        elif j == mq - 1:
            i += 1
        else:
            if mode == "time":
                ka, kb = Pt[i + 1], Qt[j + 1]
            else:
                ka, kb = (i + 1) / (n - 1), (j + 1) / (mq - 1)
            if ka < kb:
                i += 1
            elif kb < ka:
                j += 1
            else:
                i += 1
                j += 1
    return A + B


def _prune(cands):
    if not cands:
        return None
    cands.sort()
    out = []
    best_b = np.inf
    for a, b in cands:
        if b < best_b:
            out.append((a, b))
            best_b = b
    return out


def _pareto_dp(Pt, Pz, Qt, Qz, best: float) -> float:
    n, mq = len(Pt), len(Qt)
    Qt_arr = np.asarray(Qt)
    prev: dict[int, list] = {}
    for i in range(n):
        lo = int(np.searchsorted(Qt_arr, Pt[i] - best, side="right"))
        hi = int(np.searchsorted(Qt_arr, Pt[i] + best, side="left"))
        cur: dict[int, list] = {}
        left = None
        pt_i, pz_i = Pt[i], Pz[i]
        for j in range(lo, hi):
            dt = abs(pt_i - Qt[j])
            dz = abs(pz_i - Qz[j])
            cands = []
            if i == 0 and j == 0:
                if dt + dz < best:
                    cands.append((dt, dz))
            else:
                for src in (prev.get(j), prev.get(j - 1), left):
                    if src:
                        for a, b in src:
                            a2 = a if a >= dt else dt
                            b2 = b if b >= dz else dz
                            if a2 + b2 < best:
                                cands.append((a2, b2))
            front = _prune(cands)
            if front:
                cur[j] = front
                left = front
            else:
                left = None
        prev = cur
        if not prev:
            return best
    final = prev.get(mq - 1)
    if final:
        return min(best, min(a + b for a, b in final))
    return best


def d_m1(x: CadlagPath, y: CadlagPath, m: int = 256) -> MetricResult:
    """Skorokhod M1 distance (sum form) with certified resolution bounds."""
    if abs(x.T - y.T) > _HORIZON_TOL:
        raise ValueError("paths must share the horizon")
    if m < 8:
        raise ValueError("resolution m must be >= 8")
    gx = sample_graph(completed_graph(x), m)
    gy = sample_graph(completed_graph(y), m)
    Pt = gx.times.tolist()
    Pz = gx.values.tolist()
    Qt = gy.times.tolist()
    Qz = gy.values.tolist()
    best = min(
        _witness_value(Pt, Pz, Qt, Qz, "time"),
        _witness_value(Pt, Pz, Qt, Qz, "frac"),
    )
    value = _pareto_dp(Pt, Pz, Qt, Qz, best) if best > 0.0 else 0.0
    slack = gx.radius + gy.radius
    return MetricResult(
        value=float(value),
        lower=max(0.0, float(value) - slack),
        upper=float(value) + gx.dev + gy.dev,
        resolution=m,
    )


# ---------------------------------------------------------------------------
# J1: min-max value DP plus log-slope penalty (upper estimator)
# ---------------------------------------------------------------------------


def _j1_samples(path: CadlagPath, m: int):
    t = path.grid
    v = path.values
    w = path.left_values
    n = t.size
    disc = np.nonzero(np.abs(v - w) > 0.0)[0]
    if n <= m + 1:
        idx = np.arange(n)
    else:
        arc = (np.diff(t)) + np.abs(w[1:] - v[:-1]) + np.abs(v[1:] - w[1:])
        cum = np.concatenate(([0.0], np.cumsum(arc)))
        targets = np.linspace(0.0, cum[-1], m + 1)
        idx = np.searchsorted(cum, targets, side="left")
        anchors = [0, n - 1]
        for k in disc:
            anchors.append(int(k))
            if k > 0:
                anchors.append(int(k) - 1)
        idx = np.unique(np.concatenate((idx, anchors)))
        idx = np.clip(idx, 0, n - 1)
        idx = np.unique(idx)
    # Oscillation of the path within each half-open sample cell [s_k, s_{k+1}):
    # right values of interior knots, both one-sided values strictly inside,
    # and the left limit at the cell end; the jump at the end belongs to the
    # next cell.
    hi = np.maximum(v, w)
    lo = np.minimum(v, w)
    a, b = idx[:-1], idx[1:]
    cell_hi = np.maximum(v[a], w[b])
    cell_lo = np.minimum(v[a], w[b])
    inner = b - a > 1
    if np.any(inner):
        starts = (a + 1)[inner]
        ends = b[inner]
        pairs = np.empty(2 * starts.size, dtype=np.intp)
        pairs[0::2] = starts
        pairs[1::2] = ends
        cell_hi[inner] = np.maximum(cell_hi[inner], np.maximum.reduceat(hi, pairs)[0::2])
        cell_lo[inner] = np.minimum(cell_lo[inner], np.minimum.reduceat(lo, pairs)[0::2])
    osc = float(np.max(cell_hi - cell_lo)) if a.size else 0.0
    return t[idx], v[idx], osc


def _minmax_dp(Px: np.ndarray, Qx: np.ndarray) -> np.ndarray:
    n, mq = Px.size, Qx.size
    C = np.abs(Px[:, None] - Qx[None, :])
    D = np.empty_like(C)
    D[0] = np.maximum.accumulate(C[0])
    D[:, 0] = np.maximum.accumulate(C[:, 0])
    for i in range(1, n):
        e = np.minimum(D[i - 1, 1:], D[i - 1, :-1]).tolist()
        c = C[i].tolist()
        run = D[i, 0]
        row = [run]
        for j in range(1, mq):
            vmin = e[j - 1]
            if run < vmin:
                vmin = run
            cj = c[j]
            run = cj if cj > vmin else vmin
            row.append(run)
        D[i] = row
    return D


def _backtrack(D: np.ndarray, C: np.ndarray):
    i, j = D.shape[0] - 1, D.shape[1] - 1
    path = [(i, j)]
    while i > 0 or j > 0:
        if i > 0 and j > 0:
            moves = ((D[i - 1, j - 1], 0, i - 1, j - 1),
                     (D[i - 1, j], 1, i - 1, j),
                     (D[i, j - 1], 2, i, j - 1))
            _, _, i, j = min(moves)
        elif i > 0:
            i -= 1
        else:
            j -= 1
        path.append((i, j))
    path.reverse()
    return path


def d_j1(x: CadlagPath, y: CadlagPath, m: int = 256) -> MetricResult:
    """Skorokhod J1 estimate: best staircase value gap plus the log-slope
    penalty of the induced warp, floored by the identity-warp candidate.
    The certified lower bound drops the log term and subtracts the sampled
    per-cell oscillations."""
    if abs(x.T - y.T) > _HORIZON_TOL:
        raise ValueError("paths must share the horizon")
    if m < 8:
        raise ValueError("resolution m must be >= 8")
    ptt, pxv, oscx = _j1_samples(x, m)
    qtt, qxv, oscy = _j1_samples(y, m)
    D = _minmax_dp(pxv, qxv)
    gap = float(D[-1, -1])
    C = np.abs(pxv[:, None] - qxv[None, :])
    path = _backtrack(D, C)
    anchors = [(float(ptt[0]), float(qtt[0]))]
    for (i0, j0), (i1, j1) in zip(path, path[1:]):
        if i1 == i0 + 1 and j1 == j0 + 1:
            t_, s_ = float(ptt[i1]), float(qtt[j1])
            if t_ > anchors[-1][0] and s_ > anchors[-1][1]:
                anchors.append((t_, s_))
    endT = (float(ptt[-1]), float(qtt[-1]))
    if endT[0] > anchors[-1][0] and endT[1] > anchors[-1][1]:
        anchors.append(endT)
    elif anchors[-1] != endT:
        anchors[-1] = endT if len(anchors) > 1 else anchors[-1]
    pen = 0.0
    for (t0, s0), (t1, s1) in zip(anchors, anchors[1:]):
        pen = max(pen, abs(float(np.log((s1 - s0) / (t1 - t0)))))
    tu = np.union1d(ptt, qtt)
    aligned = float(np.max(np.abs(np.asarray(x.evaluate(tu)) - np.asarray(y.evaluate(tu)))))
    reported = min(gap + pen, aligned)
    lower = max(0.0, gap - oscx - oscy)
    lower = min(lower, reported)
    return MetricResult(reported, lower, reported, m)


# ---------------------------------------------------------------------------
# Oscillation functional and convergence diagnostic
# ---------------------------------------------------------------------------


def w_prime(path: CadlagPath, delta: float) -> float:
    """sup over grid triples t1 < t < t2 with t2 - t1 < delta of the distance
    from x(t) to the segment [x(t1), x(t2)].  Zero for monotone paths."""
    if not delta > 0.0:
        raise ValueError("delta must be > 0")
    t = path.grid
    v = path.values
    n = t.size
    his = np.searchsorted(t, t + delta, side="left")
    best = 0.0
    for i in range(n - 2):
        hi = int(his[i])
        if hi < i + 3:
            continue
        seg = v[i + 1 : hi - 1]
        vj = v[i + 2 : hi]
        cmax = np.maximum.accumulate(seg)
        cmin = np.minimum.accumulate(seg)
        vi = v[i]
        above = float(np.max(cmax - np.maximum(vi, vj)))
        below = float(np.max(np.minimum(vi, vj) - cmin))
        if above > best:
            best = above
        if below > best:
            best = below
    return max(best, 0.0)


@dataclass(frozen=True, eq=False)
class M1Diagnostic:
    """Empirical convergence diagnostics: pointwise gaps to the limit on a
    fixed time grid, and the oscillation profile across a delta ladder."""

    times: np.ndarray
    gaps: np.ndarray          # one row per path
    wprime: np.ndarray        # one row per path, one column per delta
    limit_wprime: np.ndarray
    deltas: tuple[float, ...]


def m1_convergence_diagnostic(
    paths: Sequence[CadlagPath],
    limit: CadlagPath,
    deltas: Sequence[float],
    times: np.ndarray | None = None,
) -> M1Diagnostic:
    if times is None:
        times = np.linspace(0.0, limit.T, 101)
    times = np.asarray(times, dtype=float)
    gaps = np.array([np.abs(np.asarray(p.evaluate(times)) - np.asarray(limit.evaluate(times))) for p in paths])
    wp = np.array([[w_prime(p, d) for d in deltas] for p in paths])
    lw = np.array([w_prime(limit, d) for d in deltas])
    return M1Diagnostic(times, gaps, wp, lw, tuple(float(d) for d in deltas))
