"""Random time change: clocks, generalized inverses, plateaus, and the
time-changed processes.

The limit clock is gamma0(t) = [L]^d(t) + t; each driver jump of size dL
opens a plateau [gamma0(tau-), gamma0(tau)] of width dL**2 in the new time
scale.  The smoothed clock gamma_eps is strictly increasing and continuous,
so its generalized inverse inf{s > 0 : gamma_eps(s) > u} is the ordinary
inverse, computed in closed form by walking the breakpoint cells (linear
cells invert linearly; the head cells where the window dips below time 0 are
quadratic and invert by the stable quadratic formula).  Inverses clamp to T
once the clock's range on [0, T] is exhausted.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cadlag import LINEAR, CadlagPath, ConfigError, JumpRecord, QuadraticVariationSplit
from .smoothing import SmoothedPath, _right_slope, clock_path, gamma_eps

PLATEAU_SAMPLES = 16


@dataclass(frozen=True)
class PlateauRecord:
    """One jump's plateau in gamma-time: [lo, hi] = [gamma0(tau-), gamma0(tau)]."""

    time: float         # jump time tau of the driver
    lo: float           # gamma0(tau-)
    hi: float           # gamma0(tau)
    width: float        # squared driver jump size, exact by construction
    driver_jump: float  # dL(tau)


@dataclass(frozen=True, eq=False)
class Zeta0:
    """Closed-form generalized inverse of the step-plus-identity clock."""

    grid: np.ndarray    # time knots of gamma0
    gvals: np.ndarray   # gamma0 values at the knots (strictly increasing)
    glefts: np.ndarray  # left limits of gamma0 at the knots

    @property
    def end(self) -> float:
        return float(self.gvals[-1])

    def __call__(self, u):
        uu = np.asarray(u, dtype=float)
        g, t, w = self.gvals, self.grid, self.glefts
        last = g.size - 1
        i = np.searchsorted(g, uu, side="right") - 1
        i = np.clip(i, 0, last - 1)
        wn = w[i + 1]
        gi = g[i]
        denom = np.where(wn > gi, wn - gi, 1.0)
        s_lin = t[i] + (uu - gi) * (t[i + 1] - t[i]) / denom
        out = np.where(uu < wn, s_lin, t[i + 1])
        out = np.where(uu >= g[last], t[last], out)
        out = np.where(uu <= g[0], t[0], out)
        out = np.clip(out, 0.0, t[last])
        return out if np.ndim(u) else float(out)


@dataclass(frozen=True, eq=False)
class ZetaEps:
    """Closed-form inverse of a strictly increasing smoothed clock."""

    s: np.ndarray  # clock breakpoints in time
    v: np.ndarray  # clock values at the breakpoints
    b: np.ndarray  # per-cell linear coefficient (right derivative at cell start)
    c: np.ndarray  # per-cell quadratic coefficient

    @property
    def end(self) -> float:
        return float(self.v[-1])

    def __call__(self, u):
        uu = np.asarray(u, dtype=float)
        i = np.searchsorted(self.v, uu, side="right") - 1
        i = np.clip(i, 0, self.v.size - 2)
        q = np.maximum(uu - self.v[i], 0.0)
        b = self.b[i]
        cc = self.c[i]
        disc = np.maximum(b * b + 4.0 * cc * q, 0.0)
        denom = b + np.sqrt(disc)
        x = np.where(q > 0.0, 2.0 * q / np.where(denom > 0.0, denom, np.inf), 0.0)
        x = np.clip(x, 0.0, self.s[i + 1] - self.s[i])
        out = self.s[i] + x
        out = np.where(uu >= self.v[-1], self.s[-1], out)
        out = np.where(uu <= self.v[0], self.s[0], out)
        return out if np.ndim(u) else float(out)


def _invert_smoothed_clock(sp: SmoothedPath) -> ZetaEps:
    # Cell polynomial v_a + b*x + c*x**2 pinned to both exact endpoint values:
    # c comes from midpoint slope lookups, b from the secant minus c*h.
    s = sp.grid
    v = sp.values
    h = np.diff(s)
    c = np.asarray(sp.cell_curvatures, dtype=float)
    b = (v[1:] - v[:-1]) / h - c * h
    return ZetaEps(s, v, b, c)


@dataclass(frozen=True, eq=False)
class TimeChangeSystem:
    eps: float
    gamma0: CadlagPath
    zeta0: Zeta0
    plateaus: tuple[PlateauRecord, ...]
    gamma_eps: Optional[SmoothedPath] = None
    zeta_eps: Optional[ZetaEps] = None
    source: Optional[CadlagPath] = None


def build(qv: QuadraticVariationSplit, jumps: tuple[JumpRecord, ...], eps: float) -> TimeChangeSystem:
    """Assemble the time-change system; eps = 0 gives the limit system."""
    if eps < 0.0:
        raise ValueError("eps must be >= 0")
    g0 = clock_path(qv)
    z0 = Zeta0(g0.grid, g0.values, g0.left_values)

    plateaus = []
    if jumps:
        idx = np.searchsorted(g0.grid, [j.time for j in jumps])
        for j, k in zip(jumps, idx):
            hi = float(g0.values[k])
            lo = float(g0.left_values[k])
            plateaus.append(PlateauRecord(j.time, lo, hi, float(g0.grid_jump_sizes[k]), j.size))

    ge = ze = None
    if eps > 0.0:
        ge = gamma_eps(qv, eps)
        ze = _invert_smoothed_clock(ge)
    return TimeChangeSystem(float(eps), g0, z0, tuple(plateaus), ge, ze, source=qv.source)


# ---------------------------------------------------------------------------
# gamma-time grids and time-changed processes
# ---------------------------------------------------------------------------


def _plateau_knots(p: PlateauRecord) -> np.ndarray:
    k = np.arange(PLATEAU_SAMPLES + 1) / (PLATEAU_SAMPLES + 1.0)
    return p.lo + p.width * k


def gamma_grid(sys: TimeChangeSystem, base_grid: np.ndarray) -> np.ndarray:
    """Evaluation grid in gamma-time: image of the base grid under the
    clock(s), plus plateau endpoints and interior samples."""
    parts = [sys.gamma0.evaluate(base_grid)]
    for p in sys.plateaus:
        parts.append(_plateau_knots(p))
    if sys.gamma_eps is not None:
        parts.append(sys.gamma_eps.evaluate(base_grid))
    return np.unique(np.concatenate(parts))


def z_limit(L: CadlagPath, sys: TimeChangeSystem) -> CadlagPath:
    """The continuous limit of the time-changed smoothed drivers.

    Off plateaus it is L(zeta0(u)); on the plateau of jump tau it traverses
    the jump linearly from L(tau-) to L(tau).  Only the limit components of
    `sys` are used, so any system built from the same realization works."""
    img_u = sys.gamma0.evaluate(L.grid)
    parts_u = [img_u]
    parts_v = [np.asarray(L.values, dtype=float)]
    for p in sys.plateaus:
        k = np.arange(PLATEAU_SAMPLES + 1) / (PLATEAU_SAMPLES + 1.0)
        left = L.left_limit(p.time)
        right = L.evaluate(p.time)
        parts_u.append(p.lo + p.width * k)
        parts_v.append(left + (right - left) * k)
    u = np.concatenate(parts_u)
    v = np.concatenate(parts_v)
    order = np.argsort(u, kind="stable")
    u, v = u[order], v[order]
    keep = np.concatenate(([True], np.diff(u) > 0.0))
    return CadlagPath(u[keep], v[keep], (), LINEAR, meta={"kind": "z_limit", "source_id": id(sys.source)})


def z_eps(sp: SmoothedPath, sys: TimeChangeSystem) -> CadlagPath:
    """Smoothed driver reevaluated in the smoothed clock's time scale."""
    if sys.eps <= 0.0 or sys.zeta_eps is None:
        raise ConfigError("z_eps needs a system built with eps > 0")
    if sp.eps != sys.eps:
        raise ConfigError(f"window mismatch: path eps {sp.eps}, system eps {sys.eps}")
    if sys.source is not None and sp.base is not sys.source:
        raise ConfigError("smoothed path and system come from different realizations")
    u = gamma_grid(sys, sp.base.grid)
    vals = sp.evaluate(sys.zeta_eps(u))
    meta = {"kind": "z_eps", "eps": sys.eps, "source_id": id(sys.source)}
    return CadlagPath(u, vals, (), LINEAR, meta=meta)


def u_eps(z: CadlagPath, L: CadlagPath, sys: TimeChangeSystem) -> CadlagPath:
    """Difference between the time-changed path and the raw driver in the new
    clock: z(u) - L(zeta(u)).  Zero off plateaus in the limit; on the plateau
    of jump tau it ramps linearly from -dL(tau) back to 0."""
    if sys.eps > 0.0:
        if z.meta.get("eps") != sys.eps:
            raise ConfigError("z path and system have different windows")
        zeta = sys.zeta_eps
        jump_pos = [float(sys.gamma_eps.evaluate(p.time)) for p in sys.plateaus]
    else:
        zeta = sys.zeta0
        jump_pos = [p.lo for p in sys.plateaus]
    vals = z.values - L.evaluate(zeta(z.grid))
    jumps = []
    for p, pos in zip(sys.plateaus, jump_pos):
        k = int(np.searchsorted(z.grid, pos))
        if k >= z.grid.size or abs(z.grid[k] - pos) > 1e-12:
            raise ConfigError("jump image missing from the gamma grid")
        jumps.append(JumpRecord(float(z.grid[k]), -p.driver_jump))
    return CadlagPath(z.grid, vals, tuple(jumps), LINEAR)


def step1_gap(L: CadlagPath, sp: SmoothedPath, sys: TimeChangeSystem,
              z_ref: Optional[CadlagPath] = None) -> float:
    """sup over the gamma grid of |Z_eps - Z|, both evaluated exactly."""
    if sys.eps <= 0.0 or sys.zeta_eps is None:
        raise ConfigError("step1_gap needs a system built with eps > 0")
    if z_ref is None:
        z_ref = z_limit(L, sys)
    u = gamma_grid(sys, sp.base.grid)
    z_eps_vals = sp.evaluate(sys.zeta_eps(u))
    z_vals = np.interp(u, z_ref.grid, z_ref.values)
    return float(np.max(np.abs(z_eps_vals - z_vals)))


def sandwich_margin(sys: TimeChangeSystem, ts: np.ndarray) -> float:
    """Smallest one-sided margin of the clock and inverse-clock sandwiches
    over the given grid times (negative means a violation)."""
    if sys.eps <= 0.0 or sys.gamma_eps is None:
        raise ConfigError("sandwich_margin needs a system built with eps > 0")
    ts = np.asarray(ts, dtype=float)
    eps = sys.eps
    g0 = sys.gamma0.evaluate(ts)
    ge = sys.gamma_eps.evaluate(ts)
    margins = [np.min(g0 - ge)]
    mask = ts + eps <= sys.gamma0.T
    if np.any(mask):
        margins.append(np.min(sys.gamma_eps.evaluate(ts[mask] + eps) - g0[mask]))
    z0 = sys.zeta0(ts)
    ze = sys.zeta_eps(ts)
    margins.append(np.min(ze - z0))
    margins.append(np.min(z0 - (ze - eps)))
    return float(min(margins))
