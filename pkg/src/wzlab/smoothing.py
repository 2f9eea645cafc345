"""Window-average smoothing of cadlag paths with exact piecewise integration.

The smoothing of a path x at window eps > 0 is the sliding average of x over
[t - eps, t], with x frozen at x(0) for negative times so the average is
defined from t = 0 on.  Because the base path is step or linear between grid
points, every evaluation is a closed-form difference of exact integrals;
no numeric quadrature appears anywhere.  The smoothed path is continuous,
piecewise linear for a step base and piecewise quadratic for a linear base,
with breakpoints at the base grid and at base grid + eps.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .cadlag import LINEAR, STEP, CadlagPath, QuadraticVariationSplit

_DOMAIN_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class SmoothedPath:
    base: CadlagPath
    eps: float
    grid: np.ndarray    # breakpoints of the averaged path
    values: np.ndarray  # exact values at the breakpoints

    @property
    def T(self) -> float:
        return self.base.T

    def _int_ext(self, u: np.ndarray) -> np.ndarray:
        """Integral of the base extended by x(0) for negative times."""
        return np.where(
            u < 0.0,
            self.base.values[0] * u,
            self.base.integral(np.maximum(u, 0.0)),
        )

    def _clip(self, t):
        tt = np.asarray(t, dtype=float)
        if np.any(tt < -_DOMAIN_SLACK) or np.any(tt > self.T + _DOMAIN_SLACK):
            raise ValueError(f"time outside [0, {self.T}]")
        return np.clip(tt, 0.0, self.T)

    @cached_property
    def _step_changes(self) -> tuple[np.ndarray, np.ndarray]:
        """Value-change times and increments of a step base (empty otherwise)."""
        if self.base.interpolation != STEP:
            return np.empty(0), np.empty(0)
        delta = self.base.values[1:] - self.base.values[:-1]
        nz = np.nonzero(delta)[0]
        return self.base.grid[nz + 1], delta[nz]

    def evaluate(self, t):
        """Exact window average (1/eps) * integral of the base over [t-eps, t].

        For a step base the average is the clamp sum
        x(0) + sum_j delta_j * clamp(t - t_j, 0, eps) / eps, which is exactly
        monotone in floating point whenever all increments share one sign;
        for a linear base it is the difference of exact cell integrals."""
        tt = self._clip(t)
        if self.base.interpolation == STEP:
            tj, dj = self._step_changes
            acc = np.clip(np.subtract.outer(np.atleast_1d(tt), tj), 0.0, self.eps) @ dj
            out = self.base.values[0] + acc / self.eps
            out = out.reshape(np.shape(tt))
        else:
            out = (self.base.integral(tt) - self._int_ext(tt - self.eps)) / self.eps
        return out if np.ndim(t) else float(out)

    def derivative(self, t):
        """A.e. derivative (x(t) - x(t-eps)) / eps, right-continuous version."""
        tt = self._clip(t)
        lo = tt - self.eps
        xlo = np.where(lo < 0.0, self.base.values[0], self.base.evaluate(np.maximum(lo, 0.0)))
        out = (self.base.evaluate(tt) - xlo) / self.eps
        return out if np.ndim(t) else float(out)

    def to_cadlag(self) -> CadlagPath:
        """Piecewise-linear sample of the smoothed path on its breakpoints.

        Exact for step bases; for linear bases the quadratic pieces are
        chorded between breakpoints (used only by metric plumbing)."""
        return CadlagPath(self.grid, self.values, (), LINEAR, meta={"eps": self.eps})

    @cached_property
    def cell_curvatures(self) -> np.ndarray:
        """Quadratic coefficient of the smoothed path on each breakpoint cell.

        Base slopes are read at cell midpoints: breakpoints of the form
        tau + eps do not subtract back to tau exactly in floats, so an
        endpoint lookup can land one ulp on the wrong side of a jump."""
        mid = 0.5 * (self.grid[:-1] + self.grid[1:])
        sr = _right_slope(self.base, mid)
        lo = mid - self.eps
        sl = np.where(lo < 0.0, 0.0, _right_slope(self.base, np.maximum(lo, 0.0)))
        return (sr - sl) / (2.0 * self.eps)

    def cell_affine(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-cell affine model of the derivative: on cell k the forcing is
        g(t) = gmid[k] + gslope[k] * (t - mid[k]).  Midpoint evaluation keeps
        every lookup strictly inside base cells."""
        mid = 0.5 * (self.grid[:-1] + self.grid[1:])
        gmid = np.asarray(self.derivative(mid), dtype=float)
        sr = _right_slope(self.base, mid)
        lo = mid - self.eps
        sl = np.where(lo < 0.0, 0.0, _right_slope(self.base, np.maximum(lo, 0.0)))
        gslope = (sr - sl) / self.eps
        return mid, gmid, gslope


def _right_slope(path: CadlagPath, t: np.ndarray) -> np.ndarray:
    """Slope of the base path just right of t (0 for step paths)."""
    if path.interpolation == STEP:
        return np.zeros_like(np.asarray(t, dtype=float))
    idx = np.searchsorted(path.grid, t, side="right") - 1
    idx = np.clip(idx, 0, path.grid.size - 2)
    dt = path.grid[idx + 1] - path.grid[idx]
    return (path.left_values[idx + 1] - path.values[idx]) / dt


def smooth(path: CadlagPath, eps: float) -> SmoothedPath:
    """The window average of `path` at window eps > 0."""
    if not eps > 0.0:
        raise ValueError("smoothing window eps must be > 0")
    bp = np.concatenate((path.grid, path.grid + eps))
    bp = np.unique(np.concatenate((bp[bp < path.T], [path.T])))
    sp = SmoothedPath(path, float(eps), bp, np.empty(0))
    vals = sp.evaluate(bp)
    vals.setflags(write=False)
    bp.setflags(write=False)
    object.__setattr__(sp, "values", vals)
    return sp


def smoothed_derivative(sp: SmoothedPath, t):
    """Forcing term of the random ODE: (x(t) - x(t-eps)) / eps."""
    return sp.derivative(t)


def clock_path(qv: QuadraticVariationSplit) -> CadlagPath:
    """The strictly increasing clock [L]^d(t) + t as an exact cadlag path."""
    d = qv.discontinuous
    return CadlagPath(d.grid, d.values + d.grid, d.jumps, LINEAR)


def v_eps(qv: QuadraticVariationSplit, eps: float) -> SmoothedPath:
    """Window average of the pure-jump quadratic variation [L]^d."""
    return smooth(qv.discontinuous, eps)


def gamma_eps(qv: QuadraticVariationSplit, eps: float) -> SmoothedPath:
    """Smoothed clock: window average of [L]^d(s) + s.

    Satisfies gamma_eps(t) = v_eps(t) + t - eps/2 exactly for t >= eps."""
    return smooth(clock_path(qv), eps)
