"""Coefficient families and solvers.

The random ODE driven by a window-averaged path is integrated with RK4 on a
mesh containing every breakpoint of the averaged path, with substeps capped
at eps/10 so the O(1/eps) forcing near jumps is resolved.  The jump SDE is
solved in canonical (Marcus) form: between jumps an Euler step with the
analytic Stratonovich correction 0.5*f*f'*(dL_c)^2 on the realized squared
increment of the continuous part, and at each registered jump the time-1 RK4
flow of the field dL*f.  The per-step realized correction makes the scheme
second order along the stored polyline, so it converges to the pathwise
product of jump flows and continuous-leg exponentials that the window-forced
ODE approaches as eps shrinks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .cadlag import LINEAR, CadlagPath, ConfigError, JumpRecord, QuadraticVariationSplit
from .smoothing import SmoothedPath

DIVERGENCE_CAP = 1e12


class SolverDivergenceError(RuntimeError):
    """State became nonfinite or exceeded the divergence cap."""

    def __init__(self, what: str, time: Optional[float]):
        self.time = time
        where = "during a jump flow" if time is None else f"at t = {time:.6g}"
        super().__init__(f"{what} diverged {where}")


# ---------------------------------------------------------------------------
# Coefficient families
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CoefficientFamily:
    """Named scalar coefficient with analytic derivative.

    `bounded_lipschitz` is True only for the families whose value and
    derivative are bounded and Lipschitz (constant, sin_scaled, tanh_scaled);
    linear and quadratic are unbounded test-only families.
    """

    name: str
    params: tuple[float, ...]
    bounded_lipschitz: bool
    _f: Callable[[float], float]
    _df: Callable[[float], float]
    _fb: Callable[[np.ndarray], np.ndarray]
    _dfb: Callable[[np.ndarray], np.ndarray]

    def __call__(self, x: float) -> float:
        return self._f(x)

    def deriv(self, x: float) -> float:
        return self._df(x)

    def batch(self, x: np.ndarray) -> np.ndarray:
        return self._fb(np.asarray(x, dtype=float))

    def deriv_batch(self, x: np.ndarray) -> np.ndarray:
        return self._dfb(np.asarray(x, dtype=float))

    def __repr__(self):
        return f"{self.name}{self.params!r}"


def coefficient_family(name: str, *params: float) -> CoefficientFamily:
    params = tuple(float(p) for p in params)
    if name == "constant":
        (c,) = params
        return CoefficientFamily(
            name, params, True,
            lambda x: c, lambda x: 0.0,
            lambda x: np.full_like(x, c), lambda x: np.zeros_like(x),
        )
    if name == "linear":
        (a,) = params
        return CoefficientFamily(
            name, params, False,
            lambda x: a * x, lambda x: a,
            lambda x: a * x, lambda x: np.full_like(x, a),
        )
    if name == "quadratic":
        (a,) = params
        return CoefficientFamily(
            name, params, False,
            lambda x: a * x * x, lambda x: 2.0 * a * x,
            lambda x: a * x * x, lambda x: 2.0 * a * x,
        )
    if name == "sin_scaled":
        a, k = params
        return CoefficientFamily(
            name, params, True,
            lambda x: a * math.sin(k * x), lambda x: a * k * math.cos(k * x),
            lambda x: a * np.sin(k * x), lambda x: a * k * np.cos(k * x),
        )
    if name == "tanh_scaled":
        a, k = params
        def _d(x, a=a, k=k):
            th = math.tanh(k * x)
            return a * k * (1.0 - th * th)
        def _db(x, a=a, k=k):
            th = np.tanh(k * x)
            return a * k * (1.0 - th * th)
        return CoefficientFamily(
            name, params, True,
            lambda x: a * math.tanh(k * x), _d,
            lambda x: a * np.tanh(k * x), _db,
        )
    raise ConfigError(f"unknown coefficient family {name!r}")


@dataclass(frozen=True, eq=False)
class CoefficientSet:
    b: CoefficientFamily
    f: CoefficientFamily

    @property
    def theorem_compliant(self) -> bool:
        return self.b.bounded_lipschitz and self.f.bounded_lipschitz

    @staticmethod
    def from_config(d: dict) -> "CoefficientSet":
        def fam(sub):
            return coefficient_family(sub["family"], *sub.get("params", []))
        return CoefficientSet(b=fam(d["b"]), f=fam(d["f"]))


@dataclass(frozen=True)
class SolverConfig:
    x0: float
    h: float = 1e-3
    flow_substeps: int = 32
    ode_scheme: str = "rk4"
    sde_scheme: str = "euler_strat"

    def __post_init__(self):
        if not self.h > 0.0:
            raise ConfigError("solver step h must be > 0")
        if self.flow_substeps < 1:
            raise ConfigError("flow substeps must be >= 1")
        if self.ode_scheme != "rk4":
            raise ConfigError(f"unsupported ODE scheme {self.ode_scheme!r}")
        if self.sde_scheme != "euler_strat":
            raise ConfigError(f"unsupported SDE scheme {self.sde_scheme!r}")


def _check_state(x: float, t: Optional[float], what: str) -> None:
    if not (math.isfinite(x) and abs(x) <= DIVERGENCE_CAP):
        raise SolverDivergenceError(what, t)


# ---------------------------------------------------------------------------
# Random ODE along the smoothed driver
# ---------------------------------------------------------------------------


def solve_random_ode(coeffs: CoefficientSet, sp: SmoothedPath, cfg: SolverConfig) -> CadlagPath:
    """RK4 for x' = b(x) + f(x) * d(smoothed driver)/dt on [0, T].

    The integration mesh is the smoothed path's breakpoint set (which contains
    the base grid), each cell subdivided to steps <= min(h, eps/10); the
    forcing is affine within every cell and is evaluated with one-sided values
    at cell edges.  Output is sampled on the driver's base grid.
    """
    base = sp.base
    mesh = sp.grid
    mid, gmid, gslope = sp.cell_affine()
    hmax = min(cfg.h, sp.eps / 10.0)
    bfun, ffun = coeffs.b, coeffs.f

    rec = np.searchsorted(mesh, base.grid)
    out = np.empty(base.grid.size)
    out[0] = x = float(cfg.x0)
    nxt = 1

    for k in range(mesh.size - 1):
        a = mesh[k]
        width = mesh[k + 1] - a
        gs = gslope[k]
        g0 = gmid[k] + gs * (a - mid[k])
        nsub = max(1, int(math.ceil(width / hmax - 1e-9)))
        hh = width / nsub
        tl = 0.0
        for _ in range(nsub):
            gv0 = g0 + gs * tl
            gvm = g0 + gs * (tl + 0.5 * hh)
            gv1 = g0 + gs * (tl + hh)
            k1 = bfun(x) + ffun(x) * gv0
            x2 = x + 0.5 * hh * k1
            k2 = bfun(x2) + ffun(x2) * gvm
            x3 = x + 0.5 * hh * k2
            k3 = bfun(x3) + ffun(x3) * gvm
            x4 = x + hh * k3
            k4 = bfun(x4) + ffun(x4) * gv1
            x = x + hh * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
            tl += hh
            _check_state(x, a + tl, "random ODE")
        if nxt < rec.size and rec[nxt] == k + 1:
            out[nxt] = x
            nxt += 1
    meta = {"eps": sp.eps, "kind": "x_eps", "source_id": id(base)}
    return CadlagPath(base.grid, out, (), LINEAR, meta=meta)


# ---------------------------------------------------------------------------
# Marcus canonical solution
# ---------------------------------------------------------------------------


def marcus_flow(f: CoefficientFamily, c: float, u: float, substeps: int = 32) -> float:
    """y(1) for y' = c * f(y), y(0) = u: the canonical action of a jump of
    size c through the vector field f, integrated by RK4."""
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    if c == 0.0:
        return float(u)
    h = 1.0 / substeps
    y = float(u)
    for _ in range(substeps):
        k1 = c * f(y)
        k2 = c * f(y + 0.5 * h * k1)
        k3 = c * f(y + 0.5 * h * k2)
        k4 = c * f(y + h * k3)
        y += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        if not (math.isfinite(y) and abs(y) <= DIVERGENCE_CAP):
            raise SolverDivergenceError("jump flow", None)
    return y


def solve_marcus(
    coeffs: CoefficientSet,
    L: CadlagPath,
    cfg: SolverConfig,
    qv: Optional[QuadraticVariationSplit] = None,
) -> CadlagPath:
    """Canonical (Marcus) solution along a stored driver realization.

    Between jumps: Euler with the Stratonovich correction
    0.5*f*f'*(dL_c)^2 per substep on the continuous increments of L.
    At each registered jump: the time-1 flow of (dL * f).
    The output shares the driver's grid and registers the solution's jumps.
    """
    grid = L.grid
    v = L.values
    dlc = L.left_values[1:] - v[:-1]
    jsz = L.grid_jump_sizes
    bfun, ffun, dffun = coeffs.b, coeffs.f, coeffs.f.deriv

    out = np.empty(grid.size)
    out[0] = x = float(cfg.x0)
    jumps = []
    for k in range(grid.size - 1):
        dt = grid[k + 1] - grid[k]
        nsub = max(1, int(math.ceil(dt / cfg.h - 1e-9)))
        hh = dt / nsub
        dl = dlc[k] / nsub
        for _ in range(nsub):
            fx = ffun(x)
            x = x + bfun(x) * hh + fx * dl + 0.5 * fx * dffun(x) * dl * dl
        _check_state(x, grid[k + 1], "jump SDE (continuous leg)")
        s = jsz[k + 1]
        if s != 0.0:
            pre = x
            x = marcus_flow(ffun, float(s), x, cfg.flow_substeps)
            _check_state(x, grid[k + 1], "jump SDE (jump flow)")
            if x != pre:
                jumps.append(JumpRecord(float(grid[k + 1]), x - pre))
        out[k + 1] = x
    meta = {"kind": "x_marcus", "source_id": id(L)}
    return CadlagPath(grid, out, tuple(jumps), LINEAR, meta=meta)


# ---------------------------------------------------------------------------
# Time-changed solution and residual diagnostic
# ---------------------------------------------------------------------------


def y_eps_and_residual(
    x_eps: CadlagPath,
    sys,
    z: CadlagPath,
    coeffs: CoefficientSet,
    refine_factor: int = 1,
) -> tuple[CadlagPath, float]:
    """Y(u) = X_eps(zeta_eps(u)) and the sup-norm defect of its left-point
    Riemann-Stieltjes reconstruction from b dzeta + f dZ on the gamma grid.

    `refine_factor` subdivides every gamma-grid cell (2 doubles the grid);
    the residual is first order in the grid step.
    """
    if sys.eps <= 0.0 or sys.zeta_eps is None:
        raise ConfigError("residual needs a system built with eps > 0")
    if z.meta.get("eps") != sys.eps or z.meta.get("source_id") != id(sys.source):
        raise ConfigError("time-changed path and system come from different runs")
    if x_eps.meta.get("eps") not in (None, sys.eps):
        raise ConfigError("solution path and system have different windows")
    u = z.grid
    if refine_factor > 1:
        fractions = np.arange(1, refine_factor) / refine_factor
        extra = (u[:-1, None] + fractions[None, :] * np.diff(u)[:, None]).ravel()
        u = np.unique(np.concatenate((u, extra)))
    zu = np.interp(u, z.grid, z.values)
    s = sys.zeta_eps(u)
    y = np.asarray(x_eps.evaluate(s), dtype=float)
    inc = coeffs.b.batch(y[:-1]) * np.diff(s) + coeffs.f.batch(y[:-1]) * np.diff(zu)
    recon = y[0] + np.concatenate(([0.0], np.cumsum(inc)))
    residual = float(np.max(np.abs(y - recon)))
    path = CadlagPath(u, y, (), LINEAR, meta={"kind": "y_eps", "eps": sys.eps})
    return path, residual
