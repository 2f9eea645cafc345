"""Finite cadlag sample paths with an explicit jump registry.

A path lives on [0, T] and is stored as values at strictly increasing grid
times t0 = 0 < t1 < ... < tN = T under the right-continuous convention.
Between grid points the path is either piecewise constant ("step") or
piecewise linear ("linear").  Every registered jump time is a grid point;
simulators insert jump times at construction, so no jump detection is ever
performed on data.  Under linear interpolation the left limit at a jump time
is value - size; under step interpolation it is the previous grid value.

Paths are immutable after construction and safe for concurrent reads.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional

import numpy as np

STEP = "step"
LINEAR = "linear"

_DOMAIN_SLACK = 1e-9
_JUMP_TOL = 1e-12


class ConfigError(ValueError):
    """Inputs from different realizations or smoothing windows were mixed."""


@dataclass(frozen=True)
class JumpRecord:
    """One registered jump: time tau and the nonzero size x(tau) - x(tau-)."""

    time: float
    size: float


@dataclass(frozen=True, eq=False)
class CadlagPath:
    grid: np.ndarray
    values: np.ndarray
    jumps: tuple[JumpRecord, ...] = ()
    interpolation: str = LINEAR
    meta: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape or grid.size < 2:
            raise ValueError("grid and values must be 1d arrays of equal length >= 2")
        if grid[0] != 0.0:
            raise ValueError("grid must start at time 0")
        if not np.all(np.diff(grid) > 0.0):
            raise ValueError("grid must be strictly increasing")
        if not (np.all(np.isfinite(grid)) and np.all(np.isfinite(values))):
            raise ValueError("grid and values must be finite")
        if self.interpolation not in (STEP, LINEAR):
            raise ValueError(f"unknown interpolation {self.interpolation!r}")
        jumps = tuple(self.jumps)
        times = [j.time for j in jumps]
        if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
            raise ValueError("jump times must be strictly increasing")
        if times:
            idx = np.searchsorted(grid, times)
            for j, k in zip(jumps, idx):
                if j.size == 0.0:
                    raise ValueError("jump sizes must be nonzero")
                if not (0.0 < j.time <= grid[-1]) or k >= grid.size or grid[k] != j.time:
                    raise ValueError(f"jump time {j.time} is not a positive grid point")
                if self.interpolation == STEP:
                    if abs((values[k] - values[k - 1]) - j.size) > _JUMP_TOL:
                        raise ValueError("step path jump size inconsistent with grid values")
        grid.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "jumps", jumps)

    # ------------------------------------------------------------------ basics

    @property
    def T(self) -> float:
        return float(self.grid[-1])

    @cached_property
    def grid_jump_sizes(self) -> np.ndarray:
        """Registered jump size at each grid index (0 where no jump)."""
        jsz = np.zeros_like(self.values)
        if self.jumps:
            idx = np.searchsorted(self.grid, [j.time for j in self.jumps])
            jsz[idx] = [j.size for j in self.jumps]
        jsz.setflags(write=False)
        return jsz

    @cached_property
    def left_values(self) -> np.ndarray:
        """Left limit x(t-) at each grid point; index 0 holds x(0) by convention."""
        if self.interpolation == STEP:
            w = np.concatenate(([self.values[0]], self.values[:-1]))
        else:
            w = self.values - self.grid_jump_sizes
        w.setflags(write=False)
        return w

    @cached_property
    def _cumint(self) -> np.ndarray:
        dt = np.diff(self.grid)
        if self.interpolation == STEP:
            seg = self.values[:-1] * dt
        else:
            seg = 0.5 * (self.values[:-1] + self.left_values[1:]) * dt
        out = np.concatenate(([0.0], np.cumsum(seg)))
        out.setflags(write=False)
        return out

    @cached_property
    def _prefix_sup(self) -> np.ndarray:
        aug = np.maximum(self.values, self.left_values)
        out = np.maximum.accumulate(aug)
        out.setflags(write=False)
        return out

    def _clip_domain(self, t, lo: float = 0.0):
        tt = np.asarray(t, dtype=float)
        if np.any(tt < lo - _DOMAIN_SLACK) or np.any(tt > self.T + _DOMAIN_SLACK):
            raise ValueError(f"time outside path domain [0, {self.T}]")
        return np.clip(tt, lo, self.T)

    # -------------------------------------------------------------- functionals

    def evaluate(self, t):
        """Path value at t under the right-continuous convention."""
        tt = self._clip_domain(t)
        idx = np.searchsorted(self.grid, tt, side="right") - 1
        idx = np.clip(idx, 0, self.grid.size - 1)
        if self.interpolation == STEP:
            out = self.values[idx]
        else:
            nxt = np.minimum(idx + 1, self.grid.size - 1)
            t0 = self.grid[idx]
            span = self.grid[nxt] - t0
            theta = (tt - t0) / np.where(span > 0.0, span, 1.0)
            out = self.values[idx] + theta * (self.left_values[nxt] - self.values[idx])
        return out if np.ndim(t) else float(out)

    def left_limit(self, t):
        """Value just before t: x(t-).  Requires t > 0."""
        tt = np.asarray(t, dtype=float)
        if np.any(tt <= 0.0):
            raise ValueError("left limit requires t > 0")
        if np.any(tt > self.T + _DOMAIN_SLACK):
            raise ValueError(f"time outside path domain [0, {self.T}]")
        tt = np.minimum(tt, self.T)
        idx = np.searchsorted(self.grid, tt, side="left") - 1
        idx = np.maximum(idx, 0)
        if self.interpolation == STEP:
            out = self.values[idx]
        else:
            t0 = self.grid[idx]
            theta = (tt - t0) / (self.grid[idx + 1] - t0)
            out = self.values[idx] + theta * (self.left_values[idx + 1] - self.values[idx])
        return out if np.ndim(t) else float(out)

    def integral(self, t):
        """Exact integral of the path over [0, t] (closed-form per cell)."""
        tt = self._clip_domain(t)
        idx = np.searchsorted(self.grid, tt, side="right") - 1
        idx = np.clip(idx, 0, self.grid.size - 2)
        t0 = self.grid[idx]
        dt = tt - t0
        v0 = self.values[idx]
        if self.interpolation == STEP:
            out = self._cumint[idx] + v0 * dt
        else:
            slope = (self.left_values[idx + 1] - v0) / (self.grid[idx + 1] - t0)
            out = self._cumint[idx] + v0 * dt + 0.5 * slope * dt * dt
        return out if np.ndim(t) else float(out)

    def running_sup(self, t):
        """sup of the path over [0, t], including one-sided values at jumps."""
        tt = self._clip_domain(t)
        idx = np.searchsorted(self.grid, tt, side="right") - 1
        idx = np.clip(idx, 0, self.grid.size - 1)
        out = np.maximum(self._prefix_sup[idx], self.evaluate(tt))
        return out if np.ndim(t) else float(out)

    def first_passage(self, a: float) -> Optional[float]:
        """inf{t >= 0 : x(t) > a} (strict exceedance), or None if never.

        For linear interpolation the in-cell crossing time is solved exactly;
        the infimum of the open exceedance set is returned, so x at the
        returned time may equal a.
        """
        if not a > 0.0:
            raise ValueError("passage level a must be > 0")
        v = self.values
        if v[0] > a:
            return 0.0
        if self.interpolation == STEP:
            hit = np.nonzero(v > a)[0]
            return float(self.grid[hit[0]]) if hit.size else None
        w = self.left_values
        cross_seg = w[1:] > a
        cross_jmp = v[1:] > a
        hits = np.nonzero(cross_seg | cross_jmp)[0]
        if hits.size == 0:
            return None
        k = int(hits[0])
        if cross_seg[k]:
            v0 = v[k]
            theta = (a - v0) / (w[k + 1] - v0)
            return float(self.grid[k] + theta * (self.grid[k + 1] - self.grid[k]))
        return float(self.grid[k + 1])


# ---------------------------------------------------------------------------
# Quadratic variation split
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class QuadraticVariationSplit:
    """Exact split [L] = [L]^c + [L]^d.

    The discontinuous part is the closed-form sum of squared registered jumps
    (a step path jumping by size**2 at each jump time).  The continuous part
    comes from driver metadata (sigma**2 * t) when available, else from the
    realized sum of squared non-jump grid increments.
    """

    discontinuous: CadlagPath
    continuous: CadlagPath
    total: CadlagPath
    source: Optional[CadlagPath] = None


def quadratic_variation_split(
    path: CadlagPath,
    sigma: Optional[float] = None,
    realized: bool = False,
) -> QuadraticVariationSplit:
    jt = np.array([j.time for j in path.jumps])
    jsq = np.array([j.size * j.size for j in path.jumps])
    dgrid = np.unique(np.concatenate(([0.0], jt, [path.T])))
    cums = np.concatenate(([0.0], np.cumsum(jsq)))
    dvals = cums[np.searchsorted(jt, dgrid, side="right")] if jt.size else np.zeros_like(dgrid)
    djumps = tuple(JumpRecord(t, s) for t, s in zip(jt, jsq))
    disc = CadlagPath(dgrid, dvals, djumps, STEP)

    if sigma is None and not realized:
        sigma = path.meta.get("sigma")
    if realized or sigma is None:
        incr = path.left_values[1:] - path.values[:-1]
        cvals = np.concatenate(([0.0], np.cumsum(incr * incr)))
        cont = CadlagPath(path.grid, cvals, (), LINEAR)
    else:
        cont = CadlagPath(
            np.array([0.0, path.T]),
            np.array([0.0, float(sigma) * float(sigma) * path.T]),
            (),
            LINEAR,
        )

    tgrid = np.unique(np.concatenate((disc.grid, cont.grid)))
    tvals = disc.evaluate(tgrid) + cont.evaluate(tgrid)
    total = CadlagPath(tgrid, tvals, djumps, LINEAR)
    return QuadraticVariationSplit(disc, cont, total, source=path)


# ---------------------------------------------------------------------------
# CSV serialization: columns (time, value, is_jump, jump_size)
# ---------------------------------------------------------------------------

CSV_HEADER = ["time", "value", "is_jump", "jump_size"]


def write_csv(path: CadlagPath, dest) -> None:
    """Write a path as CSV with header (time, value, is_jump, jump_size)."""
    close = False
    if isinstance(dest, (str, Path)):
        dest = open(dest, "w", newline="")
        close = True
    try:
        wr = csv.writer(dest)
        wr.writerow(CSV_HEADER)
        jsz = path.grid_jump_sizes
        for t, v, s in zip(path.grid, path.values, jsz):
            wr.writerow([repr(float(t)), repr(float(v)), int(s != 0.0), repr(float(s))])
    finally:
        if close:
            dest.close()


def read_csv(src, interpolation: str = LINEAR) -> CadlagPath:
    """Read a path written by write_csv.  Interpolation is not stored in the
    file and must be supplied (linear is correct for every path this package
    writes whose value is constant between registered jumps or continuous)."""
    close = False
    if isinstance(src, (str, Path)):
        src = open(src, "r", newline="")
        close = True
    try:
        rd = csv.reader(src)
        header = next(rd)
        if [h.strip() for h in header] != CSV_HEADER:
            raise ValueError(f"bad CSV header {header!r}, expected {CSV_HEADER}")
        grid, values, jumps = [], [], []
        for row in rd:
            if not row:
                continue
            t, v, isj, s = float(row[0]), float(row[1]), int(row[2]), float(row[3])
            grid.append(t)
            values.append(v)
            if isj:
                jumps.append(JumpRecord(t, s))
        return CadlagPath(np.array(grid), np.array(values), tuple(jumps), interpolation)
    finally:
        if close:
            src.close()


def csv_dumps(path: CadlagPath) -> str:
    buf = io.StringIO()
    write_csv(path, buf)
    return buf.getvalue()
