"""Seeded generation of driver realizations as cadlag paths.

Drivers are finite-activity jump diffusions plus deterministic test paths.
Jump times are inserted into the grid as new points, never snapped, so the
time-change plateau arithmetic downstream sees exact jump times.

Randomness layout: a RandomSeed names one stream as (master, stream index).
Inside `simulate` the stream's SeedSequence is split into two children,
child 0 driving the jump structure (Poisson count, then times, then sizes,
in that order) and child 1 the Gaussian increments.  A (spec, seed) pair
therefore reproduces a realization bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cadlag import LINEAR, STEP, CadlagPath, ConfigError, JumpRecord

_MAX_REDRAWS = 100


@dataclass(frozen=True)
class JumpLaw:
    kind: str  # "normal" or "two_point"
    params: tuple[float, ...]

    def __post_init__(self):
        if self.kind == "normal":
            _, sd = self.params
            if sd < 0:
                raise ConfigError("normal jump law needs sd >= 0")
        elif self.kind == "two_point":
            v1, p, v2 = self.params
            if not (0.0 <= p <= 1.0):
                raise ConfigError("two_point probability must be in [0, 1]")
            if v1 == 0.0 or v2 == 0.0:
                raise ConfigError("two_point values must be nonzero")
        else:
            raise ConfigError(f"unknown jump law {self.kind!r}")

    @staticmethod
    def normal(mean: float, sd: float) -> "JumpLaw":
        return JumpLaw("normal", (float(mean), float(sd)))

    @staticmethod
    def two_point(v1: float, p: float, v2: float) -> "JumpLaw":
        return JumpLaw("two_point", (float(v1), float(p), float(v2)))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "normal":
            mean, sd = self.params
            return rng.normal(mean, sd, n)
        v1, p, v2 = self.params
        return np.where(rng.random(n) < p, v1, v2)

    def mean(self) -> float:
        if self.kind == "normal":
            return self.params[0]
        v1, p, v2 = self.params
        return p * v1 + (1.0 - p) * v2

    def second_moment(self) -> float:
        if self.kind == "normal":
            mean, sd = self.params
            return mean * mean + sd * sd
        v1, p, v2 = self.params
        return p * v1 * v1 + (1.0 - p) * v2 * v2

    @staticmethod
    def from_config(d: dict) -> "JumpLaw":
        kind = d.get("kind")
        if kind == "normal":
            return JumpLaw.normal(d["mean"], d["sd"])
        if kind == "two_point":
            return JumpLaw.two_point(d["v1"], d["p"], d["v2"])
        raise ConfigError(f"unknown jump law config {d!r}")


_KINDS = ("brownian", "compound_poisson", "jump_diffusion", "single_jump", "appendix_ramp", "constant")


@dataclass(frozen=True)
class DriverSpec:
    kind: str
    T: float
    dt: float
    sigma: float = 0.0
    mu: float = 0.0
    lam: float = 0.0
    jump_law: Optional[JumpLaw] = None
    jump_time: float = 0.0
    jump_size: float = 0.0
    ramp_n: int = 0
    level: float = 0.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigError(f"unknown driver kind {self.kind!r}")
        if not (self.T > 0.0 and self.dt > 0.0):
            raise ConfigError("need T > 0 and dt > 0")
        if self.sigma < 0.0 or self.lam < 0.0:
            raise ConfigError("need sigma >= 0 and lam >= 0")
        if self.kind in ("compound_poisson", "jump_diffusion") and self.lam > 0.0 and self.jump_law is None:
            raise ConfigError(f"{self.kind} with lam > 0 needs a jump_law")
        if self.kind == "single_jump":
            if not (0.0 < self.jump_time < self.T) or self.jump_size == 0.0:
                raise ConfigError("single_jump needs 0 < t0 < T and nonzero size")
        if self.kind == "appendix_ramp":
            if self.ramp_n < 2:
                raise ConfigError("appendix_ramp needs n >= 2")
            if self.T != 1.0:
                raise ConfigError("appendix_ramp lives on [0, 1]")

    # ----------------------------------------------------------- constructors

    @staticmethod
    def brownian(sigma: float, mu: float, T: float, dt: float) -> "DriverSpec":
        return DriverSpec("brownian", T=T, dt=dt, sigma=sigma, mu=mu)

    @staticmethod
    def compound_poisson(lam: float, jump_law: JumpLaw, T: float, dt: float) -> "DriverSpec":
        return DriverSpec("compound_poisson", T=T, dt=dt, lam=lam, jump_law=jump_law)

    @staticmethod
    def jump_diffusion(sigma: float, mu: float, lam: float, jump_law: JumpLaw, T: float, dt: float) -> "DriverSpec":
        return DriverSpec("jump_diffusion", T=T, dt=dt, sigma=sigma, mu=mu, lam=lam, jump_law=jump_law)

    @staticmethod
    def single_jump(t0: float, size: float, T: float, dt: float) -> "DriverSpec":
        return DriverSpec("single_jump", T=T, dt=dt, jump_time=t0, jump_size=size)

    @staticmethod
    def appendix_ramp(n: int, dt: Optional[float] = None) -> "DriverSpec":
        if dt is None:
            dt = 1.0 / (32.0 * n)
        return DriverSpec("appendix_ramp", T=1.0, dt=dt, ramp_n=int(n))

    @staticmethod
    def constant(c: float, T: float, dt: float) -> "DriverSpec":
        return DriverSpec("constant", T=T, dt=dt, level=c)

    @staticmethod
    def from_config(d: dict, T: float, dt: float) -> "DriverSpec":
        kind = d.get("kind")
        if kind == "brownian":
            return DriverSpec.brownian(d.get("sigma", 0.0), d.get("mu", 0.0), T, dt)
        if kind == "compound_poisson":
            return DriverSpec.compound_poisson(d["lam"], JumpLaw.from_config(d["jump_law"]), T, dt)
        if kind == "jump_diffusion":
            return DriverSpec.jump_diffusion(
                d.get("sigma", 0.0), d.get("mu", 0.0), d["lam"], JumpLaw.from_config(d["jump_law"]), T, dt
            )
        if kind == "single_jump":
            return DriverSpec.single_jump(d["t0"], d["size"], T, dt)
        if kind == "appendix_ramp":
            return DriverSpec.appendix_ramp(d["n"], dt)
        if kind == "constant":
            return DriverSpec.constant(d["c"], T, dt)
        raise ConfigError(f"unknown driver config {d!r}")


@dataclass(frozen=True)
class RandomSeed:
    """One reproducible stream: (master seed, stream index)."""

    master: int
    stream: int = 0

    def __post_init__(self):
        if self.stream < 0:
            raise ConfigError("stream index must be nonnegative")

    def seed_sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(self.master, spawn_key=(self.stream,))

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed_sequence())


def _uniform_grid(T: float, dt: float) -> np.ndarray:
    n = max(int(round(T / dt)), 1)
    return np.linspace(0.0, T, n + 1)


def _draw_jumps(rng: np.random.Generator, lam: float, T: float, law: JumpLaw):
    """Poisson(lam*T) count, then uniform times, then sizes; redraw on the
    measure-zero degeneracies (ties, boundary times, zero sizes)."""
    for _ in range(_MAX_REDRAWS):
        k = int(rng.poisson(lam * T))
        times = np.sort(rng.uniform(0.0, T, k))
        sizes = law.sample(rng, k)
        if k == 0:
            return times, sizes
        ok = (
            np.all(times > 0.0)
            and np.all(times < T)
            and np.all(np.diff(times) > 0.0)
            and np.all(sizes != 0.0)
        )
        if ok:
            return times, sizes
    raise RuntimeError("could not draw a nondegenerate jump configuration")


def _jump_cum(jt: np.ndarray, sizes: np.ndarray, grid: np.ndarray) -> np.ndarray:
    cums = np.concatenate(([0.0], np.cumsum(sizes)))
    return cums[np.searchsorted(jt, grid, side="right")]


def simulate(spec: DriverSpec, seed: RandomSeed) -> CadlagPath:
    """One driver realization; pure function of (spec, seed)."""
    T, dt = spec.T, spec.dt
    ugrid = _uniform_grid(T, dt)

    if spec.kind == "constant":
        return CadlagPath(ugrid, np.full_like(ugrid, spec.level), (), LINEAR, meta={"sigma": 0.0})

    if spec.kind == "appendix_ramp":
        return _appendix_ramp(spec.ramp_n, dt)

    if spec.kind == "single_jump":
        grid = np.unique(np.concatenate((ugrid, [spec.jump_time])))
        values = np.where(grid >= spec.jump_time, spec.jump_size, 0.0)
        jumps = (JumpRecord(spec.jump_time, spec.jump_size),)
        return CadlagPath(grid, values, jumps, STEP, meta={"sigma": 0.0})

    children = seed.seed_sequence().spawn(2)
    rng_jumps = np.random.default_rng(children[0])
    rng_gauss = np.random.default_rng(children[1])

    if spec.kind == "compound_poisson":
        jt, sizes = _draw_jumps(rng_jumps, spec.lam, T, spec.jump_law) if spec.lam > 0 else (np.empty(0), np.empty(0))
        grid = np.unique(np.concatenate((ugrid, jt)))
        values = _jump_cum(jt, sizes, grid)
        jumps = tuple(JumpRecord(t, s) for t, s in zip(jt, sizes))
        return CadlagPath(grid, values, jumps, STEP, meta={"sigma": 0.0})

    if spec.kind == "brownian":
        incr = rng_gauss.normal(0.0, 1.0, ugrid.size - 1) * (spec.sigma * np.sqrt(np.diff(ugrid)))
        w = np.concatenate(([0.0], np.cumsum(incr)))
        values = spec.mu * ugrid + w
        return CadlagPath(ugrid, values, (), LINEAR, meta={"sigma": spec.sigma})

    # jump_diffusion
    jt, sizes = _draw_jumps(rng_jumps, spec.lam, T, spec.jump_law) if spec.lam > 0 else (np.empty(0), np.empty(0))
    grid = np.unique(np.concatenate((ugrid, jt)))
    incr = rng_gauss.normal(0.0, 1.0, grid.size - 1) * (spec.sigma * np.sqrt(np.diff(grid)))
    w = np.concatenate(([0.0], np.cumsum(incr)))
    values = spec.mu * grid + w + _jump_cum(jt, sizes, grid)
    jumps = tuple(JumpRecord(t, s) for t, s in zip(jt, sizes))
    return CadlagPath(grid, values, jumps, LINEAR, meta={"sigma": spec.sigma})


def _appendix_ramp(n: int, dt: float) -> CadlagPath:
    lo = 0.5 - 1.0 / n
    anchors_t = [0.0, lo, 0.5, 1.0] if lo > 0.0 else [0.0, 0.5, 1.0]
    anchors_v = [0.0, 0.0, 1.0, 1.0] if lo > 0.0 else [0.0, 1.0, 1.0]
    grid = np.unique(np.concatenate((_uniform_grid(1.0, dt), anchors_t)))
    values = np.interp(grid, anchors_t, anchors_v)
    return CadlagPath(grid, values, (), LINEAR, meta={"sigma": 0.0})


def appendix_pair(n: int, dt: Optional[float] = None) -> tuple[CadlagPath, CadlagPath]:
    """The continuous ramp x^n rising over [1/2 - 1/n, 1/2] and the unit
    indicator step at 1/2, both on [0, 1].  The ramp is the continuous
    polyline through (0,0), (1/2 - 1/n, 0), (1/2, 1), (1, 1)."""
    if n < 2:
        raise ConfigError("appendix pair needs n >= 2")
    if dt is None:
        dt = 1.0 / (32.0 * n)
    ramp = _appendix_ramp(n, dt)
    grid = np.unique(np.concatenate((_uniform_grid(1.0, dt), [0.5])))
    values = np.where(grid >= 0.5, 1.0, 0.0)
    step = CadlagPath(grid, values, (JumpRecord(0.5, 1.0),), STEP, meta={"sigma": 0.0})
    return ramp, step
