"""Experiment orchestration and CLI.

Coupled Monte Carlo studies: within one replication a single driver
realization feeds the canonical (Marcus) solution once and the smoothed-ODE
solution at every window in the ladder, so all rows of a replication are
pathwise coupled.  All randomness flows from the master seed through one
stream per (replication, role) pair; outputs are plain CSV/JSON written with
round-trip float reprs, so identical configs and seeds give byte-identical
files.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys as _sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import skorokhod, timechange
from .cadlag import (
    LINEAR,
    CadlagPath,
    ConfigError,
    quadratic_variation_split,
    read_csv,
    write_csv,
)
from .drivers import DriverSpec, RandomSeed, simulate
from .skorokhod import d_j1, d_m1, w_prime
from .smoothing import smooth
from .solvers import (
    CoefficientSet,
    SolverConfig,
    SolverDivergenceError,
    coefficient_family,
    marcus_flow,
    solve_marcus,
    solve_random_ode,
    y_eps_and_residual,
)
from .timechange import build, sandwich_margin, step1_gap, z_eps, z_limit

N_STREAM_ROLES = 4
ROLE_DRIVER = 0

DEFAULT_SEED = 12345
KS_BAND_COEFF = 1.3581015157406195  # sqrt(-log(0.025) / 2), two-sample 95%


# ---------------------------------------------------------------------------
# Config
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    driver: DriverSpec
    coeffs: CoefficientSet
    x0: float
    epsilons: tuple[float, ...]
    replications: int
    master_seed: int
    horizon: float
    dt: float
    metric_m: int = 128
    passage_a: float = 0.5

    def __post_init__(self):
        if not all(e2 < e1 for e1, e2 in zip(self.epsilons, self.epsilons[1:])):
            raise ConfigError("epsilon ladder must be strictly decreasing")
        if not all(e > 0 for e in self.epsilons):
            raise ConfigError("epsilons must be positive")
        if self.replications < 1:
            raise ConfigError("need at least one replication")
        if not self.passage_a > 0:
            raise ConfigError("passage level a must be > 0")
        if self.metric_m < 8:
            raise ConfigError("metric resolution must be >= 8")

    @staticmethod
    def from_dict(d: dict, seed: Optional[int] = None) -> "ExperimentConfig":
        horizon = float(d["horizon"])
        dt = float(d["dt"])
        master = seed if seed is not None else int(d.get("seed", DEFAULT_SEED))
        return ExperimentConfig(
            driver=DriverSpec.from_config(d["driver"], horizon, dt),
            coeffs=CoefficientSet.from_config(d["coefficients"]),
            x0=float(d["x0"]),
            epsilons=tuple(float(e) for e in d["epsilons"]),
            replications=int(d["replications"]),
            master_seed=master,
            horizon=horizon,
            dt=dt,
            metric_m=int(d.get("metric_m", 128)),
            passage_a=float(d.get("passage_a", 0.5)),
        )

    @staticmethod
    def from_file(path, seed: Optional[int] = None) -> "ExperimentConfig":
        with open(path) as fh:
            return ExperimentConfig.from_dict(json.load(fh), seed=seed)


def driver_seed(cfg: ExperimentConfig, rep: int) -> RandomSeed:
    return RandomSeed(cfg.master_seed, rep * N_STREAM_ROLES + ROLE_DRIVER)


def realization_hash(path: CadlagPath) -> str:
    h = hashlib.sha256()
    h.update(path.grid.tobytes())
    h.update(path.values.tobytes())
    h.update(np.array([(j.time, j.size) for j in path.jumps], dtype=float).tobytes())
    h.update(path.interpolation.encode())
    return h.hexdigest()[:16]


# ---------------------------------------------------------------------------
# Records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceRecord:
    rep: int
    eps: float
    d_m1: float
    d_m1_lo: float
    d_m1_hi: float
    z_gap: float
    sandwich_margin: float
    residual31: float
    realization_hash: str


@dataclass(frozen=True)
class PassageRecord:
    rep: int
    eps: object  # float or "limit"
    tau: Optional[float]


@dataclass(frozen=True, eq=False)
class ConvergenceResult:
    records: list[ConvergenceRecord]
    medians: dict[float, float]


@dataclass(frozen=True, eq=False)
class SpecialCaseResult:
    records: list[ConvergenceRecord]
    monotone: list[bool]

    @property
    def fraction_monotone(self) -> float:
        return sum(self.monotone) / len(self.monotone)


@dataclass(frozen=True, eq=False)
class PassageResult:
    records: list[PassageRecord]
    ks: dict[float, float]
    band95: dict[float, float]


# ---------------------------------------------------------------------------
# Convergence study
# ---------------------------------------------------------------------------


def _nan_record(rep: int, eps: float, rhash: str) -> ConvergenceRecord:
    nan = float("nan")
    return ConvergenceRecord(rep, eps, nan, nan, nan, nan, nan, nan, rhash)


def _convergence_rep(cfg: ExperimentConfig, rep: int) -> list[ConvergenceRecord]:
    L = simulate(cfg.driver, driver_seed(cfg, rep))
    qv = quadratic_variation_split(L)
    scfg = SolverConfig(x0=cfg.x0, h=cfg.dt)
    rhash = realization_hash(L)
    try:
        X = solve_marcus(cfg.coeffs, L, scfg, qv=qv)
    except SolverDivergenceError:
        return [_nan_record(rep, eps, rhash) for eps in cfg.epsilons]
    sys0 = build(qv, L.jumps, 0.0)
    z0 = z_limit(L, sys0)
    out = []
    for eps in cfg.epsilons:
        try:
            sp = smooth(L, eps)
            xe = solve_random_ode(cfg.coeffs, sp, scfg)
            syse = build(qv, L.jumps, eps)
            ze = z_eps(sp, syse)
            zgap = step1_gap(L, sp, syse, z_ref=z0)
            margin = sandwich_margin(syse, L.grid)
            _, resid = y_eps_and_residual(xe, syse, ze, cfg.coeffs)
            dm = d_m1(xe, X, cfg.metric_m)
            out.append(
                ConvergenceRecord(rep, eps, dm.value, dm.lower, dm.upper, zgap, margin, resid, rhash)
            )
        except SolverDivergenceError:
            out.append(_nan_record(rep, eps, rhash))
    return out


def run_convergence(cfg: ExperimentConfig, workers: int = 1) -> ConvergenceResult:
    records: list[ConvergenceRecord] = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for rows in pool.map(_convergence_rep, [cfg] * cfg.replications, range(cfg.replications), chunksize=4):
                records.extend(rows)
    else:
        for rep in range(cfg.replications):
            records.extend(_convergence_rep(cfg, rep))
    medians = {}
    for eps in cfg.epsilons:
        vals = [r.d_m1 for r in records if r.eps == eps and np.isfinite(r.d_m1)]
        medians[eps] = float(np.median(vals)) if vals else float("nan")
    return ConvergenceResult(records, medians)


def run_special_case(cfg: ExperimentConfig, workers: int = 1) -> SpecialCaseResult:
    """Driver-only special case: coefficients forced to b = 0, f = 1, x0 = 0,
    where the smoothed solution is the smoothed driver itself; reports whether
    d_m1(smoothed, driver) is nonincreasing along the ladder within the
    certified metric slack, per path."""
    records: list[ConvergenceRecord] = []
    monotone: list[bool] = []
    for rep in range(cfg.replications):
        L = simulate(cfg.driver, driver_seed(cfg, rep))
        rhash = realization_hash(L)
        row = []
        for eps in cfg.epsilons:
            sp = smooth(L, eps)
            dm = d_m1(sp.to_cadlag(), L, cfg.metric_m)
            nan = float("nan")
            row.append(ConvergenceRecord(rep, eps, dm.value, dm.lower, dm.upper, nan, nan, nan, rhash))
        ok = True
        for a, b in zip(row, row[1:]):
            slack = (a.d_m1_hi - a.d_m1_lo) + (b.d_m1_hi - b.d_m1_lo)
            if b.d_m1 > a.d_m1 + slack:
                ok = False
        records.extend(row)
        monotone.append(ok)
    return SpecialCaseResult(records, monotone)


# ---------------------------------------------------------------------------
# First passage study
# ---------------------------------------------------------------------------


def ks_distance(a: Sequence[Optional[float]], b: Sequence[Optional[float]]) -> float:
    """Two-sample Kolmogorov-Smirnov distance with None treated as +infinity
    (mass beyond every finite threshold)."""
    na, nb = len(a), len(b)
    if na == 0 or nb == 0:
        raise ValueError("need nonempty samples")
    fa = np.sort([v for v in a if v is not None])
    fb = np.sort([v for v in b if v is not None])
    thresholds = np.unique(np.concatenate((fa, fb)))
    if thresholds.size == 0:
        return 0.0
    ca = np.searchsorted(fa, thresholds, side="right") / na
    cb = np.searchsorted(fb, thresholds, side="right") / nb
    return float(np.max(np.abs(ca - cb)))


def ks_band95(n1: int, n2: int) -> float:
    return KS_BAND_COEFF * float(np.sqrt((n1 + n2) / (n1 * n2)))


def _passage_rep(cfg: ExperimentConfig, rep: int):
    L = simulate(cfg.driver, driver_seed(cfg, rep))
    qv = quadratic_variation_split(L)
    scfg = SolverConfig(x0=cfg.x0, h=cfg.dt)
    taus: dict[object, Optional[float]] = {}
    try:
        X = solve_marcus(cfg.coeffs, L, scfg, qv=qv)
        taus["limit"] = X.first_passage(cfg.passage_a)
    except SolverDivergenceError:
        taus["limit"] = None
    for eps in cfg.epsilons:
        try:
            xe = solve_random_ode(cfg.coeffs, smooth(L, eps), scfg)
            taus[eps] = xe.first_passage(cfg.passage_a)
        except SolverDivergenceError:
            taus[eps] = None
    return taus


def run_passage(cfg: ExperimentConfig, workers: int = 1) -> PassageResult:
    rows = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_passage_rep, [cfg] * cfg.replications, range(cfg.replications), chunksize=8))
    else:
        rows = [_passage_rep(cfg, rep) for rep in range(cfg.replications)]
    records: list[PassageRecord] = []
    for rep, taus in enumerate(rows):
        records.append(PassageRecord(rep, "limit", taus["limit"]))
        for eps in cfg.epsilons:
            records.append(PassageRecord(rep, eps, taus[eps]))
    ref = [taus["limit"] for taus in rows]
    ks = {}
    band = {}
    for eps in cfg.epsilons:
        sample = [taus[eps] for taus in rows]
        ks[eps] = ks_distance(sample, ref)
        band[eps] = ks_band95(len(sample), len(ref))
    return PassageResult(records, ks, band)


# ---------------------------------------------------------------------------
# Output writers (deterministic: repr round-trip floats)
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_convergence(result: ConvergenceResult, outdir) -> None:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    cols = ["rep", "eps", "d_m1", "d_m1_lo", "d_m1_hi", "z_gap", "sandwich_margin", "residual31", "realization_hash"]
    lines = [",".join(cols)]
    for r in result.records:
        lines.append(",".join(_fmt(v) for v in (
            r.rep, r.eps, r.d_m1, r.d_m1_lo, r.d_m1_hi, r.z_gap, r.sandwich_margin, r.residual31, r.realization_hash
        )))
    (outdir / "convergence.csv").write_text("\n".join(lines) + "\n")
    summary = {"median_d_m1": {repr(eps): med for eps, med in result.medians.items()}}
    (outdir / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")


def write_special(result: SpecialCaseResult, outdir) -> None:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    cols = ["rep", "eps", "d_m1", "d_m1_lo", "d_m1_hi", "realization_hash"]
    lines = [",".join(cols)]
    for r in result.records:
        lines.append(",".join(_fmt(v) for v in (r.rep, r.eps, r.d_m1, r.d_m1_lo, r.d_m1_hi, r.realization_hash)))
    (outdir / "special.csv").write_text("\n".join(lines) + "\n")
    report = {"fraction_monotone": result.fraction_monotone, "n_seeds": len(result.monotone)}
    (outdir / "special_report.json").write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")


def write_passage(result: PassageResult, outdir) -> None:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    lines = ["rep,eps,tau"]
    for r in result.records:
        lines.append(",".join((_fmt(r.rep), _fmt(r.eps), _fmt(r.tau))))
    (outdir / "passage.csv").write_text("\n".join(lines) + "\n")
    klines = ["eps,ks"]
    for eps, k in result.ks.items():
        klines.append(f"{_fmt(eps)},{_fmt(k)}")
    (outdir / "ks.csv").write_text("\n".join(klines) + "\n")
    summary = {
        "ks": {repr(e): k for e, k in result.ks.items()},
        "band95": {repr(e): b for e, b in result.band95.items()},
    }
    (outdir / "ks_summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")


# ---------------------------------------------------------------------------
# Self-check
# ---------------------------------------------------------------------------


def selfcheck(inject_fault: Optional[str] = None) -> tuple[bool, list[str]]:
    """Run the invariant suite on deterministic fixtures.  Returns overall
    pass flag and one report line per check.  `inject_fault="plateau_width"`
    deliberately corrupts a plateau record to exercise the checker."""
    from .drivers import appendix_pair

    lines: list[str] = []
    ok_all = True

    def check(name: str, ok: bool, detail: str = "") -> None:
        nonlocal ok_all
        ok_all &= ok
        tag = "PASS" if ok else "FAIL"
        lines.append(f"{tag} {name}" + (f": {detail}" if detail else ""))

    spec = DriverSpec.single_jump(1.0, 1.0, T=2.0, dt=0.01)
    L = simulate(spec, RandomSeed(0))
    qv = quadratic_variation_split(L)
    eps = 0.2
    sysE = build(qv, L.jumps, eps)
    ts = L.grid

    margin = sandwich_margin(sysE, ts)
    check("clock and inverse sandwiches", margin >= -1e-12, f"min margin {margin:.3g}")

    ident = np.max(np.abs(sysE.zeta0(sysE.gamma0.evaluate(ts)) - ts))
    check("zeta0(gamma0(t)) = t", ident <= 1e-12, f"max defect {ident:.3g}")

    z0 = z_limit(L, sysE)
    comp = np.max(np.abs(np.interp(sysE.gamma0.evaluate(ts), z0.grid, z0.values) - L.values))
    check("Z(gamma0(t)) = L(t)", comp <= 1e-12, f"max defect {comp:.3g}")

    plats = list(sysE.plateaus)
    if inject_fault == "plateau_width":
        p = plats[0]
        plats[0] = timechange.PlateauRecord(p.time, p.lo, p.hi, p.width + 0.1, p.driver_jump)
    bad = max(abs((p.hi - p.lo) - p.width) for p in plats) if plats else 0.0
    wid = max(abs(p.width - p.driver_jump ** 2) for p in plats) if plats else 0.0
    ok_plat = max(bad, wid) <= 1e-12
    check("plateau width = |dL|^2", ok_plat,
          "" if ok_plat else f"plateau width != |dL|^2 by {max(bad, wid):.3g}")

    ge = sysE.gamma_eps
    from .smoothing import v_eps as _v_eps
    ve = _v_eps(qv, eps)
    mask = ts >= eps
    gap = np.max(np.abs(ge.evaluate(ts[mask]) - (ve.evaluate(ts[mask]) + ts[mask] - eps / 2.0)))
    check("gamma_eps = V_eps + t - eps/2", gap <= 1e-12, f"max defect {gap:.3g}")

    f_lin = coefficient_family("linear", 1.0)
    flow0 = marcus_flow(f_lin, 0.0, 0.7, 32)
    flow1 = marcus_flow(f_lin, float(np.log(2.0)), 1.0, 64)
    # RK4's leading error here is exactly c^5 * y / (120 K^4) ~ 1.6e-10
    check("jump flow identities", flow0 == 0.7 and abs(flow1 - 2.0) <= 2e-10,
          f"flow(0)={flow0}, flow(ln 2)={flow1}")

    ramp, step = appendix_pair(8)
    d_same = d_m1(step, step, 64)
    d_sep = d_m1(ramp, step, 512)
    check("metric identity and separation",
          d_same.value == 0.0 and d_sep.value <= 2.0 / 8.0,
          f"d(x,x)={d_same.value}, d(ramp,step)={d_sep.value:.4g}")

    mono = w_prime(sysE.gamma0, 0.1)
    spike = CadlagPath(np.array([0.0, 0.01, 0.02, 1.0]), np.array([0.0, 1.0, 0.0, 0.0]), (), LINEAR)
    wsp = w_prime(spike, 0.05)
    check("oscillation functional", mono == 0.0 and abs(wsp - 1.0) <= 1e-12,
          f"monotone {mono}, spike {wsp}")

    sp = smooth(L, eps)
    checks = (
        abs(sp.evaluate(1.1) - 0.5) <= 1e-12
        and abs(sp.derivative(1.1) - 5.0) <= 1e-12
    )
    check("smoothing closed forms", checks, "window average of the unit jump")

    return ok_all, lines


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wzlab", description="Smoothing/time-change laboratory for jump-driven equations")
    p.add_argument("--config", type=str, default=None, help="JSON experiment config")
    p.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
    p.add_argument("--out", type=str, default="out", help="output directory")
    p.add_argument("--workers", type=int, default=1, help="replication worker processes")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("simulate", help="write one driver realization as CSV")
    sp = sub.add_parser("smooth", help="write a window-averaged driver as CSV")
    sp.add_argument("--eps", type=float, default=None, help="window (default: first ladder rung)")
    sub.add_parser("converge", help="coupled convergence study")
    sub.add_parser("special", help="driver-only special case study")
    sub.add_parser("passage", help="first-passage study with KS distances")

    mp = sub.add_parser("metric", help="distances between two path CSV files")
    mp.add_argument("csv_x")
    mp.add_argument("csv_y")
    mp.add_argument("--m1", action="store_true")
    mp.add_argument("--j1", action="store_true")
    mp.add_argument("--wprime", action="store_true")
    mp.add_argument("--resolution", type=int, default=256)
    mp.add_argument("--delta", type=float, default=0.1)
    mp.add_argument("--interpolation", choices=["step", "linear"], default="linear")

    cp = sub.add_parser("selfcheck", help="run the invariant suite")
    cp.add_argument("--inject-fault", default=None, help="test mode: corrupt a named invariant")
    return p


def _need_config(args) -> ExperimentConfig:
    if not args.config:
        raise ConfigError("this subcommand needs --config")
    return ExperimentConfig.from_file(args.config, seed=args.seed)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    out = Path(args.out)

    if args.command == "selfcheck":
        ok, lines = selfcheck(inject_fault=args.inject_fault)
        print("\n".join(lines))
        return 0 if ok else 1

    if args.command == "metric":
        x = read_csv(args.csv_x, interpolation=args.interpolation)
        y = read_csv(args.csv_y, interpolation=args.interpolation)
        print("metric,reported,lower,upper")
        if args.m1:
            r = d_m1(x, y, args.resolution)
            print(f"m1,{r.value!r},{r.lower!r},{r.upper!r}")
        if args.j1:
            r = d_j1(x, y, args.resolution)
            print(f"j1,{r.value!r},{r.lower!r},{r.upper!r}")
        if args.wprime:
            wx = w_prime(x, args.delta)
            wy = w_prime(y, args.delta)
            print(f"wprime_x,{wx!r},{wx!r},{wx!r}")
            print(f"wprime_y,{wy!r},{wy!r},{wy!r}")
        return 0

    cfg = _need_config(args)

    if args.command == "simulate":
        L = simulate(cfg.driver, driver_seed(cfg, 0))
        out.mkdir(parents=True, exist_ok=True)
        write_csv(L, out / "driver.csv")
        print(f"wrote {out / 'driver.csv'} ({L.grid.size} points, {len(L.jumps)} jumps, hash {realization_hash(L)})")
        return 0

    if args.command == "smooth":
        eps = args.eps if args.eps is not None else cfg.epsilons[0]
        L = simulate(cfg.driver, driver_seed(cfg, 0))
        sp = smooth(L, eps)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(sp.to_cadlag(), out / "smoothed.csv")
        print(f"wrote {out / 'smoothed.csv'} (eps {eps})")
        return 0

    if args.command == "converge":
        res = run_convergence(cfg, workers=args.workers)
        write_convergence(res, out)
        print(f"wrote {out / 'convergence.csv'}; median d_m1 per eps: "
              + ", ".join(f"{e}={m:.4g}" for e, m in res.medians.items()))
        return 0

    if args.command == "special":
        res = run_special_case(cfg, workers=args.workers)
        write_special(res, out)
        print(f"wrote {out / 'special.csv'}; monotone fraction {res.fraction_monotone:.3f}")
        return 0

    if args.command == "passage":
        res = run_passage(cfg, workers=args.workers)
        write_passage(res, out)
        print(f"wrote {out / 'passage.csv'}; KS per eps: "
              + ", ".join(f"{e}={k:.4g}" for e, k in res.ks.items()))
        return 0

    raise AssertionError("unreachable")


if __name__ == "__main__":
    raise SystemExit(main())
