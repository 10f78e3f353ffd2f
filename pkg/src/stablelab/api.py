"""
Study runners.

``run_study`` builds the domain, process and reference frame of a validated
:class:`~stablelab.config.ExperimentConfig`, runs one study and writes its
report bundle: CSV tables, ``fit.json`` and ``manifest.json``. Every study
draws its randomness from children of the config seed, so a rerun with the
same config writes the same CSV bodies for any worker count.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from stablelab.config import ExperimentConfig
from stablelab.core.geometry import (
    Ball,
    DomainSpec,
    ReferenceFrame,
    _norm,
    build_frame,
    kfat_certify,
    sample_interior,
)
from stablelab.core.green import BallGreenOracle, GreenEvaluator, MonteCarloGreen, TabulatedGreen
from stablelab.core.io.io_utils import write_csv, write_green_table, write_json, write_manifest
from stablelab.core.kernels import (
    StableParams,
    ball_exit_radial_cdf,
    ball_green,
    ball_harmonic_measure,
    default_c0,
    riesz_constant,
    poisson_mass_from_center,
)
from stablelab.core.relativistic import (
    fit_quadratic_bound,
    levy_density_relativistic,
    psi,
    psi_closed,
    q_m_profile,
)
from stablelab.core.rng import make_generator, spawn_sequences
from stablelab.core.wos import estimate_green, exit_histogram, sample_ball_exit
from stablelab.decorators import profile_execution
from stablelab.exceptions import AcceptanceError, ConfigError, StableLabError, YoungExponentError
from stablelab.lab.conditions_c import check_C1, check_C2, check_C3, check_C4
from stablelab.lab.inequality_lab import (
    DEFAULT_DELTAS,
    counterexample_sweep,
    fit_3g,
    fit_classical_3g,
    growth_check,
    intermediate_bound_check,
    carleson_check,
)
from stablelab.lab.kato import (
    YOUNG_CASES,
    PerturbationSpec,
    gauge_sup_scan,
    q_m_density,
    s_infty_integral,
    select_young_exponents,
)
from stablelab.lab.sampling import STABILITY_RTOL, FitReport, sample_tuples

logger = logging.getLogger(__name__)

KS_LEVEL = 0.01
POISSON_ATOL = 1e-8
GREEN_RTOL = 0.05
GREEN_STDERR_MULTIPLE = 3.0
GREEN_MIN_CONSISTENT = 0.9
GROWTH_MARGIN = 0.01
RELATIVISTIC_MIN_R2 = 0.99


@dataclass
class StudyResult:
    """What a study hands back before anything is written."""

    tables: Dict[str, pd.DataFrame] = field(default_factory=dict)
    fits: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    curves: Dict[str, pd.DataFrame] = field(default_factory=dict)
    accepted: bool = True
    extra: Dict[str, Any] = field(default_factory=dict)

    def add_report(self, name: str, report: FitReport, keep_table: bool = True) -> None:
        self.fits[name] = report.summary()
        self.curves[name] = report.stability_curve
        if keep_table and report.table is not None:
            self.tables[name] = report.table
        self.accepted &= report.accepted


@dataclass
class StudyContext:
    cfg: ExperimentConfig
    domain: DomainSpec
    params: StableParams
    frame: ReferenceFrame

    @property
    def n(self) -> int:
        return self.cfg.n_samples

    @property
    def sampling(self) -> Dict[str, Any]:
        s = self.cfg.sampling
        return {"uniform_frac": s.uniform_frac, "levels": tuple(s.shell_levels)}

    def streams(self, k: int) -> List[np.random.SeedSequence]:
        return spawn_sequences(self.cfg.seed, k)

    def ball(self, study: str) -> Ball:
        if not isinstance(self.domain, Ball):
            raise ConfigError([("domain.shape", f"the {study} study needs a ball")])
        return self.domain


@dataclass
class RunOutcome:
    out_dir: Path
    manifest: Path
    result: StudyResult
    walltime: float


STUDIES: Dict[str, Callable[[StudyContext], StudyResult]] = {}


def study(name: str):
    def register(fn):
        STUDIES[name] = fn
        return fn
    return register


def make_green(ctx: StudyContext, seed=None) -> GreenEvaluator:
    """
    Green evaluator chosen by ``study_options.green``: ``auto`` (the oracle
    on balls, walk-on-spheres otherwise), ``oracle``, ``mc`` or a path to a
    tabulated ``x..,y..,g,g_err`` file.
    """
    choice = ctx.cfg.option("green", "auto")
    p, D = ctx.params, ctx.domain
    if choice == "auto":
        choice = "oracle" if isinstance(D, Ball) else "mc"
    if choice == "oracle":
        return BallGreenOracle(p, ctx.ball("oracle"))
    if choice == "mc":
        return MonteCarloGreen(
            p,
            D,
            n=int(ctx.cfg.option("green_walks", 2000)),
            seed=int(ctx.cfg.seed if seed is None else seed),
            workers=ctx.cfg.workers,
        )
    path = Path(str(choice))
    if not path.exists():
        raise ConfigError([("study_options.green", f"expected auto, oracle, mc or an existing table path, got {choice!r}")])
    return TabulatedGreen.from_file(p, D, path, k=int(ctx.cfg.option("table_neighbours", 4)))


def _frame(cfg: ExperimentConfig, D: DomainSpec, p: StableParams) -> ReferenceFrame:
    frame = build_frame(D, cfg.kfat.chars, x0=cfg.frame.x0, z0=cfg.frame.z0, resolution=cfg.frame.resolution)
    return frame.with_green_constant(p.d, p.alpha, default_c0(p))


# -- studies ---------------------------------------------------------------


@study("certify")
def _certify(ctx: StudyContext) -> StudyResult:
    report = kfat_certify(
        ctx.domain,
        ctx.cfg.kfat.chars,
        n_boundary=int(ctx.cfg.option("n_boundary", 32)),
        n_radii=int(ctx.cfg.option("n_radii", 8)),
        rng=make_generator(ctx.streams(1)[0]),
        n_ball_points=int(ctx.cfg.option("n_ball_points", 10_000)),
    )
    fit = {"kappa": ctx.cfg.kfat.kappa, "R": ctx.cfg.kfat.R, "kappa_max": report.kappa_max,
           "failures": int(len(report.failures)), "accepted": report.passed}
    return StudyResult(tables={"checks": report.checks}, fits={"kfat": fit}, accepted=report.passed)


@study("sample-exit")
def _sample_exit(ctx: StudyContext) -> StudyResult:
    """Exit radii from the center against the closed-form law, and the Poisson mass."""
    ball, p = ctx.ball("sample-exit"), ctx.params
    s_exit, s_hist = ctx.streams(2)
    pts = sample_ball_exit(p, ball.c, ball.radius, make_generator(s_exit), size=ctx.n)
    radii = _norm(pts - ball.c) / ball.radius
    ks = stats.kstest(radii, lambda s: ball_exit_radial_cdf(p, 1.0, s))
    mass = poisson_mass_from_center(p, ball.radius)
    ks_ok = bool(ks.pvalue >= KS_LEVEL)
    mass_ok = bool(abs(mass - 1.0) <= POISSON_ATOL)
    if not ks_ok:
        logger.warning("exit radii rejected by KS: D=%.4g p=%.4g", ks.statistic, ks.pvalue)
    res = StudyResult(
        tables={"exit_radii": pd.DataFrame({"radius": radii})},
        fits={
            "exit_law": {"ks_statistic": float(ks.statistic), "p_value": float(ks.pvalue),
                         "n_samples": ctx.n, "accepted": ks_ok},
            "poisson_mass": {"mass": mass, "deviation": abs(mass - 1.0), "accepted": mass_ok},
        },
        accepted=ks_ok and mass_ok,
    )
    start = ctx.cfg.option("start")
    if start is not None:
        x = np.asarray(start, dtype=float)
        edges = ball.radius * np.array([1.0, 1.1, 1.25, 1.5, 2.0, 4.0, np.inf])
        exact = ball_harmonic_measure(p, ball.c, ball.radius, x, edges)
        empirical = exit_histogram(p, ball, x, ctx.n, edges, ball.c, s_hist)
        res.tables["harmonic_measure"] = pd.DataFrame(
            {"lo": edges[:-1], "hi": edges[1:], "exact": exact, "empirical": empirical}
        )
    return res


@study("green")
def _green(ctx: StudyContext) -> StudyResult:
    """Walk-on-spheres Green estimates at interior pairs; compared with the oracle on balls."""
    p, D = ctx.params, ctx.domain
    s_pairs, s_walks = ctx.streams(2)
    n_pairs = int(ctx.cfg.option("n_pairs", 10))
    gen = make_generator(s_pairs)
    x = sample_interior(D, n_pairs, gen)
    y = sample_interior(D, n_pairs, gen)
    results = [
        estimate_green(p, D, u, v, ctx.n, ss, workers=ctx.cfg.workers)
        for u, v, ss in zip(x, y, s_walks.spawn(n_pairs))
    ]
    g = np.array([r.value for r in results])
    g_err = np.array([r.stderr for r in results])
    res = StudyResult()
    frame = pd.DataFrame({"g": g, "g_err": g_err,
                          "n_truncated": [r.extras.get("n_truncated", 0) for r in results],
                          "mean_steps": [r.extras.get("mean_steps", np.nan) for r in results]})
    if isinstance(D, Ball):
        exact = np.atleast_1d(ball_green(p, D.radius, x, y, center=D.c))
        rel = np.abs(g - exact) / exact
        consistent = np.abs(g - exact) <= GREEN_STDERR_MULTIPLE * g_err
        frame = frame.assign(exact=exact, rel_error=rel, within_3_stderr=consistent)
        ok = bool(np.all(rel <= GREEN_RTOL)) and consistent.mean() >= GREEN_MIN_CONSISTENT
        res.fits["oracle_agreement"] = {"max_rel_error": float(rel.max()),
                                        "consistent_pairs": int(consistent.sum()),
                                        "n_pairs": n_pairs, "accepted": ok}
        res.accepted = ok
    res.tables["pairs"] = frame
    res.extra["green_table"] = (x, y, g, g_err)
    return res


@study("threeg")
def _threeg(ctx: StudyContext) -> StudyResult:
    s_green, s_fit, s_classical, s_mid = ctx.streams(4)
    green = make_green(ctx, s_green.generate_state(1)[0])
    res = StudyResult()
    fit = fit_3g(green, ctx.domain, ctx.frame, ctx.n, ctx.cfg.gamma_grid, seed=s_fit, **ctx.sampling)
    res.add_report("threeg", fit, keep_table=False)
    res.tables["ratios"] = fit.table
    res.add_report("classical", fit_classical_3g(green, ctx.domain, ctx.n, seed=s_classical, **ctx.sampling),
                   keep_table=False)
    if ctx.cfg.option("intermediate", False):
        gamma = fit.gamma_hat if fit.gamma_hat is not None else ctx.params.alpha / 2
        tuples = sample_tuples(ctx.domain, int(ctx.cfg.option("n_intermediate", ctx.n)), 4, s_mid, **ctx.sampling)
        res.add_report("intermediate", intermediate_bound_check(green, ctx.domain, ctx.frame, tuples, gamma))
    return res


@study("counterexample")
def _counterexample(ctx: StudyContext) -> StudyResult:
    """The factor-free ratio must grow along the sweep and the factored one settle."""
    ball = ctx.ball("counterexample")
    deltas = ctx.cfg.option("deltas", DEFAULT_DELTAS)
    sweep = counterexample_sweep(
        ctx.params, ball, [float(v) for v in deltas],
        separation=float(ctx.cfg.option("separation", 0.5)),
        gamma=ctx.cfg.option("gamma"),
    )
    free = sweep["factor_free_ratio"].to_numpy()
    factored = sweep["factored_ratio"].to_numpy()
    growing = bool(np.all(np.diff(free) > 0))
    change = float(abs(factored[-1] - factored[-2]) / abs(factored[-2])) if factored.size > 1 else 0.0
    settled = change <= STABILITY_RTOL
    fit = {"factor_free_increasing": growing, "factored_last_change": change,
           "factored_sup": float(factored.max()), "accepted": growing and settled}
    curve = pd.DataFrame({"n": np.arange(1, factored.size + 1), "sup": np.maximum.accumulate(factored)})
    return StudyResult(tables={"sweep": sweep}, fits={"counterexample": fit},
                       curves={"counterexample": curve}, accepted=growing and settled)


@study("growth")
def _growth(ctx: StudyContext) -> StudyResult:
    """Boundary growth exponents; each must stay below alpha by a margin."""
    s_q, s_green = ctx.streams(2)
    green = make_green(ctx, s_green.generate_state(1)[0])
    r = float(ctx.cfg.option("r", ctx.frame.R / 2))
    Qs = ctx.domain.sample_boundary(int(ctx.cfg.option("n_boundary", 4)), make_generator(s_q))
    res = StudyResult()
    tables, curves = [], []
    for i, Q in enumerate(Qs):
        report = growth_check(green, ctx.domain, ctx.frame, Q, r, ctx.cfg.option("s_grid"))
        ok = report.gamma_hat < ctx.params.alpha - GROWTH_MARGIN
        report.accepted = ok
        res.fits[f"Q{i}"] = {**report.summary(), "Q": Q.tolist()}
        tables.append(report.table.assign(Q=i))
        curves.append(report.stability_curve.assign(label=f"Q{i}"))
        res.accepted &= ok
    res.tables["growth"] = pd.concat(tables, ignore_index=True)
    res.curves["growth"] = pd.concat(curves, ignore_index=True)
    return res


@study("carleson")
def _carleson(ctx: StudyContext) -> StudyResult:
    s_q, s_probe, s_green = ctx.streams(3)
    green = make_green(ctx, s_green.generate_state(1)[0])
    Q = ctx.cfg.option("Q")
    if Q is None:
        Q = ctx.domain.sample_boundary(1, make_generator(s_q))[0]
    r = float(ctx.cfg.option("r", ctx.frame.kappa * ctx.frame.R / 8))
    y_far = ctx.cfg.option("y_far", ctx.frame.z0)
    report = carleson_check(green, ctx.domain, ctx.frame, Q, r, y_far, ctx.n, seed=s_probe)
    res = StudyResult()
    res.add_report("carleson", report)
    return res


def _kato_gamma(ctx: StudyContext, green: GreenEvaluator, seed) -> Tuple[float, str]:
    """
    The 3G exponent for Young selection: ``study_options.gamma`` if set,
    else the fitted gamma_hat, else alpha/2 when no grid gamma is stable.
    """
    configured = ctx.cfg.option("gamma")
    if configured is not None:
        return float(configured), "config"
    n_fit = int(ctx.cfg.option("n_gamma_fit", ctx.n))
    fit = fit_3g(green, ctx.domain, ctx.frame, n_fit, ctx.cfg.gamma_grid, seed=seed, **ctx.sampling)
    if fit.gamma_hat is not None:
        return float(fit.gamma_hat), "fit_3g"
    logger.warning("no stable 3G exponent on the grid; Young exponents use alpha/2")
    return ctx.params.alpha / 2, "fallback"


@study("kato")
def _kato(ctx: StudyContext) -> StudyResult:
    """
    Young exponents for every case, and gauge scans for power perturbations
    (plus the relativistic one when a mass is configured).
    """
    p = ctx.params
    s_pairs, s_green, s_scan, s_fit = ctx.streams(4)
    green = make_green(ctx, s_green.generate_state(1)[0])
    gamma, gamma_source = _kato_gamma(ctx, green, s_fit)
    betas = [float(b) for b in ctx.cfg.option("betas", [p.alpha + 0.1, p.alpha + 0.5, 2 * p.alpha, 2.0])]
    rows = []
    for beta in betas:
        for case in YOUNG_CASES:
            try:
                ye = select_young_exponents(p, beta, gamma, case)
                rows.append({"beta": beta, "case": case, "p": ye.p, "q": ye.q,
                             "split_needed": ye.split_needed, "error": ""})
            except YoungExponentError as exc:
                rows.append({"beta": beta, "case": case, "p": np.nan, "q": np.nan,
                             "split_needed": True, "error": str(exc)})
    res = StudyResult(tables={"young": pd.DataFrame(rows)})
    res.fits["gamma"] = {"gamma": gamma, "source": gamma_source}
    pairs = sample_tuples(ctx.domain, int(ctx.cfg.option("n_pairs", 8)), 2, s_pairs, **ctx.sampling)
    perturbations = {f"beta={b:g}": (PerturbationSpec.power(p, b, float(ctx.cfg.option("c", 1.0))), None)
                     for b in betas}
    if ctx.cfg.process.m is not None:
        m = ctx.cfg.process.m
        perturbations[f"relativistic m={m:g}"] = (PerturbationSpec.relativistic(p, m), m)
    scans = []
    for (label, (F, mass)), ss in zip(perturbations.items(), s_scan.spawn(len(perturbations))):
        report = gauge_sup_scan(green, ctx.domain, F, pairs=pairs, n=ctx.n, seed=ss,
                                relativistic_mass=mass, workers=ctx.cfg.workers)
        res.fits[label] = {**report.summary(), **F.describe()}
        res.curves[label] = report.stability_curve
        scans.append(report.table.assign(perturbation=label))
        if F.hypothesis:
            res.accepted &= report.accepted
    res.tables["gauge"] = pd.concat(scans, ignore_index=True)
    return res


@study("relativistic")
def _relativistic(ctx: StudyContext) -> StudyResult:
    rp = ctx.cfg.process.relativistic
    psi0 = float(psi(rp, 0.0))
    r = np.linspace(0.0, 10.0, 201)
    profile = psi_closed(rp, r)
    decreasing = bool(np.all(np.diff(profile) < 0))
    small = fit_quadratic_bound(rp, np.geomspace(1e-3, 0.1, 25))
    bound = fit_quadratic_bound(rp, np.geomspace(1e-3, 1.0, 31))
    probes = np.outer(np.geomspace(1e-2, 10.0, 40), np.eye(rp.base.d)[0])
    nu = np.atleast_1d(levy_density_relativistic(rp, probes))
    stable = riesz_constant(rp.base) * _norm(probes) ** (-rp.base.d - rp.base.alpha)
    dominated = bool(np.all(nu <= stable))
    checks = {
        "psi_at_zero": abs(psi0 - 1.0) <= 1e-8,
        "psi_decreasing": decreasing,
        "quadratic_r2": small.r2 >= RELATIVISTIC_MIN_R2,
        "levy_domination": dominated,
    }
    res = StudyResult(
        tables={
            "psi": pd.DataFrame({"r": r, "psi": profile}),
            "levy": pd.DataFrame({"r": probes[:, 0], "relativistic": nu, "stable": stable}),
        },
        fits={
            "psi": {"psi_at_zero": psi0, "decreasing": decreasing},
            "quadratic_bound": {"c_hat": bound.c, "slope": small.slope, "r2": small.r2},
            "checks": checks,
        },
        accepted=all(checks.values()),
    )
    if isinstance(ctx.domain, Ball):
        ball = ctx.domain
        res.tables["q_m"] = q_m_profile(rp, ball, int(ctx.cfg.option("n_grid", 24)))
        if ctx.cfg.option("s_infty", False):
            oracle = BallGreenOracle(rp.base, ball)
            x = np.asarray(ctx.frame.z0)
            z = ball.c + 0.5 * ball.radius * np.eye(ball.dim)[0]
            est = s_infty_integral(oracle, ball, q_m_density(rp, ball), x, z, n=ctx.n, seed=ctx.streams(1)[0])
            res.fits["s_infty"] = est.as_dict()
            res.fits["s_infty"].pop("walltime")
    return res


@study("conditions")
def _conditions(ctx: StudyContext) -> StudyResult:
    s_green, s1, s2, s3, s4 = ctx.streams(5)
    green = make_green(ctx, s_green.generate_state(1)[0])
    res = StudyResult()
    res.add_report("C1", check_C1(green, ctx.domain, ctx.frame, seed=s1))
    res.add_report("C2", check_C2(green, ctx.domain, ctx.n, seed=s2))
    res.add_report("C3", check_C3(green, ctx.params, ctx.domain, ctx.n, seed=s3), keep_table=False)
    res.add_report("C4", check_C4(green, ctx.domain, ctx.frame, ctx.n, seed=s4))
    return res


# -- bundle ----------------------------------------------------------------


def _write_bundle(ctx: StudyContext, res: StudyResult, out_dir: Path, walltime: float) -> Path:
    tables = {}
    for name, frame in res.tables.items():
        tables[name] = write_csv(frame, out_dir / f"{name}.csv").name
    if "green_table" in res.extra:
        x, y, g, g_err = res.extra.pop("green_table")
        tables["green_table"] = write_green_table(out_dir / "green_table.csv", x, y, g, g_err).name
    curves = {}
    for name, frame in res.curves.items():
        curves[name] = write_csv(frame, out_dir / f"stability_{name.replace(' ', '_').replace('=', '')}.csv").name
    write_json(res.fits, out_dir / "fit.json")
    tables["fit"] = "fit.json"
    return write_manifest(
        out_dir,
        study=ctx.cfg.study,
        config_hash=ctx.cfg.config_hash(),
        seed=ctx.cfg.seed,
        walltime=walltime,
        tables=tables,
        fits=res.fits,
        stability_curves=curves,
        accepted=res.accepted,
        extra={"domain": ctx.domain.describe(), "frame": {"z0": ctx.frame.z0, "x0": ctx.frame.x0,
                                                         "c0": ctx.frame.c0, "c1": ctx.frame.c1}},
    )


@profile_execution()
def run_study(cfg: ExperimentConfig, out_dir: Optional[Path] = None, strict: bool = False) -> RunOutcome:
    """
    Run ``cfg.study`` and write its bundle into ``out_dir`` (``cfg.output``
    by default).

    :raises AcceptanceError: when ``strict`` and the study's acceptance
        criterion failed; the bundle is written first.
    """
    if cfg.study not in STUDIES:
        raise ConfigError([("study", f"unknown study {cfg.study!r}")])
    started = time.perf_counter()
    D = cfg.build_domain()
    p = cfg.process.stable
    try:
        frame = _frame(cfg, D, p)
    except StableLabError as exc:
        raise ConfigError([("frame", str(exc))]) from exc
    ctx = StudyContext(cfg, D, p, frame)
    logger.info("running %s on %s (seed=%d, workers=%d)", cfg.study, D.kind, cfg.seed, cfg.workers)
    result = STUDIES[cfg.study](ctx)
    walltime = time.perf_counter() - started
    out = Path(cfg.output if out_dir is None else out_dir)
    manifest = _write_bundle(ctx, result, out, walltime)
    if not result.accepted:
        logger.warning("%s study failed its acceptance criterion", cfg.study)
        if strict:
            raise AcceptanceError(f"{cfg.study} study failed acceptance; see {manifest}")
    return RunOutcome(out, manifest, result, walltime)
