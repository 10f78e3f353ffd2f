"""
Walk-on-spheres for the alpha-stable process killed on leaving D.

From the current position x_k the walk samples the exact exit position of
B(x_k, theta rho_D(x_k)) started at its center. Every such exit is a genuine
jump, so the first sampled point outside D is the exit position of the
killed process. Green functions are estimated by the telescoping identity

    G_D(x, y) = E_x[ sum_k G_{B_k}(x_k, y) ].

Walks are simulated in fixed-size batches. Batch ``i`` always draws from the
``i``-th child of the root seed sequence and partial moments are merged by a
pairwise tree, so every estimate is identical for any number of workers.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import special

from stablelab.core.geometry import DomainSpec, as_points, unit_directions, _norm
from stablelab.core.kernels import (
    StableParams,
    ball_exit_radial_cdf,
    ball_exit_radial_density,
    ball_green_from_center,
    default_c0,
)
from stablelab.core.parallel import run_ordered
from stablelab.core.reduction import Moments, tree_moments, tree_sum
from stablelab.core.rng import RngLike, as_generator, as_seed_sequence, make_generator, seed_provenance
from stablelab.decorators import log_calls
from stablelab.exceptions import DegenerateConfigurationError, DomainError, ParameterError

logger = logging.getLogger(__name__)

BATCH_SIZE = 4096
MAX_STEPS = 10_000
SINGULAR_GUARD = 1e-9
CDF_TOL = 1e-12
MAX_RESAMPLE_ROUNDS = 32


@dataclass
class JumpChain:
    """Ball centers, radii and exit positions of one walk."""

    centers: np.ndarray
    radii: np.ndarray
    exits: np.ndarray
    truncated: bool = False

    @property
    def n_steps(self) -> int:
        return int(self.radii.shape[0])

    @property
    def exit_point(self) -> np.ndarray:
        return self.exits[-1]

    @property
    def steps(self) -> List[tuple]:
        return list(zip(self.centers, self.radii, self.exits))


@dataclass
class EstimatorResult:
    value: float
    stderr: float
    n_samples: int
    seed: int
    walltime: float
    extras: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.stderr < 0:
            raise ValueError("stderr must be >= 0")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")

    def as_dict(self) -> Dict[str, Any]:
        out = {
            "value": self.value,
            "stderr": self.stderr,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "walltime": self.walltime,
        }
        out.update(self.extras)
        return out


# -- exact ball exits ------------------------------------------------------


def exit_radii(p: StableParams, u: np.ndarray) -> np.ndarray:
    """
    Exit radii from the center of the unit ball for uniforms ``u`` in [0, 1).

    Inverse transform of the radial law through the inverse incomplete beta,
    polished by safeguarded Newton steps on the closed-form CDF; a step is
    kept only when it stays outside the ball and shrinks the residual.
    """
    a = p.alpha
    u = np.asarray(u, dtype=float)
    v = special.betaincinv(a / 2, 1 - a / 2, 1.0 - u)
    with np.errstate(divide="ignore"):
        s = 1.0 / np.sqrt(v)
    s = np.maximum(s, np.nextafter(1.0, 2.0))
    resid = ball_exit_radial_cdf(p, 1.0, s) - u
    for _ in range(3):
        todo = np.abs(resid) > CDF_TOL
        if not todo.any():
            break
        step = resid[todo] / ball_exit_radial_density(p, 1.0, s[todo])
        cand = s[todo] - step
        ok = cand > 1.0
        cand = np.where(ok, cand, s[todo])
        new_resid = ball_exit_radial_cdf(p, 1.0, cand) - u[todo]
        better = ok & (np.abs(new_resid) < np.abs(resid[todo]))
        idx = np.flatnonzero(todo)[better]
        s[idx] = cand[better]
        resid[idx] = new_resid[better]
    return s


def sample_ball_exit(p: StableParams, center, r: float, rng: RngLike, size: Optional[int] = None):
    """
    Exit position from B(center, r) of the process started at the center.

    Returns one point, or ``size`` points stacked along the first axis.
    """
    if not r > 0:
        raise ParameterError("ball radius must be positive")
    gen = as_generator(rng)
    c, _ = as_points(center, p.d)
    n = 1 if size is None else int(size)
    s = r * exit_radii(p, gen.random(n))
    z = c[0] + s[:, None] * unit_directions(n, p.d, gen)
    return z[0] if size is None else z


def run_walk(
    p: StableParams,
    D: DomainSpec,
    x,
    rng: RngLike,
    max_steps: int = MAX_STEPS,
    theta: float = 1.0,
) -> JumpChain:
    """One walk from x, recorded step by step."""
    _check_theta(theta)
    gen = as_generator(rng)
    pos, _ = as_points(x, p.d)
    pos = pos[0]
    if not D.contains(pos[None, :])[0]:
        raise DomainError("walks start inside D")
    centers, radii, exits = [], [], []
    for _ in range(max_steps):
        r = theta * float(-D.signed_distance(pos[None, :])[0])
        z = sample_ball_exit(p, pos, r, gen)
        centers.append(pos)
        radii.append(r)
        exits.append(z)
        if not D.contains(z[None, :])[0]:
            return JumpChain(np.array(centers), np.array(radii), np.array(exits))
        pos = z
    logger.warning("walk from %s truncated after %d steps", pos, max_steps)
    return JumpChain(np.array(centers), np.array(radii), np.array(exits), truncated=True)


# -- batched engine --------------------------------------------------------


@dataclass
class WalkBatch:
    """Per-walk outcomes of one batch; truncated walks have NaN exits."""

    exits: np.ndarray
    n_steps: np.ndarray
    truncated: np.ndarray
    singular: np.ndarray
    green_sum: Optional[np.ndarray] = None
    jump_sum: Optional[np.ndarray] = None

    def replace_rows(self, rows: np.ndarray, other: "WalkBatch") -> None:
        self.exits[rows] = other.exits
        self.n_steps[rows] += other.n_steps
        self.truncated[rows] = other.truncated
        self.singular[rows] = other.singular
        if self.green_sum is not None:
            self.green_sum[rows] = other.green_sum
        if self.jump_sum is not None:
            self.jump_sum[rows] = other.jump_sum


def simulate_walks(
    p: StableParams,
    D: DomainSpec,
    x,
    n: int,
    rng: RngLike,
    theta: float = 1.0,
    max_steps: int = MAX_STEPS,
    y=None,
    jump_weight: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None,
) -> WalkBatch:
    """
    ``n`` independent walks from x advanced together.

    With ``y`` the Green summands G_{B_k}(x_k, y) are accumulated; a walk whose
    center comes within SINGULAR_GUARD of y is stopped and flagged singular.
    With ``jump_weight`` the values F(x_k, x_{k+1}) of the jumps that stay in
    D are accumulated.
    """
    _check_theta(theta)
    gen = as_generator(rng)
    start, _ = as_points(x, p.d)
    if not D.contains(start)[0]:
        raise DomainError("walks start inside D")
    target = None if y is None else as_points(y, p.d)[0][0]
    pos = np.repeat(start, n, axis=0)
    exits = np.full((n, p.d), np.nan)
    n_steps = np.zeros(n, dtype=np.int64)
    singular = np.zeros(n, dtype=bool)
    active = np.ones(n, dtype=bool)
    green = np.zeros(n) if target is not None else None
    jumps = np.zeros(n) if jump_weight is not None else None

    for _ in range(max_steps):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        cur = pos[idx]
        r = theta * -D.signed_distance(cur)
        if target is not None:
            dist = _norm(cur - target)
            sing = dist < SINGULAR_GUARD
            if sing.any():
                singular[idx[sing]] = True
                active[idx[sing]] = False
                idx, cur, r, dist = idx[~sing], cur[~sing], r[~sing], dist[~sing]
            green[idx] += ball_green_from_center(p, r, dist)
        s = r * exit_radii(p, gen.random(idx.size))
        new = cur + s[:, None] * unit_directions(idx.size, p.d, gen)
        n_steps[idx] += 1
        inside = D.contains(new)
        if jumps is not None and inside.any():
            jumps[idx[inside]] += jump_weight(cur[inside], new[inside])
        pos[idx] = new
        done = idx[~inside]
        exits[done] = new[~inside]
        active[done] = False

    return WalkBatch(exits, n_steps, active.copy(), singular, green, jumps)


def _check_theta(theta: float) -> None:
    if not 0 < theta <= 1:
        raise ParameterError(f"safety factor theta must lie in (0, 1], got {theta}")


def _resample_singular(batch: WalkBatch, ss: np.random.SeedSequence, run: Callable[[int, np.random.Generator], WalkBatch]) -> int:
    """Re-run flagged walks from child streams of ``ss`` until none remain."""
    n_resampled = 0
    child = ss
    for _ in range(MAX_RESAMPLE_ROUNDS):
        rows = np.flatnonzero(batch.singular)
        if rows.size == 0:
            return n_resampled
        n_resampled += rows.size
        child = child.spawn(1)[0]
        batch.replace_rows(rows, run(rows.size, make_generator(child)))
    raise DegenerateConfigurationError("walks keep landing on the Green pole; move y off the walk lattice")


# -- batch tasks (top level so the process pool can pickle them) ------------


@dataclass(frozen=True)
class _BatchSummary:
    moments: Moments
    n_truncated: int
    n_resampled: int
    total_steps: int


def _green_batch(task) -> _BatchSummary:
    p, D, x, y, count, ss, theta, max_steps = task

    def run(k, gen):
        return simulate_walks(p, D, x, k, gen, theta, max_steps, y=y)

    batch = run(count, make_generator(ss))
    n_resampled = _resample_singular(batch, ss, run)
    return _BatchSummary(
        Moments.of(batch.green_sum), int(batch.truncated.sum()), n_resampled, int(batch.n_steps.sum())
    )


def _jump_batch(task) -> _BatchSummary:
    p, D, x, weight, count, ss, theta, max_steps = task
    batch = simulate_walks(p, D, x, count, make_generator(ss), theta, max_steps, jump_weight=weight)
    return _BatchSummary(Moments.of(batch.jump_sum), int(batch.truncated.sum()), 0, int(batch.n_steps.sum()))


def _run_batches(fn, payload: tuple, n: int, seed, workers: int, batch_size: int) -> _BatchSummary:
    if n < 1:
        raise ParameterError(f"n_samples must be >= 1, got {n}")
    if batch_size < 1:
        raise ParameterError("batch_size must be >= 1")
    n_batches = math.ceil(n / batch_size)
    streams = as_seed_sequence(seed).spawn(n_batches)
    sizes = [batch_size] * (n_batches - 1) + [n - batch_size * (n_batches - 1)]
    head, tail = payload[:4], payload[4:]
    tasks = [head + (k, ss) + tail for k, ss in zip(sizes, streams)]
    parts = run_ordered(fn, tasks, workers=workers, mode="process")
    return _BatchSummary(
        tree_moments([b.moments for b in parts]),
        sum(b.n_truncated for b in parts),
        sum(b.n_resampled for b in parts),
        sum(b.total_steps for b in parts),
    )


def _to_result(summary: _BatchSummary, seed, started: float, **extras) -> EstimatorResult:
    mom = summary.moments
    if summary.n_truncated:
        logger.warning("%d of %d walks truncated", summary.n_truncated, mom.n)
    if summary.n_resampled:
        logger.warning("%d walks resampled after hitting the singular guard", summary.n_resampled)
    info = {
        "n_truncated": summary.n_truncated,
        "n_resampled": summary.n_resampled,
        "mean_steps": summary.total_steps / mom.n,
    }
    info.update(extras)
    return EstimatorResult(
        value=mom.mean,
        stderr=mom.stderr,
        n_samples=mom.n,
        seed=seed_provenance(seed),
        walltime=time.perf_counter() - started,
        extras=info,
    )


# -- estimators ------------------------------------------------------------


def _validated_pair(p: StableParams, D: DomainSpec, x, y):
    xs, _ = as_points(x, p.d)
    ys, _ = as_points(y, p.d)
    if not D.contains(xs)[0] or not D.contains(ys)[0]:
        raise DomainError("both points must lie in D")
    if np.array_equal(xs[0], ys[0]):
        raise DegenerateConfigurationError("Green function is singular at x = y")
    return xs[0], ys[0]


@log_calls(logging.DEBUG)
def estimate_green(
    p: StableParams,
    D: DomainSpec,
    x,
    y,
    n: int,
    seed=None,
    *,
    workers: int = 1,
    theta: float = 1.0,
    max_steps: int = MAX_STEPS,
    batch_size: int = BATCH_SIZE,
) -> EstimatorResult:
    """
    G_D(x, y) by averaging the ball-Green telescoping sums of ``n`` walks from x.

    Truncated walks keep their partial sums and are counted in
    ``extras["n_truncated"]``; walks resampled by the singular guard are
    counted in ``extras["n_resampled"]``.
    """
    started = time.perf_counter()
    xp, yp = _validated_pair(p, D, x, y)
    _check_theta(theta)
    summary = _run_batches(_green_batch, (p, D, xp, yp, theta, max_steps), n, seed, workers, batch_size)
    return _to_result(summary, seed, started)


@log_calls(logging.DEBUG)
def estimate_g(frame, p: StableParams, D: DomainSpec, x, n: int, seed=None, **kwargs) -> EstimatorResult:
    """
    g(x) = G_D(x, z0) capped at C1.

    The frame's C0 is used when recorded, the cached unit-ball calibration
    otherwise. The result's extras carry C0, C1, the raw estimate and
    whether the cap was active.
    """
    if frame.c0 is None or frame.c1 is None:
        frame = frame.with_green_constant(p.d, p.alpha, default_c0(p))
    z0 = np.asarray(frame.z0)
    if np.array_equal(as_points(x, p.d)[0][0], z0):
        raise DegenerateConfigurationError("g is evaluated away from z0")
    raw = estimate_green(p, D, x, z0, n, seed, **kwargs)
    capped = raw.value > frame.c1
    return EstimatorResult(
        value=min(raw.value, frame.c1),
        stderr=0.0 if capped else raw.stderr,
        n_samples=raw.n_samples,
        seed=raw.seed,
        walltime=raw.walltime,
        extras={**raw.extras, "raw_value": raw.value, "capped": capped, "c0": frame.c0, "c1": frame.c1},
    )


@dataclass
class MartinSequence(Sequence):
    """
    Martin kernel estimates along a sequence approaching the boundary.

    ``cauchy_tail`` is the largest pairwise difference among the last three
    estimates and ``tail_stderr`` the matching joint standard error.
    """

    results: List[EstimatorResult]
    cauchy_tail: float
    tail_stderr: float

    def __getitem__(self, i):
        return self.results[i]

    def __len__(self) -> int:
        return len(self.results)

    def __iter__(self) -> Iterator[EstimatorResult]:
        return iter(self.results)

    @property
    def stabilized(self) -> bool:
        return self.cauchy_tail <= 3.0 * self.tail_stderr

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.as_dict() for r in self.results])


def _cauchy_tail(results: Sequence[EstimatorResult]):
    tail = list(results)[-3:]
    best, err = 0.0, 0.0
    for i in range(len(tail)):
        for j in range(i + 1, len(tail)):
            diff = abs(tail[i].value - tail[j].value)
            if diff >= best:
                best = diff
                err = math.hypot(tail[i].stderr, tail[j].stderr)
    return best, err


@log_calls(logging.DEBUG)
def estimate_martin(
    p: StableParams,
    D: DomainSpec,
    x0,
    x,
    y_sequence,
    n: int,
    seed=None,
    **kwargs,
) -> MartinSequence:
    """
    M_D(x, y_k) = G_D(x, y_k) / G_D(x0, y_k) along ``y_sequence``.

    Numerator and denominator use independent streams; the standard error of
    the ratio is propagated to first order.
    """
    x0p = as_points(x0, p.d)[0][0]
    xp = as_points(x, p.d)[0][0]
    ys, _ = as_points(y_sequence, p.d)
    started = time.perf_counter()
    results = []
    if np.array_equal(x0p, xp):
        for _ in ys:
            results.append(EstimatorResult(1.0, 0.0, n, seed_provenance(seed), time.perf_counter() - started))
        return MartinSequence(results, 0.0, 0.0)
    streams = as_seed_sequence(seed).spawn(2 * len(ys))
    for k, yk in enumerate(ys):
        num = estimate_green(p, D, xp, yk, n, streams[2 * k], **kwargs)
        den = estimate_green(p, D, x0p, yk, n, streams[2 * k + 1], **kwargs)
        ratio = num.value / den.value
        err = abs(ratio) * math.hypot(num.stderr / num.value, den.stderr / den.value)
        results.append(
            EstimatorResult(
                value=ratio,
                stderr=err,
                n_samples=n,
                seed=seed_provenance(streams[2 * k]),
                walltime=num.walltime + den.walltime,
                extras={"green_x": num.value, "green_x0": den.value, "rho_y": float(-D.signed_distance(yk[None, :])[0])},
            )
        )
    tail, tail_err = _cauchy_tail(results)
    logger.info("Martin sequence of %d terms: Cauchy tail %.4g (stderr %.4g)", len(results), tail, tail_err)
    return MartinSequence(results, tail, tail_err)


@dataclass
class HarnackBand:
    table: pd.DataFrame
    constant: float


@log_calls(logging.DEBUG)
def harnack_band(
    p: StableParams,
    D: DomainSpec,
    x1,
    x2,
    y,
    n: int,
    seed=None,
    **kwargs,
) -> HarnackBand:
    """
    Ratios G_D(x1_i, y) / G_D(x2_i, y) for paired points, and the smallest
    constant c with every ratio in [1/c, c].
    """
    a, _ = as_points(x1, p.d)
    b, _ = as_points(x2, p.d)
    if a.shape != b.shape:
        raise ParameterError("x1 and x2 must pair up")
    streams = as_seed_sequence(seed).spawn(2 * a.shape[0])
    rows = []
    for i, (u, v) in enumerate(zip(a, b)):
        gu = estimate_green(p, D, u, y, n, streams[2 * i], **kwargs)
        gv = estimate_green(p, D, v, y, n, streams[2 * i + 1], **kwargs)
        ratio = gu.value / gv.value
        rows.append({
            "separation": float(_norm(u - v)),
            "green_1": gu.value,
            "green_2": gv.value,
            "ratio": ratio,
            "stderr": abs(ratio) * math.hypot(gu.stderr / gu.value, gv.stderr / gv.value),
        })
    table = pd.DataFrame(rows)
    constant = float(max(table["ratio"].max(), 1.0 / table["ratio"].min()))
    return HarnackBand(table, constant)


@log_calls(logging.DEBUG)
def expected_jump_sum(
    p: StableParams,
    D: DomainSpec,
    x,
    F: Callable[[np.ndarray, np.ndarray], np.ndarray],
    n: int,
    seed=None,
    *,
    workers: int = 1,
    theta: float = 1.0,
    max_steps: int = MAX_STEPS,
    batch_size: int = BATCH_SIZE,
) -> EstimatorResult:
    """
    E_x[ sum F(x_k, x_{k+1}) ] over the chain's jumps that stay in D.

    ``F`` is vectorized over rows; with ``workers > 1`` it must be a
    module-level function.
    """
    started = time.perf_counter()
    xp = as_points(x, p.d)[0][0]
    summary = _run_batches(_jump_batch, (p, D, xp, F, theta, max_steps), n, seed, workers, batch_size)
    return _to_result(summary, seed, started)


def exit_histogram(
    p: StableParams,
    D: DomainSpec,
    x,
    n: int,
    edges: Sequence[float],
    center,
    seed=None,
    theta: float = 1.0,
    batch_size: int = BATCH_SIZE,
) -> np.ndarray:
    """
    Empirical exit probabilities over radial cells |z - center| in
    (edges[i], edges[i+1]]; truncated walks are left out.
    """
    c = as_points(center, p.d)[0][0]
    edges = np.asarray(edges, dtype=float)
    n_batches = math.ceil(n / batch_size)
    counts = []
    for k, ss in enumerate(as_seed_sequence(seed).spawn(n_batches)):
        size = min(batch_size, n - k * batch_size)
        batch = simulate_walks(p, D, x, size, make_generator(ss), theta)
        radii = _norm(batch.exits[~batch.truncated] - c)
        counts.append(np.histogram(radii, bins=edges)[0].astype(float))
    total = np.sum(counts, axis=0)
    return total / tree_sum([c.sum() for c in counts])
