"""
Sampling and fitting helpers shared by the verification harnesses.

Points are drawn from a boundary-biased mixture: a fraction uniform in D,
the rest in shells rho_D < 2^-k diam(D) with k uniform on an integer range.
Empirical sups are judged by their stability curve: the sup over prefix
samples of size n, n/2, n/4, ...; a sup is accepted when the last doubling
changes it by at most STABILITY_RTOL.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from sklearn.linear_model import LinearRegression
from sklearn.metrics import r2_score

from stablelab.core.geometry import DomainSpec, sample_interior, sample_shell
from stablelab.core.rng import RngLike, as_generator
from stablelab.exceptions import ParameterError

logger = logging.getLogger(__name__)

STABILITY_RTOL = 0.10
SHELL_LEVELS = (3, 10)
CAVEAT = (
    "empirical sup over {n} samples; not a certificate. Accepted only if "
    "doubling n changes the sup by at most {tol:.0%}."
)


def sample_points(
    D: DomainSpec,
    n: int,
    rng: RngLike = None,
    uniform_frac: float = 0.5,
    levels: Tuple[int, int] = SHELL_LEVELS,
) -> np.ndarray:
    """``n`` points from the boundary-biased mixture, in draw order."""
    if n < 1:
        raise ParameterError("sample size must be >= 1")
    gen = as_generator(rng)
    uniform = gen.random(n) < uniform_frac
    k = gen.integers(levels[0], levels[1] + 1, size=n)
    out = np.empty((n, D.dim))
    n_uni = int(uniform.sum())
    if n_uni:
        out[uniform] = sample_interior(D, n_uni, gen)
    if n_uni < n:
        eps = 2.0 ** -k[~uniform] * D.diameter
        out[~uniform] = sample_shell(D, n - n_uni, eps, gen)
    return out


def sample_tuples(D: DomainSpec, n: int, arity: int, rng: RngLike = None, **kwargs) -> np.ndarray:
    """``n`` tuples of ``arity`` mixture points, shape (n, arity, d)."""
    return sample_points(D, n * arity, rng, **kwargs).reshape(n, arity, D.dim)


@dataclass
class StabilityCurve:
    table: pd.DataFrame
    accepted: bool
    last_change: float

    @property
    def value(self) -> float:
        return float(self.table["sup"].iloc[-1])


def stability_curve(values: np.ndarray, n_levels: int = 4, rtol: float = STABILITY_RTOL) -> StabilityCurve:
    """
    Sup of ``values`` over prefixes of size n, n/2, ... (``n_levels`` sizes).

    NaN entries are ignored. A non-finite sup is never accepted.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    sizes = sorted({max(n >> k, 1) for k in range(n_levels)})
    rows = []
    for m in sizes:
        head = values[:m]
        head = head[~np.isnan(head)]
        rows.append({"n": m, "sup": float(head.max()) if head.size else np.nan})
    table = pd.DataFrame(rows)
    sups = table["sup"].to_numpy()
    if len(sups) < 2 or not np.all(np.isfinite(sups[-2:])):
        return StabilityCurve(table, False, np.inf)
    change = abs(sups[-1] - sups[-2]) / abs(sups[-2]) if sups[-2] != 0 else (0.0 if sups[-1] == 0 else np.inf)
    return StabilityCurve(table, bool(change <= rtol), float(change))


@dataclass(frozen=True)
class LogLogFit:
    slope: float
    intercept: float
    r2: float


def loglog_fit(x: Sequence[float], y: Sequence[float]) -> LogLogFit:
    """Least-squares line through (log x, log y)."""
    X = np.log(np.asarray(x, dtype=float)).reshape(-1, 1)
    Y = np.log(np.asarray(y, dtype=float))
    if X.shape[0] < 2:
        raise ParameterError("a log-log fit needs at least two points")
    model = LinearRegression().fit(X, Y)
    r2 = float(r2_score(Y, model.predict(X))) if X.shape[0] > 2 else 1.0
    return LogLogFit(float(model.coef_[0]), float(model.intercept_), r2)


@dataclass
class FitReport:
    """
    An empirical constant with its exponent, stability evidence and caveats.

    ``stability_curve`` holds one sup-versus-n table (with a ``label`` column
    when several quantities are tracked); ``columns`` holds named sups of
    auxiliary checks; ``table`` holds per-sample rows when the study keeps them.
    """

    c_hat: float
    gamma_hat: Optional[float]
    n_tuples: int
    stability_curve: pd.DataFrame
    grid_resolution: Optional[float] = None
    accepted: bool = False
    notes: List[str] = field(default_factory=list)
    columns: Dict[str, float] = field(default_factory=dict)
    table: Optional[pd.DataFrame] = None

    def summary(self) -> Dict[str, object]:
        out = {
            "c_hat": self.c_hat,
            "gamma_hat": self.gamma_hat,
            "n_tuples": self.n_tuples,
            "grid_resolution": self.grid_resolution,
            "accepted": self.accepted,
            "notes": list(self.notes),
        }
        out.update({f"sup_{k}": v for k, v in self.columns.items()})
        return out


def labelled_curves(curves: Dict[str, StabilityCurve]) -> pd.DataFrame:
    """Stack several stability tables with a ``label`` column."""
    frames = [c.table.assign(label=k, accepted=c.accepted) for k, c in curves.items()]
    return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=["n", "sup", "label", "accepted"])
