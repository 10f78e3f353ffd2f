"""
Experiment configuration.

A config is a YAML file with the sections below. Every field is validated
before a study is dispatched; all violations are collected with their dotted
field path and raised together as a :class:`~stablelab.exceptions.ConfigError`.

.. code-block:: yaml

    study: threeg
    domain: {shape: ball, center: [0, 0], radius: 1}
    process: {d: 2, alpha: 1.0}
    kfat: {R: 1.5, kappa: 0.5}
    n_samples: 10000
    seed: 7
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import yaml

from stablelab.core.geometry import DomainSpec, KFatCharacteristics, make_domain
from stablelab.core.kernels import StableParams
from stablelab.core.relativistic import RelativisticParams
from stablelab.core.rng import DEFAULT_SEED
from stablelab.exceptions import ConfigError, StableLabError

logger = logging.getLogger(__name__)

STUDIES = (
    "certify",
    "sample-exit",
    "green",
    "threeg",
    "counterexample",
    "growth",
    "carleson",
    "kato",
    "relativistic",
    "conditions",
)
RELATIVISTIC_STUDIES = ("relativistic",)
TOP_LEVEL_KEYS = (
    "study",
    "domain",
    "process",
    "kfat",
    "frame",
    "sampling",
    "study_options",
    "n_samples",
    "seed",
    "gamma_grid",
    "workers",
    "output",
)


@dataclass(frozen=True)
class ProcessConfig:
    d: int
    alpha: float
    m: Optional[float] = None

    @property
    def stable(self) -> StableParams:
        return StableParams(self.d, self.alpha)

    @property
    def relativistic(self) -> RelativisticParams:
        return RelativisticParams(self.stable, self.m)


@dataclass(frozen=True)
class KFatConfig:
    R: float
    kappa: float

    @property
    def chars(self) -> KFatCharacteristics:
        return KFatCharacteristics(self.R, self.kappa)


@dataclass(frozen=True)
class FrameConfig:
    z0: Optional[Tuple[float, ...]] = None
    x0: Optional[Tuple[float, ...]] = None
    resolution: int = 41


@dataclass(frozen=True)
class SamplingConfig:
    uniform_frac: float = 0.5
    shell_levels: Tuple[int, int] = (3, 10)


@dataclass(frozen=True)
class ExperimentConfig:
    study: str
    domain: Dict[str, Any]
    process: ProcessConfig
    kfat: KFatConfig
    frame: FrameConfig = field(default_factory=FrameConfig)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    study_options: Dict[str, Any] = field(default_factory=dict)
    n_samples: int = 10_000
    seed: int = DEFAULT_SEED
    gamma_grid: Optional[Tuple[float, ...]] = None
    workers: int = 1
    output: str = "stablelab-out"

    def build_domain(self) -> DomainSpec:
        return make_domain(self.domain)

    def option(self, name: str, default=None):
        return self.study_options.get(name, default)

    def with_overrides(
        self,
        seed: Optional[int] = None,
        workers: Optional[int] = None,
        out: Optional[Union[str, Path]] = None,
        study: Optional[str] = None,
    ) -> "ExperimentConfig":
        """Copy with command-line overrides applied; the result is revalidated."""
        changes: Dict[str, Any] = {}
        if seed is not None:
            changes["seed"] = seed
        if workers is not None:
            changes["workers"] = workers
        if out is not None:
            changes["output"] = str(out)
        if study is not None:
            changes["study"] = study
        if not changes:
            return self
        return from_mapping(replace(self, **changes).as_mapping())

    def as_mapping(self) -> Dict[str, Any]:
        out = asdict(self)
        out["frame"] = {k: (list(v) if isinstance(v, tuple) else v) for k, v in out["frame"].items()}
        out["sampling"]["shell_levels"] = list(out["sampling"]["shell_levels"])
        if out["gamma_grid"] is not None:
            out["gamma_grid"] = list(out["gamma_grid"])
        return out

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON of the validated config."""
        canonical = json.dumps(self.as_mapping(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class _Collector:
    def __init__(self):
        self.errors: List[Tuple[str, str]] = []

    def add(self, path: str, message: str) -> None:
        self.errors.append((path, message))

    def section(self, raw: Mapping[str, Any], name: str, required: bool = False) -> Dict[str, Any]:
        value = raw.get(name)
        if value is None:
            if required:
                self.add(name, "section is required")
            return {}
        if not isinstance(value, Mapping):
            self.add(name, "must be a mapping")
            return {}
        return dict(value)

    def number(self, section: Mapping[str, Any], path: str, key: str, kind=float, default=None, required=False):
        if key not in section or section[key] is None:
            if required:
                self.add(f"{path}.{key}" if path else key, "is required")
            return default
        value = section[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.add(f"{path}.{key}" if path else key, f"must be a number, got {value!r}")
            return default
        if kind is int and int(value) != value:
            self.add(f"{path}.{key}" if path else key, f"must be an integer, got {value!r}")
            return default
        return kind(value)

    def point(self, section: Mapping[str, Any], path: str, key: str, d: Optional[int]):
        value = section.get(key)
        if value is None:
            return None
        try:
            pt = tuple(float(v) for v in value)
        except (TypeError, ValueError):
            self.add(f"{path}.{key}", "must be a list of numbers")
            return None
        if d is not None and len(pt) != d:
            self.add(f"{path}.{key}", f"must have {d} coordinates")
            return None
        return pt


def from_mapping(raw: Mapping[str, Any]) -> ExperimentConfig:
    """
    Validate a parsed config and build an :class:`ExperimentConfig`.

    :raises ConfigError: listing every violation with its field path.
    """
    if not isinstance(raw, Mapping):
        raise ConfigError([("", "config must be a mapping")])
    errs = _Collector()
    for key in raw:
        if key not in TOP_LEVEL_KEYS:
            errs.add(str(key), "unknown key")

    study = raw.get("study")
    if study not in STUDIES:
        errs.add("study", f"must be one of {list(STUDIES)}, got {study!r}")

    proc = errs.section(raw, "process", required=True)
    d = errs.number(proc, "process", "d", int, required=True)
    alpha = errs.number(proc, "process", "alpha", required=True)
    m = errs.number(proc, "process", "m")
    if d is not None and d < 2:
        errs.add("process.d", f"must be >= 2, got {d}")
        d = None
    if alpha is not None and not 0 < alpha < 2:
        errs.add("process.alpha", f"must lie in (0, 2), got {alpha}")
        alpha = None
    if m is not None and not m > 0:
        errs.add("process.m", f"must be > 0, got {m}")
    if study in RELATIVISTIC_STUDIES and m is None:
        errs.add("process.m", f"is required by the {study} study")

    domain = errs.section(raw, "domain", required=True)
    if domain:
        try:
            D = make_domain(domain)
        except (StableLabError, TypeError, ValueError) as exc:
            errs.add("domain", str(exc))
        else:
            if d is not None and D.dim != d:
                errs.add("domain", f"dimension {D.dim} does not match process.d={d}")

    kfat = errs.section(raw, "kfat", required=True)
    R = errs.number(kfat, "kfat", "R", required=True)
    kappa = errs.number(kfat, "kfat", "kappa", required=True)
    if R is not None and not R > 0:
        errs.add("kfat.R", f"must be > 0, got {R}")
    if kappa is not None and not 0 < kappa <= 0.5:
        errs.add("kfat.kappa", f"must lie in (0, 1/2], got {kappa}")

    frame_raw = errs.section(raw, "frame")
    frame = FrameConfig(
        z0=errs.point(frame_raw, "frame", "z0", d),
        x0=errs.point(frame_raw, "frame", "x0", d),
        resolution=errs.number(frame_raw, "frame", "resolution", int, default=41),
    )
    if frame.resolution < 3:
        errs.add("frame.resolution", "must be >= 3")

    samp_raw = errs.section(raw, "sampling")
    uniform_frac = errs.number(samp_raw, "sampling", "uniform_frac", default=0.5)
    if not 0 <= uniform_frac <= 1:
        errs.add("sampling.uniform_frac", "must lie in [0, 1]")
    levels = samp_raw.get("shell_levels", (3, 10))
    if (
        not isinstance(levels, (list, tuple))
        or len(levels) != 2
        or not all(isinstance(v, int) and v >= 1 for v in levels)
        or levels[0] > levels[1]
    ):
        errs.add("sampling.shell_levels", "must be a pair of integers 1 <= k_lo <= k_hi")
        levels = (3, 10)

    options = errs.section(raw, "study_options")
    n_samples = errs.number(raw, "", "n_samples", int, default=10_000)
    if n_samples < 1:
        errs.add("n_samples", "must be >= 1")
    seed = errs.number(raw, "", "seed", int, default=DEFAULT_SEED)
    if seed < 0:
        errs.add("seed", "must be >= 0")
    workers = errs.number(raw, "", "workers", int, default=1)
    if workers < 1:
        errs.add("workers", "must be >= 1")

    gamma_grid = raw.get("gamma_grid")
    if gamma_grid is not None:
        try:
            gamma_grid = tuple(float(g) for g in gamma_grid)
        except (TypeError, ValueError):
            errs.add("gamma_grid", "must be a list of numbers")
            gamma_grid = None
        else:
            if not gamma_grid:
                errs.add("gamma_grid", "must not be empty")
            elif alpha is not None and any(not 0 < g <= alpha for g in gamma_grid):
                errs.add("gamma_grid", f"values must lie in (0, alpha={alpha}]")

    output = raw.get("output", "stablelab-out")
    if not isinstance(output, str) or not output:
        errs.add("output", "must be a non-empty path")

    if errs.errors:
        raise ConfigError(errs.errors)
    cfg = ExperimentConfig(
        study=study,
        domain=domain,
        process=ProcessConfig(d, alpha, m),
        kfat=KFatConfig(R, kappa),
        frame=frame,
        sampling=SamplingConfig(uniform_frac, tuple(levels)),
        study_options=options,
        n_samples=n_samples,
        seed=seed,
        gamma_grid=gamma_grid,
        workers=workers,
        output=output,
    )
    logger.debug("validated %s config %s", cfg.study, cfg.config_hash()[:12])
    return cfg


def load_config(path: Union[str, Path], study: Optional[str] = None) -> ExperimentConfig:
    """
    Read and validate a YAML config.

    ``study`` replaces the file's ``study`` key before validation (the CLI
    subcommand wins).
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError([("--config", f"no such file: {path}")]) from None
    except yaml.YAMLError as exc:
        raise ConfigError([("--config", f"not valid YAML: {exc}")]) from None
    raw = dict(raw or {})
    if study is not None:
        raw["study"] = study
    return from_mapping(raw)
