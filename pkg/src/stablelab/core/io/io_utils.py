"""
Report bundle writers and the tabulated-Green file format.

A bundle is a directory holding CSV tables, JSON fit summaries and a
``manifest.json`` that indexes them. CSV floats are written with 17
significant digits so that re-reading returns the same doubles.
"""

from __future__ import annotations

import json
import logging
import platform
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Union

import numpy as np
import pandas as pd

from stablelab.exceptions import ParameterError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
MANIFEST_NAME = "manifest.json"
PathLike = Union[str, Path]


def _jsonable(value: Any) -> Any:
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, pd.DataFrame):
        return value.to_dict(orient="list")
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def write_csv(frame: pd.DataFrame, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.debug("wrote %d rows to %s", len(frame), path)
    return path


def read_csv(path: PathLike) -> pd.DataFrame:
    return pd.read_csv(path, float_precision="round_trip")


def write_json(payload: Mapping[str, Any], path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def read_json(path: PathLike) -> Dict[str, Any]:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def library_versions() -> Dict[str, str]:
    import scipy
    import sklearn
    import yaml

    from stablelab import __version__

    return {
        "stablelab": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
        "scikit-learn": sklearn.__version__,
        "PyYAML": yaml.__version__,
    }


def write_manifest(
    out_dir: PathLike,
    *,
    study: str,
    config_hash: str,
    seed: int,
    walltime: float,
    tables: Mapping[str, str],
    fits: Mapping[str, Mapping[str, Any]],
    stability_curves: Mapping[str, Any],
    accepted: bool,
    extra: Optional[Mapping[str, Any]] = None,
) -> Path:
    """
    Write ``manifest.json`` into ``out_dir``.

    ``tables`` maps table names to file names relative to ``out_dir``.
    """
    manifest = {
        "study": study,
        "config_hash": config_hash,
        "seed": int(seed),
        "versions": library_versions(),
        "walltime": float(walltime),
        "tables": dict(tables),
        "fits": dict(fits),
        "stability_curves": dict(stability_curves),
        "accepted": bool(accepted),
    }
    if extra:
        manifest.update(extra)
    path = write_json(manifest, Path(out_dir) / MANIFEST_NAME)
    logger.info("manifest written to %s", path)
    return path


def load_manifest(path: PathLike) -> Dict[str, Any]:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    if not path.exists():
        raise FileNotFoundError(f"no manifest at {path}")
    manifest = read_json(path)
    manifest["_path"] = str(path)
    return manifest


def summarize_manifests(paths: Iterable[PathLike]) -> pd.DataFrame:
    """One row per fitted constant across the given manifests."""
    rows: List[Dict[str, Any]] = []
    for p in paths:
        m = load_manifest(p)
        fits = m.get("fits") or {"-": {}}
        for name, fit in fits.items():
            rows.append({
                "manifest": m["_path"],
                "study": m.get("study"),
                "fit": name,
                "c_hat": fit.get("c_hat"),
                "gamma_hat": fit.get("gamma_hat"),
                "accepted": fit.get("accepted", m.get("accepted")),
                "walltime": m.get("walltime"),
            })
    return pd.DataFrame(rows, columns=["manifest", "study", "fit", "c_hat", "gamma_hat", "accepted", "walltime"])


# -- tabulated Green functions ---------------------------------------------


def green_table_columns(d: int) -> List[str]:
    return [f"x{i}" for i in range(d)] + [f"y{i}" for i in range(d)] + ["g", "g_err"]


def write_green_table(path: PathLike, x: np.ndarray, y: np.ndarray, g: np.ndarray, g_err: np.ndarray) -> Path:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x.shape[1]
    data = np.column_stack([x, y, np.asarray(g, dtype=float), np.asarray(g_err, dtype=float)])
    return write_csv(pd.DataFrame(data, columns=green_table_columns(d)), path)


def read_green_table(path: PathLike):
    """
    Read a ``x0..,y0..,g,g_err`` table; returns ``(x, y, g, g_err)``.

    :raises ParameterError: on a malformed header or non-positive values.
    """
    frame = read_csv(path)
    cols = list(frame.columns)
    n_coords = len(cols) - 2
    if n_coords < 4 or n_coords % 2 or cols != green_table_columns(n_coords // 2):
        raise ParameterError(f"{path}: header must read x0..x(d-1),y0..y(d-1),g,g_err")
    d = n_coords // 2
    values = frame.to_numpy(dtype=float)
    g = values[:, 2 * d]
    if np.any(~np.isfinite(values)) or np.any(g <= 0):
        raise ParameterError(f"{path}: Green values must be finite and positive")
    return values[:, :d], values[:, d:2 * d], g, values[:, 2 * d + 1]
