"""
Command-line entry point.

Every study is a subcommand reading a YAML config::

    stablelab threeg --config ball.yaml --seed 7 --workers 4 --out runs/ball
    stablelab report runs/ball runs/box

Exit codes: 0 on success, 1 on invalid configuration or missing files,
2 when a study ran but failed its numerical acceptance criterion.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import List, Optional

import pandas as pd

from stablelab import __version__
from stablelab.api import run_study
from stablelab.config import STUDIES, load_config
from stablelab.core.io.io_utils import load_manifest, summarize_manifests
from stablelab.exceptions import AcceptanceError, ConfigError, StableLabError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_ACCEPTANCE = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stablelab",
        description="Potential-theory studies for stable and relativistic stable processes.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STUDIES:
        sp = sub.add_parser(name, help=f"run the {name} study")
        sp.add_argument("--config", required=True, help="YAML experiment config")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--workers", type=int, default=None, help="override the worker count")
        sp.add_argument("--out", default=None, help="override the output directory")
        sp.add_argument("--strict", action="store_true", help="treat acceptance failures as errors")
    rp = sub.add_parser("report", help="summarize one or more report bundles")
    rp.add_argument("manifests", nargs="+", help="manifest.json files or bundle directories")
    return parser


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity == 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def _report(paths: List[str]) -> int:
    try:
        manifests = [load_manifest(p) for p in paths]
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    for m in manifests:
        verdict = "PASS" if m.get("accepted") else "FAIL"
        print(f"{m['_path']}: {m.get('study')} {verdict} (seed={m.get('seed')}, walltime={m.get('walltime', 0):.2f}s)")
        for name, fit in (m.get("fits") or {}).items():
            flagged = "" if fit.get("accepted", True) else "  <-- flagged"
            shown = {k: v for k, v in fit.items() if k in ("c_hat", "gamma_hat", "accepted", "p_value", "mass")}
            print(f"  {name}: {shown}{flagged}")
    if len(manifests) > 1:
        with pd.option_context("display.width", 160, "display.max_columns", None):
            print(summarize_manifests(paths).to_string(index=False))
    return EXIT_OK if all(m.get("accepted") for m in manifests) else EXIT_ACCEPTANCE


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    if args.command == "report":
        return _report(args.manifests)
    try:
        cfg = load_config(args.config, study=args.command)
        cfg = cfg.with_overrides(seed=args.seed, workers=args.workers, out=args.out)
        outcome = run_study(cfg, strict=args.strict)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except AcceptanceError as exc:
        print(f"acceptance failure: {exc}", file=sys.stderr)
        return EXIT_ACCEPTANCE
    except StableLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(outcome.manifest)
    return EXIT_OK if outcome.result.accepted else EXIT_ACCEPTANCE


if __name__ == "__main__":
    sys.exit(main())
