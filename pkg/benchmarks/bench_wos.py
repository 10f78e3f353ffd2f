"""
Walk-on-spheres throughput.

Times Green-function estimates on the unit disc for a few worker counts and
checks that every run returns the same value.

    python benchmarks/bench_wos.py --walks 200000 --workers 1 2 4
"""

import argparse
import logging

from stablelab import Ball, StableParams, estimate_green
from stablelab.decorators import profile_execution

logger = logging.getLogger("stablelab.bench")


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--walks", type=int, default=100_000)
    parser.add_argument("--alpha", type=float, default=1.0)
    parser.add_argument("--workers", type=int, nargs="+", default=[1, 2, 4])
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    p = StableParams(2, args.alpha)
    ball = Ball((0.0, 0.0), 1.0)
    timed = profile_execution()(estimate_green)
    values = set()
    for workers in args.workers:
        res = timed(p, ball, (0.3, 0.0), (-0.2, 0.1), args.walks, seed=7, workers=workers)
        values.add(res.value)
        logger.info(
            "workers=%d  g=%.6g +- %.2g  %.0f walks/s",
            workers, res.value, res.stderr, args.walks / timed.last_walltime,
        )
    if len(values) != 1:
        logger.warning("estimates differ across worker counts: %s", sorted(values))


if __name__ == "__main__":
    main()
