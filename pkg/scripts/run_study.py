"""Run the bundled twelve-month study and print a short summary.

    python3 scripts/run_study.py --out results/ [--months 1..12] [--workers 1]

Writes the same CSV set as ``seasonplan study`` and then prints the monthly
cost differences for each comparison with their mean absolute value.
"""

import argparse
import logging
import time

import numpy as np

from seasonplan.cli import parse_months
from seasonplan.demand import load_demand
from seasonplan.experiments import COMPARISONS, run_study
from seasonplan.system import bundled_case, bundled_path


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", required=True)
    parser.add_argument("--months", type=parse_months, default=list(range(1, 13)))
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(message)s")

    case = bundled_case()
    observed = load_demand(bundled_path("demand_observed.csv"), case)
    history = load_demand(bundled_path("demand_history.csv"), case)
    start = time.perf_counter()
    report = run_study(case, observed, history, args.months, args.out, workers=args.workers)
    elapsed = time.perf_counter() - start

    for cid in COMPARISONS:
        pct = [p for p in report.pct(cid) if p is not None]
        if pct:
            cells = " ".join(f"{p:+.2f}" for p in pct)
            print(f"{cid:4s} cost %: {cells}  | mean |.| {np.mean(np.abs(pct)):.3f}")
    for model, (mean, total) in report.runtime().items():
        print(f"{model}: {mean:.2f}s per month ({total:.0f}s total)")
    print(f"study wall time {elapsed / 60:.1f} min, {len(report.failures)} failed jobs")
    for f in report.failures:
        print(f"  {f}")


if __name__ == "__main__":
    main()
