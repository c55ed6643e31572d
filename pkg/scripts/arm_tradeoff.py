"""Flexible arm: largest certified T2 for the predictor gains and the per-method tradeoff curves."""

import argparse
from pathlib import Path

import numpy as np

from sporadic_observer.design import DesignRequest, maximize_T2, pareto_sweep
from sporadic_observer.examples import arm_delta_grid, flexible_arm, flexible_arm_predictor_gains
from sporadic_observer.svg import line_plot

METHODS = ("PropPred", "PropX80", "PropX8X6", "ZOH")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", type=int, default=5)
    ap.add_argument("--deltas", type=int, default=25)
    ap.add_argument("--out", default="arm_out")
    ap.add_argument("--skip-search", action="store_true")
    args = ap.parse_args()
    plant, out = flexible_arm(), Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if not args.skip_search:
        req = DesignRequest(plant, "Predictor", 0.01, 0.3, delta_grid=arm_delta_grid())
        s = maximize_T2(req, 0.01, 0.3, gains=flexible_arm_predictor_gains(plant))
        print(f"predictor gains: T2* = {s.T2_star:.5f}, gamma = {s.result.gamma:.4g}")

    deltas = np.linspace(1.0, 100.0, args.deltas)
    T2s = np.linspace(0.01, 0.3, args.points)
    series = {}
    for m in METHODS:
        curve = pareto_sweep(DesignRequest(plant, m, 0.01, 0.3, delta_grid=deltas), T2s)
        (out / f"pareto_{m}.csv").write_text(curve.to_csv())
        series[m] = ([p[0] for p in curve.points], [p[1] for p in curve.points])
        best = max((p[0] for p in curve.points), default=float("nan"))
        print(f"{m:9s} {len(curve.points)} feasible points, largest T2 {best:.4g}")
    (out / "pareto.svg").write_text(line_plot(series, "gamma against T2", "T2", "gamma"))
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
