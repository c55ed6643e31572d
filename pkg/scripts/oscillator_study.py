"""Oscillator: certify the bundled gains, compare with the legacy gains, run a fresh design."""

import argparse
import time

from sporadic_observer.design import AllInfeasible, DesignRequest, default_delta_grid, design_min_gamma, two_stage_refine
from sporadic_observer.examples import oscillator, oscillator_gains, oscillator_legacy_gains
from sporadic_observer.hinf import hinf_necessary


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lambda-t", type=float, default=0.05)
    ap.add_argument("--T2", type=float, default=0.41)
    args = ap.parse_args()
    plant, grid = oscillator(), default_delta_grid()

    for name, gains in (("bundled", oscillator_gains()), ("legacy", oscillator_legacy_gains())):
        for lt in (args.lambda_t, 0.02, 0.01):
            t0 = time.perf_counter()
            try:
                r = two_stage_refine(plant, gains, grid, [args.T2], lt)
            except AllInfeasible:
                print(f"{name:8s} lambda_t={lt:<5g} infeasible")
                continue
            print(f"{name:8s} lambda_t={lt:<5g} gamma={r.gamma:9.4f} delta={r.delta:7.3f} "
                  f"hinf={hinf_necessary(plant, gains.L, lt):.4f} ({time.perf_counter() - t0:.1f} s)")
            break

    r = design_min_gamma(DesignRequest(plant, "PropPred", args.lambda_t, args.T2))
    print(f"PropPred design: gamma={r.gamma:.4f} delta={r.delta_selected:.3f}")
    print(f"  L = {r.gains.L.ravel()}, H = {r.gains.H.ravel()}")


if __name__ == "__main__":
    main()
