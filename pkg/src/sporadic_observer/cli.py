"""Command-line front end.

Exit codes: 0 feasible / pass, 2 infeasible / fail, 1 usage or numerical error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, ScenarioConfig
from .design import (AllInfeasible, DesignRequest, IllConditionedRecovery, InfeasibleAtLowerBound,
                     design_min_gamma, pareto_sweep, parse_grid, two_stage_refine)
from .lmi import DESIGN_METHODS, Certificate, build_design_problem, build_verification_problem
from .model import ObserverGains
from .sdpa import export_sdpa
from .sim import HybridState, SimulationError, simulate
from .svg import line_plot

COMMANDS = ("design", "verify", "simulate", "pareto", "export-sdpa")
log = logging.getLogger("sporadic_observer")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sporadic-observer", description="Observer design and verification under sporadic sampling.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="scenario JSON")
    p.add_argument("--out", help="output directory (default: config output.dir)")
    p.add_argument("--plot", action="store_true", help="also write SVG plots")
    p.add_argument("--seed", type=int, help="jitter seed override")
    p.add_argument("--method", choices=DESIGN_METHODS, help="design method override")
    p.add_argument("--delta-grid", help="'lo,hi,n,log|lin'")
    p.add_argument("--gains", help="gains JSON (or design JSON) for verify / simulate / export-sdpa")
    p.add_argument("--delta", type=float, help="delta used by export-sdpa (default: grid midpoint)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _jsonable(v):
    if isinstance(v, float) and not np.isfinite(v):
        return str(v)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.generic):
        return _jsonable(v.item())
    return v


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    print(f"wrote {path}")


def _load_gains(args, cfg: ScenarioConfig):
    if args.gains:
        data = json.loads(Path(args.gains).read_text())
        cert = Certificate.from_dict(data["certificate"]) if "certificate" in data else None
        return ObserverGains.from_dict(data.get("gains", data)), cert
    if cfg.gains is None:
        raise UsageError("no gains: pass --gains or add a 'gains' section to the config")
    return cfg.gains, None


def _request(cfg: ScenarioConfig, T2=None) -> DesignRequest:
    T2 = cfg.sampling.T2 if T2 is None else T2
    return DesignRequest(cfg.plant, cfg.method, cfg.lambda_t, T2, min(cfg.sampling.T1, T2), cfg.delta_grid,
                         cfg.gain_cap, cfg.gamma)


def _design(cfg, out, args) -> int:
    res = design_min_gamma(_request(cfg))
    doc = {"gains": res.gains.to_dict(), "certificate": res.certificate.to_dict(),
           "delta_selected": res.delta_selected, "design_gamma": res.design_gamma, "gamma": res.gamma,
           "solver": {"status": res.solution.status.value, "iterations": res.solution.iterations,
                      "objective": res.solution.objective_value},
           "report": json.loads(res.report.to_json())}
    _write(out / f"{cfg.prefix}design.json", json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")
    _write(out / f"{cfg.prefix}gains.json", json.dumps(res.gains.to_dict(), indent=2) + "\n")
    print(f"{cfg.method}: gamma = {res.gamma:.6g} at delta = {res.delta_selected:.6g}")
    return 0


def _verify(cfg, out, args) -> int:
    gains, _ = _load_gains(args, cfg)
    res = two_stage_refine(cfg.plant, gains, cfg.delta_grid, [cfg.sampling.T2], cfg.lambda_t)
    report = res.report
    _write(out / f"{cfg.prefix}verification.json", report.to_json() + "\n")
    ok = report.passed and (cfg.gamma is None or res.gamma <= cfg.gamma)
    print(f"verification {'passed' if ok else 'failed'}: gamma = {res.gamma:.6g} at delta = {res.delta:.6g}")
    return 0 if ok else 2


def _simulate(cfg, out, args) -> int:
    gains, cert = _load_gains(args, cfg)
    init = cfg.init or HybridState(np.zeros(cfg.plant.n_z), np.ones(cfg.plant.n_z), np.zeros(cfg.plant.n_y),
                                   cfg.sampling.T2)
    arc = simulate(cfg.plant, gains, init, cfg.signals(), cfg.jitter_sequence(args.seed), cfg.horizon, cfg.h_max)
    _write(out / f"{cfg.prefix}arc.csv", arc.to_csv(cert))
    if args.plot:
        series = {f"eps{i}": (arc.t, arc.eps[:, i]) for i in range(cfg.plant.n_z)}
        series["|x|_A"] = (arc.t, arc.distance())
        _write(out / f"{cfg.prefix}arc.svg", line_plot(series, "estimation error", "t", "value"))
    return 0


def _pareto(cfg, out, args) -> int:
    if cfg.T2_grid is None:
        raise UsageError("pareto needs sampling.T2_grid")
    curve = pareto_sweep(_request(cfg), cfg.T2_grid)
    _write(out / f"{cfg.prefix}pareto.csv", curve.to_csv())
    if args.plot:
        pts = curve.points
        _write(out / f"{cfg.prefix}pareto.svg",
               line_plot({cfg.method: ([p[0] for p in pts], [p[1] for p in pts])}, "tradeoff", "T2", "gamma"))
    if curve.infeasible:
        print("infeasible T2 values: " + ", ".join(f"{v:.6g}" for v in curve.infeasible))
    return 0 if curve.points else 2


def _export(cfg, out, args) -> int:
    grid = cfg.delta_grid
    delta = args.delta if args.delta is not None else float(grid[len(grid) // 2])
    if args.gains or (cfg.gains is not None and args.method is None):
        gains, _ = _load_gains(args, cfg)
        prob = build_verification_problem(cfg.plant, gains, cfg.lambda_t, delta, cfg.sampling.T2, cfg.gamma)
    else:
        prob = build_design_problem(cfg.plant, cfg.method, cfg.lambda_t, delta, cfg.sampling.T2, cfg.gamma,
                                    gain_norm_cap=cfg.gain_cap)
    _write(out / f"{cfg.prefix}problem.dat-s", export_sdpa(prob))
    return 0


HANDLERS = {"design": _design, "verify": _verify, "simulate": _simulate, "pareto": _pareto, "export-sdpa": _export}


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        cfg = ScenarioConfig.load(args.config)
        if args.method:
            cfg.method = args.method
        if args.delta_grid:
            cfg.delta_grid = parse_grid(args.delta_grid)
        if args.seed is not None:
            cfg.seed = args.seed
        out = Path(args.out or cfg.out_dir)
        return HANDLERS[args.command](cfg, out, args)
    except (AllInfeasible, InfeasibleAtLowerBound) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (UsageError, ConfigError, OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (IllConditionedRecovery, SimulationError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
