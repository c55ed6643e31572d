"""Grid, bisection and sweep drivers over the design and verification LMIs."""

from __future__ import annotations

import csv
import dataclasses
import io
import logging
from dataclasses import dataclass, field

import numpy as np

from .affine import LmiProblem
from .lmi import (DESIGN_METHODS, Certificate, DeltaRangeError, build_design_problem,
                  build_verification_problem, certificate_from_solution)
from .model import ObserverGains, PlantModel
from .sdp import SdpSolution, SolverOptions, solve
from .verify import VerificationReport, verify_certificate

log = logging.getLogger(__name__)

COND_LIMIT = 1e12
MAX_DELTA_T2 = 50.0  # exp(delta*T2) beyond this leaves no usable precision in the T2 condition


def default_delta_grid() -> np.ndarray:
    return np.logspace(-2, 3, 50)


def parse_grid(spec: str) -> np.ndarray:
    """'lo,hi,n,log|lin' -> ascending grid."""
    parts = [p.strip() for p in spec.split(",")]
    if len(parts) != 4 or parts[3] not in ("log", "lin"):
        raise ValueError(f"grid spec must be 'lo,hi,n,log|lin', got {spec!r}")
    lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    if not (0 < lo <= hi) or n < 1:
        raise ValueError(f"bad grid bounds in {spec!r}")
    return np.geomspace(lo, hi, n) if parts[3] == "log" else np.linspace(lo, hi, n)


class AllInfeasible(RuntimeError):
    def __init__(self, message, margins: dict | None = None):
        super().__init__(message)
        self.margins = margins or {}


class InfeasibleAtLowerBound(RuntimeError):
    pass


class IllConditionedRecovery(RuntimeError):
    def __init__(self, name, cond):
        super().__init__(f"{name} has condition number {cond:.3g} > {COND_LIMIT:.0e}")
        self.condition = cond


@dataclass
class DesignRequest:
    plant: PlantModel
    method: str
    lambda_t: float
    T2: float
    T1: float | None = None
    delta_grid: np.ndarray = field(default_factory=default_delta_grid)
    gain_norm_cap: float | None = None
    fixed_gamma: float | None = None
    solver: SolverOptions = field(default_factory=SolverOptions)
    backoff: float = 1e-2  # relative gamma slack used to re-center before gain recovery

    def __post_init__(self):
        grid = np.asarray(self.delta_grid, dtype=float)
        if grid.size == 0 or np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
            raise ValueError("delta grid must be nonempty, positive and strictly ascending")
        self.delta_grid = grid
        if self.method not in DESIGN_METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.T1 is not None and self.T1 > self.T2:
            raise ValueError("T1 must not exceed T2")

    def with_T2(self, T2: float) -> "DesignRequest":
        T1 = None if self.T1 is None else min(self.T1, T2)
        return dataclasses.replace(self, T2=T2, T1=T1)


@dataclass
class DesignResult:
    gains: ObserverGains
    certificate: Certificate
    solution: SdpSolution
    delta_selected: float
    design_gamma: float  # optimum of the relaxation before re-centering
    report: VerificationReport

    @property
    def gamma(self) -> float:
        return self.certificate.gamma


def _matrix(point: dict, name: str) -> np.ndarray:
    keys = [k for k in point if k.startswith(name + "[")]
    if not keys:
        raise KeyError(name)
    idx = [tuple(int(p) for p in k[len(name) + 1:-1].split("][")) for k in keys]
    r = max(i for i, _ in idx) + 1
    c = max(j for _, j in idx) + 1
    out = np.zeros((r, c))
    for k, (i, j) in zip(keys, idx):
        out[i, j] = point[k]
    if all(i <= j for i, j in idx) and r == c:  # symmetric storage
        out = out + np.triu(out, 1).T
    return out


def _solve_checked(M: np.ndarray, rhs: np.ndarray, name: str) -> np.ndarray:
    cond = float(np.linalg.cond(M))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise IllConditionedRecovery(name, cond)
    return np.linalg.solve(M, rhs)


def recover_gains(method: str, solution: SdpSolution | dict, plant: PlantModel) -> ObserverGains:
    """Map a feasible design point back to observer gains (L, H)."""
    point = solution.point if isinstance(solution, SdpSolution) else solution
    C = plant.C
    if method in ("PropPred", "Predictor"):
        L = _solve_checked(_matrix(point, "P1"), _matrix(point, "J"), "P1")
        if method == "Predictor":
            return ObserverGains.predictor(plant, L, method="Predictor")
        Yt = _matrix(point, "Y").T
        H = _solve_checked(_matrix(point, "P2"), Yt, "P2") - C @ L
        return ObserverGains(L, H, method)
    if method in ("PropX80", "PropX8X6", "ZOH"):
        L = _solve_checked(_matrix(point, "X").T, _matrix(point, "J"), "X")
        if method == "ZOH":
            return ObserverGains.zoh(L)
        H = _solve_checked(_matrix(point, "U").T, _matrix(point, "W"), "U")
        return ObserverGains(L, H, method)
    raise ValueError(f"unknown method {method!r}")


def _feasibility_version(problem: LmiProblem) -> LmiProblem:
    return dataclasses.replace(problem, objective=None)


def _usable(delta: float, T2: float) -> bool:
    return delta * T2 <= MAX_DELTA_T2


def _finalize(req: DesignRequest, delta: float, sol: SdpSolution, prob: LmiProblem) -> DesignResult:
    """Re-center at a slightly relaxed gamma, recover gains, and certify them directly."""
    plant = req.plant
    design_cert = certificate_from_solution(prob, sol.x)
    if req.fixed_gamma is None and req.backoff > 0:
        g = design_cert.gamma * (1 + req.backoff)
        p2 = build_design_problem(plant, req.method, req.lambda_t, delta, req.T2, g,
                                  gain_norm_cap=req.gain_norm_cap)
        s2 = solve(p2, req.solver)
        if s2.feasible:
            sol, prob = s2, p2
    gains = recover_gains(req.method, sol, plant)
    # second stage: certificate for the recovered gains at the same (delta, T2)
    vp = build_verification_problem(plant, gains, req.lambda_t, delta, req.T2, req.fixed_gamma)
    vs = solve(vp, req.solver)
    candidates = [certificate_from_solution(prob, sol.x)]
    if vs.feasible:
        candidates.append(certificate_from_solution(vp, vs.x))
    # keep the smallest gamma that survives the independent check
    best = None
    for cert in candidates:
        report = verify_certificate(plant, gains, cert)
        if report.passed and (best is None or cert.gamma < best[0].gamma):
            best = (cert, report)
    if best is None:
        raise AllInfeasible(f"recovered gains at delta={delta:.4g} fail verification "
                            f"(max eig {report.grid_max_eig:.3g})")
    return DesignResult(gains, best[0], sol, float(delta), design_cert.gamma, best[1])


def _design_sweep(req: DesignRequest, stop_at_first: bool = False):
    """Solve the design problem at every usable delta; return feasible (gamma, delta, sol, prob) and margins."""
    feasible, margins = [], {}
    for delta in req.delta_grid:
        if not _usable(delta, req.T2):
            margins[float(delta)] = float("nan")
            continue
        try:
            prob = build_design_problem(req.plant, req.method, req.lambda_t, delta, req.T2, req.fixed_gamma,
                                        gain_norm_cap=req.gain_norm_cap)
        except DeltaRangeError:
            margins[float(delta)] = float("nan")
            continue
        if stop_at_first:
            prob = _feasibility_version(prob)
        sol = solve(prob, req.solver)
        margins[float(delta)] = sol.slack
        if sol.feasible:
            gamma = certificate_from_solution(prob, sol.x).gamma
            feasible.append((gamma, float(delta), sol, prob))
            if stop_at_first:
                break
    return feasible, margins


def design_min_gamma(req: DesignRequest) -> DesignResult:
    """Smallest certified gamma over the delta grid (ties: smaller gamma, then smaller delta)."""
    feasible, margins = _design_sweep(req)
    if not feasible:
        raise AllInfeasible(f"{req.method}: infeasible at every delta (T2={req.T2})", margins)
    feasible.sort(key=lambda r: (r[0], r[1]))
    errors = []
    for gamma, delta, sol, prob in feasible:
        try:
            return _finalize(req, delta, sol, prob)
        except (AllInfeasible, IllConditionedRecovery) as exc:
            errors.append(str(exc))
            log.info("delta=%g rejected: %s", delta, exc)
    raise AllInfeasible(f"{req.method}: no feasible delta yields verifiable gains: {errors[:3]}", margins)


def _verification_feasible(plant, gains, lambda_t, T2, deltas, solver, fixed_gamma=None) -> float | None:
    for delta in deltas:
        if not _usable(delta, T2):
            continue
        prob = _feasibility_version(build_verification_problem(plant, gains, lambda_t, delta, T2, fixed_gamma))
        if solve(prob, solver).feasible:
            return float(delta)
    return None


@dataclass
class T2Search:
    T2_star: float
    result: DesignResult | "RefineResult"
    bracket: tuple[float, float]
    upper_capped: bool


def maximize_T2(req: DesignRequest, lo: float, hi: float, *, gains: ObserverGains | None = None,
                rel_width: float = 1e-4) -> T2Search:
    """Bisect on T2 for the largest value with a feasible (design or, given gains, verification) problem.

    Each probe tries every delta of the grid before declaring T2 infeasible.
    """
    if not (0 < lo <= hi):
        raise ValueError("need 0 < lo <= hi")

    def feasible(T2: float) -> bool:
        if gains is not None:
            return _verification_feasible(req.plant, gains, req.lambda_t, T2, req.delta_grid, req.solver,
                                          req.fixed_gamma) is not None
        found, _ = _design_sweep(req.with_T2(T2), stop_at_first=True)
        return bool(found)

    def result_at(T2):
        if gains is not None:
            return two_stage_refine(req.plant, gains, req.delta_grid, [T2], req.lambda_t, req.solver)
        return design_min_gamma(req.with_T2(T2))

    if not feasible(lo):
        raise InfeasibleAtLowerBound(f"infeasible at the lower end T2={lo}")
    if lo == hi or feasible(hi):
        return T2Search(hi, result_at(hi), (hi, hi), True)
    a, b = lo, hi
    while b - a >= rel_width * hi:
        mid = 0.5 * (a + b)
        if feasible(mid):
            a = mid
        else:
            b = mid
        log.debug("T2 bracket [%g, %g]", a, b)
    # the stored result must verify; step down inside the bracket if the final solve disagrees
    try:
        res = result_at(a)
    except AllInfeasible:
        res = result_at(a * (1 - rel_width))
        a = a * (1 - rel_width)
    return T2Search(a, res, (a, b), False)


@dataclass
class TradeoffCurve:
    method: str
    points: list[tuple[float, float, DesignResult]]
    infeasible: list[float]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["T2", "gamma", "delta", "method"])
        for T2, gamma, res in self.points:
            w.writerow([f"{T2:.12g}", f"{gamma:.12g}", f"{res.delta_selected:.12g}", self.method])
        return buf.getvalue()


def pareto_sweep(req: DesignRequest, T2_grid) -> TradeoffCurve:
    """One gamma minimization per T2 value; infeasible values are listed, not raised."""
    grid = np.asarray(T2_grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty T2 grid")
    points, bad = [], []
    for T2 in np.unique(grid):
        try:
            res = design_min_gamma(req.with_T2(float(T2)))
        except AllInfeasible:
            bad.append(float(T2))
            continue
        points.append((float(T2), res.gamma, res))
    return TradeoffCurve(req.method, points, bad)


@dataclass
class RefineResult:
    T2: float
    gamma: float
    certificate: Certificate
    delta: float
    report: VerificationReport
    gains: ObserverGains

    @property
    def delta_selected(self) -> float:
        return self.delta


def two_stage_refine(plant: PlantModel, gains: ObserverGains, delta_grid, T2_grid, lambda_t: float,
                     solver: SolverOptions | None = None) -> RefineResult:
    """Largest T2 of the grid at which fixed gains verify, and the smallest gamma there."""
    solver = solver or SolverOptions()
    margins = {}
    for T2 in sorted(np.asarray(T2_grid, dtype=float), reverse=True):
        best = None
        for delta in np.asarray(delta_grid, dtype=float):
            if not _usable(delta, T2):
                continue
            prob = build_verification_problem(plant, gains, lambda_t, float(delta), float(T2))
            sol = solve(prob, solver)
            margins[(float(T2), float(delta))] = sol.slack
            if not sol.feasible:
                continue
            cert = certificate_from_solution(prob, sol.x)
            if best is None or (cert.gamma, delta) < (best[0].gamma, best[1]):
                best = (cert, float(delta))
        if best is not None:
            cert, delta = best
            report = verify_certificate(plant, gains, cert)
            return RefineResult(float(T2), cert.gamma, cert, delta, report, gains)
    raise AllInfeasible("fixed gains are not certified at any (delta, T2) grid point", margins)
