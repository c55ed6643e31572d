"""Dense log-det barrier solver for small LMI problems.

Phase 1 minimizes a common slack ``s`` with ``G_i(x) <= s I`` from ``x = 0``;
phase 2 (only when the problem has an objective) follows the central path of
``t c'x - sum log det(-G_i(x))`` from the phase-1 point.  A loose box
``|x_k| < box_radius`` keeps both phases bounded.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .affine import LmiProblem


class Status(str, enum.Enum):
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass(frozen=True)
class SolverOptions:
    max_iterations: int = 200  # barrier updates per phase
    tol: float = 1e-9
    reduction: float = 0.2  # barrier weight 1/t shrinks by this factor per update
    scaling: bool = True
    box_radius: float = 1e6
    newton_max: int = 60

    def __post_init__(self):
        if self.max_iterations < 1 or self.tol <= 0 or not (0 < self.reduction < 1):
            raise ValueError("invalid solver options")


@dataclass
class SdpSolution:
    status: Status
    point: dict[str, float]
    x: np.ndarray
    objective_value: float | None
    max_constraint_eig: float
    iterations: int
    slack: float  # final phase-1 slack (scaled units); positive means infeasible
    slack_history: list[float] = field(default_factory=list, repr=False)

    @property
    def feasible(self) -> bool:
        return self.status == Status.FEASIBLE


class _Blocks:
    """Constraint data restricted to the variables each block actually uses."""

    def __init__(self, problem: LmiProblem, scaling: bool):
        self.n = problem.n_vars
        self.items = []
        for c in problem.all_constraints():
            d = c.dimension
            idx = np.array(sorted({v.index for v, _ in c.terms}), dtype=int)
            coef = np.zeros((len(idx), d, d))
            where = {k: i for i, k in enumerate(idx)}
            for v, m in c.terms:
                coef[where[v.index]] += m
            s = max(c.scale(), 1e-300) if scaling else 1.0
            self.items.append((idx, c.constant / s, coef / s, d))
        self.units = sum(d for *_, d in self.items)

    def values(self, x: np.ndarray, s: float | None = None) -> list[np.ndarray]:
        out = []
        for idx, c0, coef, d in self.items:
            G = c0 + np.tensordot(x[idx], coef, axes=1) if len(idx) else c0.copy()
            if s is not None:
                G = G - s * np.eye(d)
            out.append(G)
        return out

    def max_eig(self, x: np.ndarray) -> float:
        return max(float(np.linalg.eigvalsh(G)[-1]) for G in self.values(x))


def _barrier(blocks: _Blocks, y: np.ndarray, phase1: bool, R: float, derivs: bool):
    """-sum log det(-G_i) - sum log(R^2 - x^2) with gradient/Hessian in y.

    In phase 1, y = (x, s) and each block is G_i(x) - s I.
    """
    n = blocks.n
    x = y[:n]
    s = y[n] if phase1 else None
    if np.any(np.abs(x) >= R):
        return np.inf, None, None
    val = -np.sum(np.log(R * R - x * x))
    m = len(y)
    g = np.zeros(m) if derivs else None
    H = np.zeros((m, m)) if derivs else None
    if derivs:
        r2 = R * R - x * x
        g[:n] += 2 * x / r2
        H[np.arange(n), np.arange(n)] += 2 * (R * R + x * x) / r2**2
    for (idx, c0, coef, d), G in zip(blocks.items, blocks.values(x, s)):
        try:
            Lc = np.linalg.cholesky(-G)
        except np.linalg.LinAlgError:
            return np.inf, None, None
        val -= 2 * np.sum(np.log(np.diag(Lc)))
        if not derivs:
            continue
        Linv = np.linalg.inv(Lc)
        if phase1:
            # coefficient of s in G - sI is -I
            mats = np.concatenate([coef, -np.eye(d)[None]], axis=0)
            ids = np.concatenate([idx, [n]])
        else:
            mats, ids = coef, idx
        if len(ids) == 0:
            continue
        At = Linv @ mats @ Linv.T
        Gm = At.reshape(len(ids), -1)
        g[ids] += np.trace(At, axis1=1, axis2=2)
        H[np.ix_(ids, ids)] += Gm @ Gm.T
    return val, g, H


def _newton_dir(H, g):
    try:
        Lc = np.linalg.cholesky(H)
        return -np.linalg.solve(Lc.T, np.linalg.solve(Lc, g))
    except np.linalg.LinAlgError:
        d, *_ = np.linalg.lstsq(H, -g, rcond=None)
        if not np.all(np.isfinite(d)):
            raise
        return d


def _center(blocks, y, c, t, phase1, opts, stop_negative_s=False):
    """Damped Newton on t c'y + barrier.  Returns (y, newton_steps, s_values)."""
    R = opts.box_radius
    steps = 0
    s_values = []
    for _ in range(opts.newton_max):
        f, g, H = _barrier(blocks, y, phase1, R, True)
        if not np.isfinite(f):
            raise FloatingPointError("iterate left the barrier domain")
        g = g + t * c
        d = _newton_dir(H, g)
        dec = -float(g @ d)
        if dec < 0:
            raise FloatingPointError("Newton direction is not a descent direction")
        if dec / 2 <= 1e-10:
            break
        f0 = f + t * float(c @ y)
        a = 1.0
        while True:
            yn = y + a * d
            fn, *_ = _barrier(blocks, yn, phase1, R, False)
            if np.isfinite(fn) and fn + t * float(c @ yn) <= f0 - 0.01 * a * dec:
                break
            a *= 0.5
            if a < 1e-14:
                return y, steps, s_values
        y = yn
        steps += 1
        if phase1:
            s_values.append(float(y[-1]))
            if stop_negative_s and y[-1] < -1e-13:
                break
    return y, steps, s_values


def solve(problem: LmiProblem, options: SolverOptions | None = None) -> SdpSolution:
    opts = options or SolverOptions()
    blocks = _Blocks(problem, opts.scaling)
    n = problem.n_vars
    if not blocks.items:
        raise ValueError("problem has no constraints")
    units = blocks.units + 2 * n
    iters = 0
    history: list[float] = []

    def finish(status, x, slack):
        obj = None if problem.objective is None else float(problem.objective @ x)
        r = residual(problem, x)
        return SdpSolution(status, {v.label: float(x[v.index]) for v in problem.variables}, x, obj,
                           float(max(r)), iters, slack, history)

    # phase 1
    x0 = np.zeros(n)
    s0 = max(float(np.linalg.eigvalsh(G)[-1]) for G in blocks.values(x0)) + 1.0
    y = np.concatenate([x0, [s0]])
    c1 = np.zeros(n + 1)
    c1[-1] = 1.0
    t = 1.0
    best = s0
    status = None
    try:
        for _ in range(opts.max_iterations):
            y, k, svals = _center(blocks, y, c1, t, True, opts, stop_negative_s=True)
            iters += k
            for sv in svals:
                best = min(best, sv)
                history.append(best)
            s = float(y[-1])
            if s < -1e-13:
                status = Status.FEASIBLE
                break
            gap = units / t
            if s - gap > 0 or gap < opts.tol:
                status = Status.INFEASIBLE
                break
            t /= opts.reduction
    except (FloatingPointError, np.linalg.LinAlgError):
        return finish(Status.NUMERICAL_FAILURE, y[:n], best)
    if status is None:
        return finish(Status.NUMERICAL_FAILURE, y[:n], best)
    if status == Status.INFEASIBLE:
        return finish(status, y[:n], float(y[-1]))
    x = y[:n]
    slack = float(y[-1])
    if problem.objective is None:
        return finish(Status.FEASIBLE, x, slack)

    # phase 2
    c = np.asarray(problem.objective, dtype=float)
    _, g, H = _barrier(blocks, x, False, opts.box_radius, True)
    Hc = _newton_dir(H, -c)  # H^{-1} c
    t = max(-float(g @ Hc) / max(float(c @ Hc), 1e-300), 1e-3)
    try:
        for _ in range(opts.max_iterations):
            x, k, _ = _center(blocks, x, c, t, False, opts)
            iters += k
            if units / t < opts.tol * max(1.0, abs(float(c @ x))):
                break
            t /= opts.reduction
        else:
            return finish(Status.NUMERICAL_FAILURE, x, slack)
    except (FloatingPointError, np.linalg.LinAlgError):
        return finish(Status.NUMERICAL_FAILURE, x, slack)
    return finish(Status.FEASIBLE, x, slack)


def residual(problem: LmiProblem, x) -> list[float]:
    """Largest eigenvalue of every constraint (including P > 0 blocks) at ``x``."""
    if isinstance(x, dict):
        x = np.array([x[v.label] for v in problem.variables])
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.n_vars,):
        raise ValueError(f"point has shape {x.shape}, expected ({problem.n_vars},)")
    return [float(np.linalg.eigvalsh(c.value(x))[-1]) for c in problem.all_constraints()]
