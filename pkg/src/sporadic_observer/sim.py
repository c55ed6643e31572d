"""Fixed-step RK4 simulation of the estimation-error hybrid system.

State ``x = (z, eps, theta_tilde, tau)``; the timer counts down, so a jump
happens exactly when ``tau`` hits zero and the next jump time is the current
one plus the reset value.  No event location is needed.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .lmi import Certificate
from .model import ObserverGains, PlantModel, assemble_error_matrices

JITTER_KINDS = ("deterministic", "uniform", "constant")


@dataclass(frozen=True)
class JitterSequence:
    kind: str
    T1: float
    T2: float
    seed: int = 0
    value: float | None = None

    def __post_init__(self):
        if self.kind not in JITTER_KINDS:
            raise ValueError(f"unknown jitter kind {self.kind!r}")
        if not (0 < self.T1 <= self.T2):
            raise ValueError("need 0 < T1 <= T2")
        if self.kind == "constant":
            v = self.T2 if self.value is None else self.value
            if not (self.T1 <= v <= self.T2):
                raise ValueError(f"constant reset {v} outside [{self.T1}, {self.T2}]")
            object.__setattr__(self, "value", float(v))


def next_reset(seq: JitterSequence, jump_time: float, jump_index: int = 0) -> float:
    """Timer value after the jump at ``jump_time``; always in [T1, T2]."""
    T1, T2 = seq.T1, seq.T2
    if seq.kind == "deterministic":
        v = 0.5 * (T2 - T1) * np.sin(10.0 * jump_time) + 0.5 * (T2 + T1)
    elif seq.kind == "uniform":
        # keyed on (seed, index) so draws do not depend on call order
        v = np.random.default_rng([seq.seed, jump_index]).uniform(T1, T2)
    else:
        v = seq.value
    return float(min(max(v, T1), T2))


@dataclass(frozen=True)
class HybridState:
    z: np.ndarray
    eps: np.ndarray
    theta_tilde: np.ndarray
    tau: float

    def __post_init__(self):
        for key in ("z", "eps", "theta_tilde"):
            object.__setattr__(self, key, np.atleast_1d(np.asarray(getattr(self, key), dtype=float)))
        object.__setattr__(self, "tau", float(self.tau))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.z, self.eps, self.theta_tilde, [self.tau]])

    @classmethod
    def from_vector(cls, x, n_z: int, n_y: int) -> "HybridState":
        x = np.asarray(x, dtype=float)
        return cls(x[:n_z], x[n_z:2 * n_z], x[2 * n_z:2 * n_z + n_y], x[-1])


def _zero(n):
    z = np.zeros(n)
    return lambda *_: z


@dataclass
class SignalSpec:
    """``w(t)`` acts during flows, ``eta(t)`` is read at each jump time."""

    w: Callable[[float], np.ndarray] | None = None
    eta: Callable[[float], np.ndarray] | None = None


@dataclass(frozen=True)
class HybridTimeDomain:
    intervals: tuple[tuple[float, float, int], ...]

    @property
    def jump_times(self) -> np.ndarray:
        return np.array([iv[1] for iv in self.intervals[:-1]])

    @property
    def end(self) -> tuple[float, int]:
        return self.intervals[-1][1], self.intervals[-1][2]


@dataclass(frozen=True)
class JumpRecord:
    t: float
    j: int  # counter before the jump
    pre: HybridState
    post: HybridState
    eta: np.ndarray


@dataclass
class HybridArc:
    n_z: int
    n_y: int
    t: np.ndarray
    j: np.ndarray
    side: list[str]
    x: np.ndarray  # rows (z, eps, theta_tilde, tau)
    w: np.ndarray
    jumps: list[JumpRecord]
    domain: HybridTimeDomain
    h: np.ndarray = field(default=None)  # step that produced each sample (0 at jumps)

    @property
    def z(self):
        return self.x[:, :self.n_z]

    @property
    def eps(self):
        return self.x[:, self.n_z:2 * self.n_z]

    @property
    def theta_tilde(self):
        return self.x[:, 2 * self.n_z:2 * self.n_z + self.n_y]

    @property
    def tau(self):
        return self.x[:, -1]

    def state(self, k: int) -> HybridState:
        return HybridState.from_vector(self.x[k], self.n_z, self.n_y)

    def distance(self) -> np.ndarray:
        return np.linalg.norm(self.x[:, self.n_z:-1], axis=1)

    def values_V(self, cert: Certificate) -> np.ndarray:
        return np.array([eval_V(cert, self.state(k)) for k in range(len(self.t))])

    def to_csv(self, cert: Certificate | None = None) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        head = ["t", "j", "side"] + [f"z{i}" for i in range(self.n_z)] + [f"eps{i}" for i in range(self.n_z)]
        head += [f"theta_tilde{i}" for i in range(self.n_y)] + ["tau", "dist_A", "V"]
        wr.writerow(head)
        dist = self.distance()
        V = self.values_V(cert) if cert is not None else np.full(len(self.t), np.nan)
        for k in range(len(self.t)):
            row = [f"{self.t[k]:.12g}", str(int(self.j[k])), self.side[k]]
            row += [f"{v:.12g}" for v in self.x[k]] + [f"{dist[k]:.12g}", f"{V[k]:.12g}"]
            wr.writerow(row)
        return buf.getvalue()


class SimulationError(RuntimeError):
    def __init__(self, t, j, message="non-finite state"):
        super().__init__(f"{message} at hybrid time (t={t:.6g}, j={j})")
        self.t, self.j = t, j


def distance_to_A(state: HybridState) -> float:
    return float(np.linalg.norm(np.concatenate([state.eps, state.theta_tilde])))


def eval_V(cert: Certificate, state: HybridState) -> float:
    e, th = state.eps, state.theta_tilde
    return float(e @ cert.P1 @ e + np.exp(cert.delta * state.tau) * th @ cert.P2 @ th)


def _rk4(f, t, x, h):
    # overflow surfaces as a non-finite state, which the caller reports
    with np.errstate(over="ignore", invalid="ignore"):
        k1 = f(t, x)
        k2 = f(t + h / 2, x + h / 2 * k1)
        k3 = f(t + h / 2, x + h / 2 * k2)
        k4 = f(t + h, x + h * k3)
        return x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def default_step(plant: PlantModel, gains: ObserverGains, T1: float) -> float:
    """T1/50, shortened so RK4 stays well inside its stability region for stiff (high-gain) loops."""
    F = assemble_error_matrices(plant, gains).F
    rate = max(float(np.max(np.abs(np.linalg.eigvals(F)))), float(np.max(np.abs(np.linalg.eigvals(plant.A)))))
    if not plant.is_linear:
        rate += plant.lipschitz_ell * np.linalg.norm(plant.B, 2) * np.linalg.norm(plant.S, 2) * (1 + np.linalg.norm(plant.C, 2))
    return min(T1 / 50.0, 1.0 / rate) if rate > 0 else T1 / 50.0


def error_flow(plant: PlantModel, gains: ObserverGains, w_fn=None):
    """Flow map of (z, eps, theta_tilde, tau) as ``f(t, x)``."""
    mats = assemble_error_matrices(plant, gains)
    n_z = plant.n_z
    A, B, S, N = plant.A, plant.B, plant.S, plant.N
    F, Q, T = mats.F, mats.Q, mats.Tmat
    w_fn = w_fn or _zero(plant.n_w)

    def f(t, x):
        z = x[:n_z]
        e = x[n_z:-1]
        w = np.asarray(w_fn(t), dtype=float).reshape(plant.n_w)
        dz = A @ z + N @ w
        de = F @ e + T @ w
        if not plant.is_linear:
            dz = dz + B @ plant.nonlinearity(S @ z)
            de = de + Q @ plant.zeta(z, x[n_z:2 * n_z])
        return np.concatenate([dz, de, [-1.0]])

    return f


def simulate(plant: PlantModel, gains: ObserverGains, init: HybridState, signals: SignalSpec | None,
             jitter: JitterSequence, horizon: tuple[float, int], h_max: float | None = None) -> HybridArc:
    """Integrate flows with RK4 and apply the sampling jump whenever tau reaches zero."""
    signals = signals or SignalSpec()
    w_fn = signals.w or _zero(plant.n_w)
    eta_fn = signals.eta or _zero(plant.n_y)
    mats = assemble_error_matrices(plant, gains)
    n_z, n_y = plant.n_z, plant.n_y
    t_max, j_max = float(horizon[0]), int(horizon[1])
    h_max = float(h_max or default_step(plant, gains, jitter.T1))
    if not (0.0 <= init.tau <= jitter.T2 + 1e-15):
        raise ValueError(f"initial timer {init.tau} outside [0, {jitter.T2}]")
    f = error_flow(plant, gains, w_fn)

    x = init.as_vector()
    t, j = 0.0, 0
    ts, js, sides, xs, ws, hs = [], [], [], [], [], []
    jumps: list[JumpRecord] = []
    intervals = []
    t_start = 0.0

    def record(side, h):
        ts.append(t)
        js.append(j)
        sides.append(side)
        xs.append(x.copy())
        ws.append(np.asarray(w_fn(t), dtype=float).reshape(plant.n_w))
        hs.append(h)

    record("flow", 0.0)
    while True:
        if x[-1] <= 0.0:
            if j >= j_max:
                break
            eta = np.asarray(eta_fn(t), dtype=float).reshape(n_y)
            pre = x.copy()
            record("pre-jump", 0.0)
            intervals.append((t_start, t, j))
            e = mats.Gjump @ x[n_z:-1] + mats.Njump @ eta
            x = np.concatenate([x[:n_z], e, [next_reset(jitter, t, j)]])
            jumps.append(JumpRecord(t, j, HybridState.from_vector(pre, n_z, n_y),
                                    HybridState.from_vector(x, n_z, n_y), eta))
            j += 1
            t_start = t
            record("post-jump", 0.0)
            continue
        if t >= t_max:
            break
        # flow until the timer expires or the horizon ends
        t_end = t + x[-1]
        tau_stop = max(t_end - t_max, 0.0)
        while x[-1] > tau_stop:
            tau_prev = x[-1]
            h = min(tau_prev - tau_stop, h_max)
            x = _rk4(f, t, x, h)
            # the timer is advanced exactly; time is read off the timer
            x[-1] = tau_stop if h == tau_prev - tau_stop else tau_prev - h
            t = t_end - x[-1]
            if not np.all(np.isfinite(x)):
                raise SimulationError(t, j)
            record("flow", h)
        if tau_stop > 0:
            t = t_max
            break
    intervals.append((t_start, t, j))
    return HybridArc(n_z, n_y, np.array(ts), np.array(js), sides, np.array(xs), np.array(ws), jumps,
                     HybridTimeDomain(tuple(intervals)), np.array(hs))


@dataclass
class ObserverArc:
    t: np.ndarray
    j: np.ndarray
    side: list[str]
    z: np.ndarray
    zhat: np.ndarray
    theta: np.ndarray
    tau: np.ndarray

    def error_coordinates(self, plant: PlantModel) -> tuple[np.ndarray, np.ndarray]:
        eps = self.z - self.zhat
        return eps, eps @ plant.C.T - self.theta


def simulate_observer_coordinates(plant: PlantModel, gains: ObserverGains, z0, zhat0, theta0, tau0: float,
                                  signals: SignalSpec | None, jitter: JitterSequence,
                                  horizon: tuple[float, int], h_max: float | None = None) -> ObserverArc:
    """Plant plus observer in original coordinates, on the same step schedule as :func:`simulate`."""
    signals = signals or SignalSpec()
    w_fn = signals.w or _zero(plant.n_w)
    eta_fn = signals.eta or _zero(plant.n_y)
    n_z, n_y = plant.n_z, plant.n_y
    A, B, S, N, C = plant.A, plant.B, plant.S, plant.N, plant.C
    L, H = gains.L, gains.H
    t_max, j_max = float(horizon[0]), int(horizon[1])
    h_max = float(h_max or default_step(plant, gains, jitter.T1))

    def f(t, x):
        z, zh, th = x[:n_z], x[n_z:2 * n_z], x[2 * n_z:-1]
        w = np.asarray(w_fn(t), dtype=float).reshape(plant.n_w)
        dz = A @ z + N @ w
        dzh = A @ zh + L @ th
        if not plant.is_linear:
            dz = dz + B @ plant.nonlinearity(S @ z)
            dzh = dzh + B @ plant.nonlinearity(S @ zh)
        return np.concatenate([dz, dzh, H @ th, [-1.0]])

    x = np.concatenate([np.ravel(z0), np.ravel(zhat0), np.ravel(theta0), [tau0]]).astype(float)
    t, j = 0.0, 0
    rows, ts, js, sides = [x.copy()], [t], [j], ["flow"]
    while True:
        if x[-1] <= 0.0:
            if j >= j_max:
                break
            rows.append(x.copy()), ts.append(t), js.append(j), sides.append("pre-jump")
            eta = np.asarray(eta_fn(t), dtype=float).reshape(n_y)
            y = C @ x[:n_z] + eta
            x = np.concatenate([x[:2 * n_z], y - C @ x[n_z:2 * n_z], [next_reset(jitter, t, j)]])
            j += 1
            rows.append(x.copy()), ts.append(t), js.append(j), sides.append("post-jump")
            continue
        if t >= t_max:
            break
        t_end = t + x[-1]
        tau_stop = max(t_end - t_max, 0.0)
        while x[-1] > tau_stop:
            tau_prev = x[-1]
            h = min(tau_prev - tau_stop, h_max)
            x = _rk4(f, t, x, h)
            # the timer is advanced exactly; time is read off the timer
            x[-1] = tau_stop if h == tau_prev - tau_stop else tau_prev - h
            t = t_end - x[-1]
            if not np.all(np.isfinite(x)):
                raise SimulationError(t, j)
            rows.append(x.copy()), ts.append(t), js.append(j), sides.append("flow")
        if tau_stop > 0:
            break
    X = np.array(rows)
    return ObserverArc(np.array(ts), np.array(js), sides, X[:, :n_z], X[:, n_z:2 * n_z], X[:, 2 * n_z:-1],
                       X[:, -1])
