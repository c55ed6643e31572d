"""Independent checks of certificates and simulated arcs.

Nothing here calls the SDP solver: certificates are judged by dense symmetric
eigenvalue computations, and arcs by comparing recorded samples with the
explicit bounds a valid certificate implies.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .affine import LmiProblem
from .hinf import hinf_necessary
from .lmi import Certificate, certificate_from_solution, eval_M
from .model import ObserverGains, PlantModel, SamplingSpec
from .sim import HybridArc, HybridState, JitterSequence, SignalSpec, error_flow, eval_V, simulate

EIG_RTOL = 1e-7
TAU_GRID = 100


@dataclass
class VerificationReport:
    eig_at_0: float
    eig_at_T2: float
    grid_max_eig: float
    hinf_lower_bound: float
    gamma: float
    tolerance: float
    status: str
    margins: dict = field(default_factory=dict)
    flow_rate: float | None = None

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_json(self) -> str:
        def clean(v):
            if isinstance(v, float) and not np.isfinite(v):
                return str(v)
            return v
        d = {k: clean(v) for k, v in asdict(self).items()}
        d["margins"] = {k: clean(v) for k, v in self.margins.items()}
        return json.dumps(d, indent=2, sort_keys=True)


def verify_certificate(plant: PlantModel, gains: ObserverGains, cert: Certificate,
                       n_grid: int = TAU_GRID) -> VerificationReport:
    """Eigenvalue check of the dissipation matrix on [0, T2] plus the H-infinity lower bound."""
    include_w = bool(np.isfinite(cert.gamma))
    taus = np.linspace(0.0, cert.T2, n_grid)
    mats = [eval_M(plant, gains, cert, t, include_w) for t in taus]
    eigs = np.array([np.linalg.eigvalsh(M)[-1] for M in mats])
    scale = max(float(np.max(np.abs(mats[0]))), float(np.max(np.abs(mats[-1]))))
    tol = EIG_RTOL * (1.0 + scale)
    hinf = hinf_necessary(plant, gains.L, cert.lambda_t) if include_w else 0.0
    gamma_margin = cert.gamma - hinf * (1 - 1e-6) if include_w else float("inf")
    eig_margin = tol - float(eigs.max())
    ok = eig_margin >= 0 and gamma_margin >= 0 and cert.is_positive()
    rate = None
    if ok and cert.lambda_t == 0.0 and eigs.max() < 0:
        rate = zero_rate_decay(plant, gains, cert, n_grid)
    return VerificationReport(float(eigs[0]), float(eigs[-1]), float(eigs.max()), float(hinf), cert.gamma, tol,
                              "pass" if ok else "fail", {"eig": eig_margin, "gamma": gamma_margin}, rate)


def sandwich_constants(cert: Certificate) -> tuple[float, float]:
    """(rho1, rho2) with rho1 |x|_A^2 <= V(x) <= rho2 |x|_A^2 for tau in [0, T2]."""
    e1, e2 = np.linalg.eigvalsh(cert.P1), np.linalg.eigvalsh(cert.P2)
    rho1 = min(e1[0], e2[0])
    rho2 = max(e1[-1], e2[-1] * np.exp(cert.delta * cert.T2))
    return float(rho1), float(rho2)


@dataclass(frozen=True)
class IssConstants:
    rho1: float
    rho2: float
    lam: float
    omega: float
    kappa: float
    noise_gain: float
    omega2: float


def iss_constants(cert: Certificate, T1: float) -> IssConstants:
    """Constants of the max-form exponential ISS bound implied by a certificate."""
    if T1 <= 0 or cert.lambda_t <= 0:
        raise ValueError("need T1 > 0 and a positive decay rate")
    rho1, rho2 = sandwich_constants(cert)
    lt = cert.lambda_t
    lam = lt * T1 / (1 + T1)
    omega = lam
    kappa = 2 * np.sqrt(rho2 / rho1) * np.exp(omega)
    omega2 = float(np.linalg.eigvalsh(cert.P2)[-1] * np.exp(cert.delta * cert.T2))
    w_term = cert.gamma / np.sqrt(2 * lt * rho1)
    eta_term = np.sqrt(omega2 * np.exp(4 * lt * T1) / (np.expm1(2 * lt * T1) * rho1))
    return IssConstants(rho1, rho2, lam, omega, float(kappa), float(2 * max(w_term, eta_term)), omega2)


@dataclass
class BoundCheck:
    passed: bool
    worst_margin: float
    worst_index: int


def check_iss_bound(arc: HybridArc, constants: IssConstants, input_sup_norm: float,
                    atol: float = 1e-9) -> BoundCheck:
    """|x(t,j)|_A <= max(kappa exp(-lam (t+j)) |x(0,0)|_A, noise_gain ||u||) at every sample."""
    d = arc.distance()
    bound = np.maximum(constants.kappa * np.exp(-constants.lam * (arc.t + arc.j)) * d[0],
                       constants.noise_gain * input_sup_norm)
    margin = bound + atol * (1 + d[0]) - d
    k = int(np.argmin(margin))
    return BoundCheck(bool(margin[k] >= 0), float(margin[k]), k)


def check_decay(arc: HybridArc, cert: Certificate, rel: float = 1e-3) -> BoundCheck:
    """V(t, j) <= exp(-2 lambda_t t) V(0, 0) (1 + rel) along a disturbance-free arc."""
    V = arc.values_V(cert)
    bound = np.exp(-2 * cert.lambda_t * arc.t) * V[0] * (1 + rel)
    margin = bound + 1e-14 * V[0] - V
    k = int(np.argmin(margin))
    return BoundCheck(bool(margin[k] >= 0), float(margin[k]), k)


def _flow_derivative(f, t, x, cert: Certificate, n_z: int, n_y: int, step: float) -> float:
    """Central difference of V along the flow vector at one state."""
    v = f(t, x)

    def V(y):
        return eval_V(cert, HybridState.from_vector(y, n_z, n_y))

    return (V(x + step * v) - V(x - step * v)) / (2 * step)


@dataclass
class DissipationCheck:
    max_violation: float  # worst (dV/dt - rhs - slack); <= 0 means the inequality holds
    worst_index: int
    n_checked: int

    @property
    def passed(self) -> bool:
        return self.max_violation <= 0


def check_flow_dissipation(arc: HybridArc, plant: PlantModel, gains: ObserverGains, cert: Certificate,
                           worst_case_w: bool = False) -> DissipationCheck:
    """dV/dt <= -2 lambda_t V - |Cp eps|^2 + gamma^2 |w|^2 at every flow sample.

    The derivative is a central difference along the flow vector; ``worst_case_w``
    replaces the recorded disturbance by the one maximizing the left side minus
    the right side, which is what a too-small gamma cannot absorb.
    """
    n_z, n_y = arc.n_z, arc.n_y
    mats_T = np.vstack([plant.N, plant.C @ plant.N])
    worst, k_worst, n = -np.inf, -1, 0
    h_sim = float(np.max(arc.h)) if arc.h is not None and len(arc.h) else 1e-3
    for k in range(len(arc.t)):
        if arc.side[k] != "flow" or arc.x[k, -1] <= 0:
            continue
        x = arc.x[k]
        if worst_case_w:
            e, th = x[n_z:2 * n_z], x[2 * n_z:-1]
            grad = np.concatenate([2 * cert.P1 @ e, 2 * np.exp(cert.delta * x[-1]) * cert.P2 @ th])
            w = mats_T.T @ grad / (2 * cert.gamma**2)
        else:
            w = arc.w[k]
        f = error_flow(plant, gains, lambda t, w=w: w)
        step = 1e-6 / max(1.0, float(np.linalg.norm(f(arc.t[k], x))))
        dV = _flow_derivative(f, arc.t[k], x, cert, n_z, n_y, step)
        Vk = eval_V(cert, HybridState.from_vector(x, n_z, n_y))
        yp = plant.Cp @ x[n_z:2 * n_z]
        rhs = -2 * cert.lambda_t * Vk - yp @ yp + cert.gamma**2 * (w @ w)
        scale = max(1.0, abs(dV), abs(2 * cert.lambda_t * Vk), yp @ yp, cert.gamma**2 * (w @ w))
        slack = 1e-4 * scale * h_sim
        viol = dV - rhs - slack
        n += 1
        if viol > worst:
            worst, k_worst = viol, k
    return DissipationCheck(float(worst), k_worst, n)


def estimate_l2_gain(plant: PlantModel, gains: ObserverGains, sampling: SamplingSpec, w_signal,
                     horizon: float, jitter: JitterSequence | None = None, max_jumps: int = 10**7) -> float:
    """sqrt(int |Cp eps|^2) / sqrt(int |w|^2) from zero initial error with no measurement noise."""
    jitter = jitter or JitterSequence("deterministic", sampling.T1, sampling.T2)
    init = HybridState(np.zeros(plant.n_z), np.zeros(plant.n_z), np.zeros(plant.n_y), sampling.T2)
    arc = simulate(plant, gains, init, SignalSpec(w=w_signal), jitter, (horizon, max_jumps))
    # rows sharing a jump time form zero-width trapezoids, so jumps carry no measure
    t = arc.t
    yp = np.sum((arc.eps @ plant.Cp.T) ** 2, axis=1)
    ew = _trapz(np.sum(arc.w**2, axis=1), t)
    if ew <= 0:
        raise ValueError("input has zero energy on the horizon")
    return float(np.sqrt(_trapz(yp, t) / ew))


def _trapz(y, t) -> float:
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(t)))


@dataclass
class DomainCheck:
    passed: bool
    rate_margin: float
    sum_margin: float
    count_margin: float


def domain_bounds_check(jump_times, t_end: float, lambda_t: float, T1: float, lam: float,
                        omega: float) -> DomainCheck:
    """Check the three hybrid-time-domain inequalities at every interval endpoint.

    * ``-lambda_t t <= omega - lam (t + j)``
    * ``sum_{i<=j} exp(-2 lambda_t (t - t_i)) <= exp(4 lambda_t T1) / (exp(2 lambda_t T1) - 1)``
    * ``j <= t / T1 + 1``
    """
    tj = np.asarray(jump_times, dtype=float)
    starts = np.concatenate([[0.0], tj])
    ends = np.concatenate([tj, [t_end]])
    cap = np.exp(4 * lambda_t * T1) / np.expm1(2 * lambda_t * T1)
    m1 = m2 = m3 = np.inf
    for j, (a, b) in enumerate(zip(starts, ends)):
        for t in (a, b):
            m1 = min(m1, omega - lam * (t + j) + lambda_t * t)
            m3 = min(m3, t / T1 + 1 - j)
        # the sum is largest at the left end of the interval
        s = float(np.sum(np.exp(-2 * lambda_t * (a - tj[:j])))) if j else 0.0
        m2 = min(m2, cap - s)
    tol = 1e-12 * (1 + t_end)
    return DomainCheck(bool(m1 >= -tol and m2 >= -tol and m3 >= -tol), float(m1), float(m2), float(m3))


def zero_rate_decay(plant: PlantModel, gains: ObserverGains, cert: Certificate, n_grid: int = TAU_GRID,
                    return_beta: bool = False):
    """Flow-time decay rate beta / (2 rho2) of a zero-rate certificate."""
    c0 = cert.replace(lambda_t=0.0)
    include_w = bool(np.isfinite(cert.gamma))
    taus = np.linspace(0.0, cert.T2, n_grid)
    beta = -max(float(np.linalg.eigvalsh(eval_M(plant, gains, c0, t, include_w))[-1]) for t in taus)
    if beta <= 0:
        raise ValueError(f"certificate is not strict (beta = {beta:.3g})")
    _, rho2 = sandwich_constants(c0)
    rate = beta / (2 * rho2)
    return (rate, beta) if return_beta else rate


# ---------------------------------------------------------------- slack round trip

def _lifted(plant, gains, cert, tau, Xp, include_w=True):
    """Q(tau) + He(Bperp' Xp) in (d/dt(eps, th), eps, th, w, zeta) coordinates, numerically."""
    A, B, C, N, Cp, S = plant.A, plant.B, plant.C, plant.N, plant.Cp, plant.S
    L, H = gains.L, gains.H
    n_z, n_y = plant.n_z, plant.n_y
    e = np.exp(cert.delta * tau)
    n_x = n_z + n_y
    lin = plant.is_linear
    cols = [np.block([[-np.eye(n_z), np.zeros((n_z, n_y)), A - L @ C, L],
                      [C, -np.eye(n_y), -H @ C, H]])]
    if include_w:
        cols.append(np.vstack([N, np.zeros((n_y, plant.n_w))]))
    if not lin:
        cols.append(np.vstack([B, np.zeros((n_y, plant.n_s))]))
    Bperp = np.hstack(cols)
    dim = Bperp.shape[1]
    Q = np.zeros((dim, dim))
    Pcal = np.block([[cert.P1, np.zeros((n_z, n_y))], [np.zeros((n_y, n_z)), e * cert.P2]])
    chi = 0.0 if lin else cert.chi
    Ncal = np.block([[2 * cert.lambda_t * cert.P1 + Cp.T @ Cp + chi * plant.lipschitz_ell**2 * S.T @ S,
                      np.zeros((n_z, n_y))],
                     [np.zeros((n_y, n_z)), e * (2 * cert.lambda_t - cert.delta) * cert.P2]])
    Q[:n_x, n_x:2 * n_x] = Pcal
    Q[n_x:2 * n_x, :n_x] = Pcal
    Q[n_x:2 * n_x, n_x:2 * n_x] = Ncal
    k = 2 * n_x
    if include_w:
        Q[k:k + plant.n_w, k:k + plant.n_w] = -cert.gamma**2 * np.eye(plant.n_w)
        k += plant.n_w
    if not lin:
        Q[k:, k:] = -chi * np.eye(plant.n_s)
    Z = np.zeros((dim, dim))
    Z[:, :2 * n_x] = Bperp.T @ Xp
    # kernel of Bperp: d/dt(eps, th) = F_l (F_r (eps, th) + [N; 0] w + [B; 0] zeta)
    F_l = np.block([[np.eye(n_z), np.zeros((n_z, n_y))], [C, np.eye(n_y)]])
    F_r = np.block([[A - L @ C, L], [-H @ C, H]])
    top = F_l @ np.hstack([F_r] + cols[1:])
    kernel = np.vstack([top, np.eye(dim - n_x)])
    Xi = Q + Z + Z.T
    return Xi, kernel


def _get(point: dict, name: str, shape) -> np.ndarray:
    out = np.empty(shape)
    for i in range(shape[0]):
        for j in range(shape[1]):
            key = f"{name}[{i}][{j}]"
            out[i, j] = point[key] if key in point else point[f"{name}[{j}][{i}]"]
    return out


def slack_matrices(plant: PlantModel, method: str, point: dict, stage: str) -> np.ndarray:
    """Full slack matrix [[X1..X4], [X5..X8]] implied by a design solution.

    ``stage`` is "X" for the tau = 0 condition and "Y" for tau = T2.
    """
    n_z, n_y = plant.n_z, plant.n_y
    X = _get(point, "X", (n_z, n_z))
    Zzy, Zyz, Zyy = np.zeros((n_z, n_y)), np.zeros((n_y, n_z)), np.zeros((n_y, n_y))
    if method in ("PropX80", "PropX8X6"):
        U = _get(point, "U", (n_y, n_y))
        X8 = U if method == "PropX8X6" else Zyy
        blocks = [[X, Zzy, X, Zzy], [Zyz, U, Zyz, X8]]
    elif method == "ZOH":
        s5, s6, s7, s8 = (_get(point, f"{stage}{k}", shp) for k, shp in
                          zip((5, 6, 7, 8), ((n_y, n_z), (n_y, n_y), (n_y, n_z), (n_y, n_y))))
        blocks = [[X, Zzy, X, Zzy], [s5, s6, s7, s8]]
    else:
        raise ValueError(f"method {method!r} has no slack variables")
    return np.block(blocks)


@dataclass
class RoundtripReport:
    passed: bool
    lifted_max_eig: tuple[float, float]
    reduced_max_eig: tuple[float, float]
    constraint_mismatch: float
    zero_blocks_ok: bool
    kernel_identity_error: float


def projection_roundtrip(plant: PlantModel, problem: LmiProblem, point: dict, gains: ObserverGains,
                         tol: float = 1e-7) -> RoundtripReport:
    """Rebuild the full slack matrices, check the lifted inequalities, and come back down.

    Checks, at tau in {0, T2}: the lifted matrix assembled from the generic
    slack formula matches the solved constraint, it is negative semidefinite,
    compressing it onto the kernel of the constraint operator reproduces the
    reduced dissipation matrix, and that matrix is negative definite.
    """
    md = problem.metadata
    method = md["method"]
    x = np.array([point[v.label] for v in problem.variables])
    cert = certificate_from_solution(problem, x)
    T2 = md["T2"]
    lifted, reduced, mism, kid = [], [], 0.0, 0.0
    zero_ok = True
    for tau, stage, cons in ((0.0, "X", problem.constraints[0]), (T2, "Y", problem.constraints[1])):
        Xp = slack_matrices(plant, method, point, stage)
        if method == "PropX80":
            n_z = plant.n_z
            zero_ok &= bool(np.all(Xp[:n_z, -plant.n_y:] == 0) and np.all(Xp[n_z:, -plant.n_y:] == 0))
        Xi, K = _lifted(plant, gains, cert, tau, Xp)
        solved = cons.value(x)
        margin = solved - Xi
        # the solved block differs from the generic one only by the margin on the diagonal
        mism = max(mism, float(np.max(np.abs(margin - np.diag(np.diag(margin))))) /
                   (1 + float(np.max(np.abs(Xi)))))
        lifted.append(float(np.linalg.eigvalsh(Xi)[-1]))
        M = eval_M(plant, gains, cert, tau)
        kid = max(kid, float(np.max(np.abs(K.T @ Xi @ K - M))) / (1 + float(np.max(np.abs(M)))))
        reduced.append(float(np.linalg.eigvalsh(M)[-1]))
    scale = 1.0
    ok = (max(lifted) <= tol * scale and max(reduced) < 0 and mism <= 1e-6 and kid <= 1e-6 and zero_ok)
    return RoundtripReport(bool(ok), tuple(lifted), tuple(reduced), mism, zero_ok, kid)


def hybrid_sup_norm(flow_values, jump_values=()) -> float:
    """max(sup over flow samples, sup over jump samples) of the Euclidean norm."""
    def sup(vals):
        vals = [np.atleast_1d(np.asarray(v, dtype=float)) for v in vals]
        return max((float(np.linalg.norm(v)) for v in vals), default=0.0)
    return max(sup(flow_values), sup(jump_values))
