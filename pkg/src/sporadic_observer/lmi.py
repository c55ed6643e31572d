"""Matrix-inequality certificates for the sporadic-sampling observer.

Everything here produces either a numeric matrix (``eval_M``) or an
:class:`~sporadic_observer.affine.LmiProblem` whose constraints read ``G(x) <= 0``.
Block order in every constraint is (eps, theta_tilde, w, zeta); linear plants
(``B == 0``) lose the zeta block and the multiplier ``chi``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .affine import Affine, LmiProblem, VarSpace, block, he, make_problem, times
from .model import ObserverGains, PlantModel, _check_gains

EPS_PD = 1e-8
NONSTRICT = 1e-9
STRICT = 1e-7
DESIGN_METHODS = ("PropPred", "Predictor", "PropX80", "PropX8X6", "ZOH")


class UnknownMethodError(ValueError):
    pass


class DeltaRangeError(ValueError):
    pass


@dataclass(frozen=True)
class Certificate:
    """Lyapunov data: V = eps' P1 eps + exp(delta*tau) theta' P2 theta."""

    P1: np.ndarray
    P2: np.ndarray
    delta: float
    chi: float
    lambda_t: float
    gamma: float
    T2: float

    def __post_init__(self):
        for key in ("P1", "P2"):
            m = np.atleast_2d(np.asarray(getattr(self, key), dtype=float))
            m = 0.5 * (m + m.T)
            m.setflags(write=False)
            object.__setattr__(self, key, m)
        for key in ("delta", "chi", "lambda_t", "gamma", "T2"):
            object.__setattr__(self, key, float(getattr(self, key)))

    def is_positive(self) -> bool:
        return bool(np.linalg.eigvalsh(self.P1)[0] > 0 and np.linalg.eigvalsh(self.P2)[0] > 0
                    and self.chi >= 0 and self.gamma > 0)

    def replace(self, **kw) -> "Certificate":
        data = {k: getattr(self, k) for k in ("P1", "P2", "delta", "chi", "lambda_t", "gamma", "T2")}
        data.update(kw)
        return Certificate(**data)

    def to_dict(self) -> dict:
        return {"P1": self.P1.tolist(), "P2": self.P2.tolist(), "delta": self.delta, "chi": self.chi,
                "lambda_t": self.lambda_t, "gamma": self.gamma, "T2": self.T2}

    @classmethod
    def from_dict(cls, d: dict) -> "Certificate":
        return cls(**{k: d[k] for k in ("P1", "P2", "delta", "chi", "lambda_t", "gamma", "T2")})


def eval_M(plant: PlantModel, gains: ObserverGains, cert: Certificate, tau: float,
           include_w: bool = True) -> np.ndarray:
    """Numeric flow-dissipation matrix at timer value ``tau``."""
    if not (-1e-12 <= tau <= cert.T2 * (1 + 1e-12)):
        raise ValueError(f"tau={tau} outside [0, {cert.T2}]")
    _check_gains(plant, gains)
    A, B, S, N, C, Cp = plant.A, plant.B, plant.S, plant.N, plant.C, plant.Cp
    L, H = gains.L, gains.H
    P1, P2 = cert.P1, cert.P2
    lam, ell = cert.lambda_t, plant.lipschitz_ell
    e = np.exp(cert.delta * tau)
    chi = 0.0 if plant.is_linear else cert.chi
    ALC = A - L @ C

    m11 = P1 @ ALC + ALC.T @ P1 + 2 * lam * P1 + Cp.T @ Cp + chi * ell**2 * S.T @ S
    m12 = P1 @ L + e * (C @ A - C @ L @ C - H @ C).T @ P2
    CLH = C @ L + H
    m22 = e * (P2 @ CLH + CLH.T @ P2 + (2 * lam - cert.delta) * P2)
    rows = [[m11, m12], [m12.T, m22]]
    if include_w:
        m13, m23 = P1 @ N, e * P2 @ C @ N
        m33 = -cert.gamma**2 * np.eye(plant.n_w)
        rows[0].append(m13)
        rows[1].append(m23)
        rows.append([m13.T, m23.T, m33])
    if not plant.is_linear:
        m14, m24 = P1 @ B, e * P2 @ C @ B
        for r, blk in zip(rows, [m14, m24] + ([np.zeros((plant.n_w, plant.n_s))] if include_w else [])):
            r.append(blk)
        rows.append([r[-1].T for r in rows] + [-chi * np.eye(plant.n_s)])
    M = np.block(rows)
    return 0.5 * (M + M.T)


def convex_decomposition(delta: float, T2: float, tau: float) -> tuple[float, float]:
    """Weights with exp(delta*tau) = l1 * 1 + l2 * exp(delta*T2)."""
    if delta <= 0 or T2 <= 0:
        raise ValueError("delta and T2 must be positive")
    # expm1 keeps precision for small delta*T2
    den = -np.expm1(delta * T2)
    l2 = -np.expm1(delta * tau) / den
    l1 = 1.0 - l2
    return float(l1), float(l2)


# ---------------------------------------------------------------- assembly helpers

def _margin(expr: Affine, strict: bool) -> float:
    scale = 1.0 + float(np.max(np.abs(expr.const), initial=0.0))
    return (STRICT if strict else NONSTRICT) * scale


def _nsd(name: str, expr: Affine, strict: bool = False) -> tuple[str, Affine]:
    """Constraint ``expr <= -eps I`` as ``expr + eps I <= 0``."""
    return name, expr + _margin(expr, strict) * np.eye(expr.shape[0])


def _decl_common(space: VarSpace, plant: PlantModel, fixed_gamma):
    """Allocate P1, P2, chi and mu; return them with the -gamma^2 I block."""
    P1 = space.sym("P1", plant.n_z)
    P2 = space.sym("P2", plant.n_y)
    chi = None if plant.is_linear else space.scalar("chi")
    if fixed_gamma is None:
        mu = space.scalar("mu")
        w_block = -times(mu, np.eye(plant.n_w))
    else:
        if fixed_gamma <= 0:
            raise ValueError("fixed_gamma must be positive")
        w_block = -(fixed_gamma**2) * np.eye(plant.n_w)
    return P1, P2, chi, w_block


def _assemble(blocks, w_col, z_col, w_block, chi, plant: PlantModel, drop_w: bool) -> Affine:
    """Append the w and zeta rows/columns to a 2x2 block layout.

    ``w_col``/``z_col`` hold the couplings of the leading rows with w and zeta.
    """
    rows = [list(r) for r in blocks]
    k = len(rows)
    if not drop_w:
        for r, c in zip(rows, w_col):
            r.append(c)
        rows.append([c.T for c in w_col] + [w_block])
    if not plant.is_linear:
        for r, c in zip(rows[:k], z_col):
            r.append(c)
        if not drop_w:
            rows[k].append(np.zeros((plant.n_w, plant.n_s)))
        zr = [c.T for c in z_col]
        if not drop_w:
            zr.append(np.zeros((plant.n_s, plant.n_w)))
        zr.append(-times(chi, np.eye(plant.n_s)))
        rows.append(zr)
    return block(rows)


def _lip_term(plant: PlantModel, chi):
    if plant.is_linear:
        return np.zeros((plant.n_z, plant.n_z))
    return times(chi, plant.lipschitz_ell**2 * plant.S.T @ plant.S)


def _objective(fixed_gamma):
    return {"mu": 1.0} if fixed_gamma is None else None


def _meta(kind, method, plant, lambda_t, delta, T2, fixed_gamma, **extra) -> dict:
    d = {"kind": kind, "method": method, "lambda_t": float(lambda_t), "delta": float(delta),
         "T2": float(T2), "fixed_gamma": fixed_gamma, "linear": plant.is_linear,
         "n_z": plant.n_z, "n_y": plant.n_y}
    d.update(extra)
    return d


# ---------------------------------------------------------------- verification

def _verification_M(plant, gains, P1, P2, chi, w_block, lam, delta, tau, drop_w=False) -> Affine:
    A, C, N, B, Cp = plant.A, plant.C, plant.N, plant.B, plant.Cp
    L, H = gains.L, gains.H
    e = float(np.exp(delta * tau))
    ALC = A - L @ C
    m11 = he(P1 @ ALC) + 2 * lam * P1 + Cp.T @ Cp + _lip_term(plant, chi)
    m12 = P1 @ L + e * ((C @ A - C @ L @ C - H @ C).T @ P2)
    m22 = e * (he(P2 @ (C @ L + H)) + (2 * lam - delta) * P2)
    return _assemble([[m11, m12], [m12.T, m22]], [P1 @ N, e * (P2 @ (C @ N))],
                     [P1 @ B, e * (P2 @ (C @ B))], w_block, chi, plant, drop_w)


def build_verification_problem(plant: PlantModel, gains: ObserverGains, lambda_t: float, delta: float,
                               T2: float, fixed_gamma: float | None = None, *, drop_w: bool = False,
                               strict: bool = False) -> LmiProblem:
    """Linear conditions on (P1, P2, chi, mu) for fixed gains, delta and T2."""
    _check_gains(plant, gains)
    if delta <= 0 or T2 <= 0 or lambda_t < 0:
        raise ValueError("need delta > 0, T2 > 0, lambda_t >= 0")
    space = VarSpace()
    if drop_w:
        fixed_gamma = 1.0  # placeholder, the w block is not assembled
    P1, P2, chi, wb = _decl_common(space, plant, fixed_gamma)
    cons = [_nsd(f"M({t})", _verification_M(plant, gains, P1, P2, chi, wb, lambda_t, delta, t, drop_w), strict)
            for t in (0.0, T2)]
    meta = _meta("verification", gains.method, plant, lambda_t, delta, T2, None if drop_w else fixed_gamma,
                 L=gains.L.tolist(), H=gains.H.tolist(), drop_w=drop_w)
    return make_problem(space, cons, [("P1", EPS_PD), ("P2", EPS_PD)],
                        None if drop_w else _objective(fixed_gamma), meta)


# ---------------------------------------------------------------- design relaxations

def _design_pred(plant, space, P1, P2, chi, wb, lam, delta, T2, drop_w, strict, with_y: bool):
    A, C, N, B, Cp = plant.A, plant.C, plant.N, plant.B, plant.Cp
    J = space.full("J", plant.n_z, plant.n_y)
    Y = space.full("Y", plant.n_y, plant.n_y) if with_y else Affine(np.zeros((plant.n_y, plant.n_y)))
    m11 = he(P1 @ A - J @ C) + 2 * lam * P1 + Cp.T @ Cp + _lip_term(plant, chi)
    out = []
    for tau in (0.0, T2):
        e = float(np.exp(delta * tau))
        m12 = J + e * ((A.T @ C.T) @ P2 - C.T @ Y)
        m22 = e * (he(Y) + (2 * lam - delta) * P2)
        M = _assemble([[m11, m12], [m12.T, m22]], [P1 @ N, e * (P2 @ (C @ N))],
                      [P1 @ B, e * (P2 @ (C @ B))], wb, chi, plant, drop_w)
        out.append(_nsd(f"M({tau})", M, strict))
    return out


def _slack_form(plant, P1, P2, chi, wb, lam, delta, tau, K1, K2, K3, K4, K5, drop_w) -> Affine:
    """Lifted inequality in (d/dt(eps, theta), eps, theta, w, zeta)."""
    n_z, n_y = plant.n_z, plant.n_y
    Cp = plant.Cp
    e = float(np.exp(delta * tau))
    Zzy, Zyz = np.zeros((n_z, n_y)), np.zeros((n_y, n_z))
    Pcal = block([[P1, Zzy], [Zyz, e * P2]])
    Ncal = block([[2 * lam * P1 + Cp.T @ Cp + _lip_term(plant, chi), Zzy],
                  [Zyz, e * (2 * lam - delta) * P2]])
    top = [[he(K1), K2 + Pcal], [(K2 + Pcal).T, Ncal + he(K5)]]
    return _assemble(top, [K3, K3], [K4, K4], wb, chi, plant, drop_w)


def _design_x(plant, space, P1, P2, chi, wb, lam, delta, T2, drop_w, strict, variant: str):
    A, C, N, B = plant.A, plant.C, plant.N, plant.B
    n_z, n_y = plant.n_z, plant.n_y
    X = space.full("X", n_z, n_z)
    U = space.full("U", n_y, n_y)
    J = space.full("J", n_z, n_y)
    W = space.full("W", n_y, n_y)
    Zyz, Zyy, Zzy = np.zeros((n_y, n_z)), np.zeros((n_y, n_y)), np.zeros((n_z, n_y))
    K1 = block([[-X, C.T @ U], [Zyz, -U]])
    K3 = block([[X.T @ N], [np.zeros((n_y, plant.n_w))]])
    K4 = block([[X.T @ B], [np.zeros((n_y, plant.n_s))]])
    if variant == "PropX80":
        K2 = block([[-X + X.T @ A - J @ C, J], [-(W @ C), W]])
        K5 = block([[A.T @ X - C.T @ J.T, Zzy], [J.T, Zyy]])
    else:
        K2 = block([[-X + X.T @ A - J @ C, J + C.T @ U], [-(W @ C), -U + W]])
        K5 = block([[A.T @ X - C.T @ J.T, -(C.T @ W.T)], [J.T, W.T]])
    return [_nsd(f"Xi({tau})", _slack_form(plant, P1, P2, chi, wb, lam, delta, tau, K1, K2, K3, K4, K5, drop_w),
                 strict) for tau in (0.0, T2)]


def _design_zoh(plant, space, P1, P2, chi, wb, lam, delta, T2, drop_w, strict, nonsingular_x: bool):
    A, C, N, B = plant.A, plant.C, plant.N, plant.B
    n_z, n_y = plant.n_z, plant.n_y
    X = space.full("X", n_z, n_z)
    slack = {}
    for pre in ("X", "Y"):
        slack[pre] = [space.full(f"{pre}{k}", *(shape)) for k, shape in
                      zip((5, 6, 7, 8), ((n_y, n_z), (n_y, n_y), (n_y, n_z), (n_y, n_y)))]
    J = space.full("J", n_z, n_y)
    Zzy, Zyy = np.zeros((n_z, n_y)), np.zeros((n_y, n_y))
    K3 = block([[X.T @ N], [np.zeros((n_y, plant.n_w))]])
    K4 = block([[X.T @ B], [np.zeros((n_y, plant.n_s))]])
    K5 = block([[A.T @ X - C.T @ J.T, Zzy], [J.T, Zyy]])
    out = []
    for tau, pre in ((0.0, "X"), (T2, "Y")):
        S5, S6, S7, S8 = slack[pre]
        K1 = block([[-X + C.T @ S5, C.T @ S6], [-S5, -S6]])
        K2 = block([[-X + X.T @ A - J @ C + C.T @ S7, J + C.T @ S8], [-S7, -S8]])
        out.append(_nsd(f"Xi({tau})", _slack_form(plant, P1, P2, chi, wb, lam, delta, tau, K1, K2, K3, K4, K5,
                                                  drop_w), strict))
    if nonsingular_x:
        out.append(_nsd("X+X'>0", -he(X), strict=True))
    return out


def build_design_problem(plant: PlantModel, method: str, lambda_t: float, delta: float, T2: float,
                         fixed_gamma: float | None = None, *, gain_norm_cap: float | None = None,
                         nonsingular_x: bool = True, drop_w: bool = False, strict: bool = False) -> LmiProblem:
    """Design relaxation for ``method`` at fixed (lambda_t, delta, T2).

    Gains are recovered from the solution by
    :func:`sporadic_observer.design.recover_gains`.  ``gain_norm_cap`` bounds
    the spectral norm of the auxiliary variable J, not of L.
    """
    if method not in DESIGN_METHODS:
        raise UnknownMethodError(f"unknown design method {method!r}; choose from {DESIGN_METHODS}")
    if delta <= 0 or T2 <= 0 or lambda_t < 0:
        raise DeltaRangeError("need delta > 0, T2 > 0, lambda_t >= 0")
    if method == "PropX80" and delta <= 2 * lambda_t:
        raise DeltaRangeError(f"PropX80 needs delta > 2*lambda_t (delta={delta}, lambda_t={lambda_t})")
    space = VarSpace()
    if drop_w:
        fixed_gamma = 1.0
    P1, P2, chi, wb = _decl_common(space, plant, fixed_gamma)
    args = (plant, space, P1, P2, chi, wb, lambda_t, delta, T2, drop_w, strict)
    if method in ("PropPred", "Predictor"):
        cons = _design_pred(*args, with_y=(method == "PropPred"))
    elif method in ("PropX80", "PropX8X6"):
        cons = _design_x(*args, variant=method)
    else:
        cons = _design_zoh(*args, nonsingular_x=nonsingular_x)
    if gain_norm_cap is not None:
        J = _matrix_affine(space, "J")
        k = float(gain_norm_cap)
        cap = block([[-k * np.eye(plant.n_z), -J], [-J.T, -k * np.eye(plant.n_y)]])
        cons.append(("J-cap", cap))
    meta = _meta("design", method, plant, lambda_t, delta, T2, None if drop_w else fixed_gamma,
                 gain_norm_cap=gain_norm_cap, drop_w=drop_w)
    return make_problem(space, cons, [("P1", EPS_PD), ("P2", EPS_PD)],
                        None if drop_w else _objective(fixed_gamma), meta)


def _matrix_affine(space: VarSpace, name: str) -> Affine:
    index = space.matrices[name]
    terms = {}
    for (i, j), k in np.ndenumerate(index):
        e = np.zeros(index.shape)
        e[i, j] = 1.0
        terms[int(k)] = terms.get(int(k), 0) + e
    return Affine(np.zeros(index.shape), terms)


# ---------------------------------------------------------------- existence and corollaries

def build_existence_problem(plant: PlantModel) -> LmiProblem:
    """Strict pre-flight LMI in (P1, J, chi, mu_hat): some (T2, gamma, delta, lambda_t) then exists."""
    A, C, N, B, Cp = plant.A, plant.C, plant.N, plant.B, plant.Cp
    space = VarSpace()
    P1 = space.sym("P1", plant.n_z)
    J = space.full("J", plant.n_z, plant.n_y)
    chi = None if plant.is_linear else space.scalar("chi")
    mu = space.scalar("mu")
    m11 = he(P1 @ A - J @ C) + Cp.T @ Cp + _lip_term(plant, chi)
    M = _assemble([[m11]], [P1 @ N], [P1 @ B], -times(mu, np.eye(plant.n_w)), chi, plant, False)
    meta = {"kind": "existence", "linear": plant.is_linear, "n_z": plant.n_z, "n_y": plant.n_y}
    return make_problem(space, [_nsd("existence", M, strict=True)], [("P1", EPS_PD)], None, meta)


def build_corollary_problem(plant: PlantModel, variant: str, *, lambda_t: float = 0.0, delta: float,
                            T2: float, gamma: float | None = None, gains: ObserverGains | None = None,
                            method: str | None = None) -> LmiProblem:
    """NoGamma: drop the w rows/columns at rate ``lambda_t``.  NoLambda: rate zero, fixed ``gamma``.

    Pass ``gains`` for an analysis problem or ``method`` for a design problem.
    Both corollaries are imposed strictly.
    """
    if (gains is None) == (method is None):
        raise ValueError("pass exactly one of gains or method")
    if variant == "NoGamma":
        kw = dict(drop_w=True, strict=True)
        lam, fixed = lambda_t, None
    elif variant == "NoLambda":
        if gamma is None or gamma <= 0:
            raise ValueError("NoLambda needs a positive gamma")
        kw = dict(drop_w=False, strict=True)
        lam, fixed = 0.0, gamma
    else:
        raise ValueError(f"unknown corollary variant {variant!r}")
    if gains is not None:
        prob = build_verification_problem(plant, gains, lam, delta, T2, fixed, **kw)
    else:
        prob = build_design_problem(plant, method, lam, delta, T2, fixed, **kw)
    prob.metadata["corollary"] = variant
    return prob


def count_scalar_variables(method: str, n_z: int, n_y: int) -> int:
    """Closed-form census of scalar decision variables per design method."""
    if n_z < 1 or n_y < 1:
        raise ValueError("n_z and n_y must be >= 1")
    base = n_z * (n_z + 1) // 2 + n_y * (n_y + 1) // 2 + 1
    if method == "PropPred":
        return base + n_y**2 + n_z * n_y
    if method in ("PropX80", "PropX8X6"):
        return base + 2 * n_y**2 + n_z**2 + n_z * n_y
    if method == "ZOH":
        return base + 4 * n_y**2 + n_z**2 + 5 * n_z * n_y
    raise UnknownMethodError(f"no census for method {method!r}")


def certificate_from_solution(problem: LmiProblem, x: np.ndarray) -> Certificate:
    """Read (P1, P2, chi, gamma) off a solved verification or design problem."""
    md = problem.metadata
    mats = problem.matrices
    P1 = problem.matrix_value("P1", x)
    P2 = problem.matrix_value("P2", x)
    chi = float(problem.matrix_value("chi", x)[0, 0]) if "chi" in mats else 0.0
    if "mu" in mats:
        gamma = float(np.sqrt(max(problem.matrix_value("mu", x)[0, 0], 0.0)))
    else:
        gamma = float(md["fixed_gamma"]) if md.get("fixed_gamma") is not None else float("inf")
    return Certificate(P1=P1, P2=P2, delta=md["delta"], chi=max(chi, 0.0), lambda_t=md["lambda_t"],
                       gamma=gamma, T2=md["T2"])
