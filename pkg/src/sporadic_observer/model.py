"""Plant, sampling and observer data, plus the closed-loop error matrices.

The error coordinates are ``eps = z - zhat`` and ``theta_tilde = C eps - theta``.
Between samples they obey ``d(eps, theta_tilde)/dt = F (eps, theta_tilde) + Q zeta + T w``,
and at a sample ``(eps, theta_tilde)+ = Gjump (eps, theta_tilde) + Njump eta``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

METHODS = ("PropPred", "Predictor", "PropX80", "PropX8X6", "ZOH", "manual")


def _as_matrix(value, name: str) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1) if name in ("B", "N", "L") else arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a matrix, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PlantModel:
    """dz/dt = A z + B psi(S z) + N w,  y = C z + eta,  y_p = Cp (z - zhat).

    A zero ``B`` declares the plant linear; ``psi`` is then never called.
    ``psi`` only feeds the simulator, every certificate uses ``(B, S, lipschitz_ell)``.
    """

    A: np.ndarray
    B: np.ndarray
    S: np.ndarray
    N: np.ndarray
    C: np.ndarray
    Cp: np.ndarray
    lipschitz_ell: float = 1.0
    psi: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)
    name: str = "plant"

    def __post_init__(self):
        for key in ("A", "B", "S", "N", "C", "Cp"):
            object.__setattr__(self, key, _as_matrix(getattr(self, key), key))
        object.__setattr__(self, "lipschitz_ell", float(self.lipschitz_ell))

    @classmethod
    def linear(cls, A, C, N, Cp=None, name: str = "plant") -> "PlantModel":
        A = np.asarray(A, dtype=float)
        n_z = A.shape[0]
        Cp = np.eye(n_z) if Cp is None else Cp
        return cls(A=A, B=np.zeros((n_z, 1)), S=np.zeros((1, n_z)), N=N, C=C, Cp=Cp,
                   lipschitz_ell=1.0, psi=None, name=name)

    @property
    def n_z(self) -> int:
        return self.A.shape[0]

    @property
    def n_y(self) -> int:
        return self.C.shape[0]

    @property
    def n_w(self) -> int:
        return self.N.shape[1]

    @property
    def n_s(self) -> int:
        return self.B.shape[1]

    @property
    def n_q(self) -> int:
        return self.S.shape[0]

    @property
    def is_linear(self) -> bool:
        return not np.any(self.B)

    def nonlinearity(self, v: np.ndarray) -> np.ndarray:
        if self.is_linear or self.psi is None:
            return np.zeros(self.n_s)
        return np.asarray(self.psi(v), dtype=float).reshape(self.n_s)

    def zeta(self, z: np.ndarray, eps: np.ndarray) -> np.ndarray:
        """Nonlinearity mismatch psi(S z) - psi(S (z - eps))."""
        if self.is_linear:
            return np.zeros(self.n_s)
        return self.nonlinearity(self.S @ z) - self.nonlinearity(self.S @ (z - eps))


@dataclass(frozen=True)
class SamplingSpec:
    T1: float
    T2: float

    def __post_init__(self):
        if not (0.0 < self.T1 <= self.T2):
            raise ValueError(f"need 0 < T1 <= T2, got T1={self.T1}, T2={self.T2}")


@dataclass(frozen=True)
class ObserverGains:
    L: np.ndarray
    H: np.ndarray
    method: str = "manual"

    def __post_init__(self):
        object.__setattr__(self, "L", _as_matrix(self.L, "L"))
        object.__setattr__(self, "H", _as_matrix(self.H, "H"))
        if self.method not in METHODS:
            raise ValueError(f"unknown design method {self.method!r}")
        if self.H.shape[0] != self.H.shape[1]:
            raise ValueError(f"H must be square, got {self.H.shape}")
        if self.L.shape[1] != self.H.shape[0]:
            raise ValueError(f"L has {self.L.shape[1]} columns but H is {self.H.shape}")
        if self.method == "ZOH" and np.any(self.H):
            raise ValueError("ZOH gains must have H = 0")

    @classmethod
    def predictor(cls, plant: PlantModel, L, method: str = "Predictor") -> "ObserverGains":
        """Gains with ``H = -C L``: the intersample injection predicts the output error."""
        L = _as_matrix(L, "L")
        return cls(L=L, H=-plant.C @ L, method=method)

    @classmethod
    def zoh(cls, L) -> "ObserverGains":
        L = _as_matrix(L, "L")
        return cls(L=L, H=np.zeros((L.shape[1], L.shape[1])), method="ZOH")

    def to_dict(self) -> dict:
        return {"L": self.L.tolist(), "H": self.H.tolist(), "method": self.method}

    @classmethod
    def from_dict(cls, data: dict) -> "ObserverGains":
        return cls(L=data["L"], H=data["H"], method=data.get("method", "manual"))


@dataclass(frozen=True)
class ErrorSystemMatrices:
    F: np.ndarray
    Q: np.ndarray
    Tmat: np.ndarray
    Gjump: np.ndarray
    Njump: np.ndarray


@dataclass(frozen=True)
class Violation:
    field: str
    message: str

    def __str__(self):
        return f"{self.field}: {self.message}"


def validate_plant(plant: PlantModel, n_probes: int = 64, seed: int = 0) -> list[Violation]:
    """Return every broken dimension/positivity invariant; empty means valid."""
    out: list[Violation] = []
    n_z = plant.A.shape[0]
    if plant.A.shape[1] != n_z or n_z < 1:
        out.append(Violation("A", f"must be square and nonempty, got {plant.A.shape}"))
    if plant.C.shape[1] != n_z or plant.C.shape[0] < 1:
        out.append(Violation("C", f"expected (n_y, {n_z}) with n_y >= 1, got {plant.C.shape}"))
    if plant.B.shape[0] != n_z:
        out.append(Violation("B", f"expected {n_z} rows, got {plant.B.shape}"))
    if plant.S.shape[1] != n_z:
        out.append(Violation("S", f"expected {n_z} columns, got {plant.S.shape}"))
    if plant.N.shape[0] != n_z:
        out.append(Violation("N", f"expected {n_z} rows, got {plant.N.shape}"))
    if plant.Cp.shape[1] != n_z:
        out.append(Violation("Cp", f"expected {n_z} columns, got {plant.Cp.shape}"))
    if not (plant.lipschitz_ell > 0 and np.isfinite(plant.lipschitz_ell)):
        out.append(Violation("lipschitz_ell", f"must be positive, got {plant.lipschitz_ell}"))
    for key in ("A", "B", "S", "N", "C", "Cp"):
        if not np.all(np.isfinite(getattr(plant, key))):
            out.append(Violation(key, "contains non-finite entries"))
    if out or plant.is_linear or plant.psi is None:
        return out

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_probes):
        v1 = rng.normal(scale=2.0, size=plant.n_q)
        v2 = v1 + rng.normal(scale=rng.choice([1e-3, 1e-1, 1.0]), size=plant.n_q)
        dv = np.linalg.norm(v1 - v2)
        if dv == 0:
            continue
        ratio = np.linalg.norm(plant.nonlinearity(v1) - plant.nonlinearity(v2)) / dv
        worst = max(worst, ratio)
    if worst > plant.lipschitz_ell * (1 + 1e-9):
        out.append(Violation("psi", f"probe ratio {worst:.6g} exceeds lipschitz_ell={plant.lipschitz_ell}"))
    return out


def _check_gains(plant: PlantModel, gains: ObserverGains):
    if gains.L.shape != (plant.n_z, plant.n_y):
        raise ValueError(f"L must be {(plant.n_z, plant.n_y)}, got {gains.L.shape}")
    if gains.H.shape != (plant.n_y, plant.n_y):
        raise ValueError(f"H must be {(plant.n_y, plant.n_y)}, got {gains.H.shape}")


def assemble_error_matrices(plant: PlantModel, gains: ObserverGains) -> ErrorSystemMatrices:
    _check_gains(plant, gains)
    A, C, L, H = plant.A, plant.C, gains.L, gains.H
    n_z, n_y = plant.n_z, plant.n_y
    F = np.block([[A - L @ C, L],
                  [C @ A - C @ L @ C - H @ C, C @ L + H]])
    Q = np.vstack([plant.B, C @ plant.B])
    T = np.vstack([plant.N, C @ plant.N])
    G = np.block([[np.eye(n_z), np.zeros((n_z, n_y))],
                  [np.zeros((n_y, n_z)), np.zeros((n_y, n_y))]])
    Nj = np.vstack([np.zeros((n_z, n_y)), -np.eye(n_y)])
    return ErrorSystemMatrices(F=F, Q=Q, Tmat=T, Gjump=G, Njump=Nj)


def factorize_F(plant: PlantModel, gains: ObserverGains) -> tuple[np.ndarray, np.ndarray]:
    """Split F = F_l @ F_r with F_l = [[I, 0], [C, I]] unit lower triangular."""
    _check_gains(plant, gains)
    A, C, L, H = plant.A, plant.C, gains.L, gains.H
    n_z, n_y = plant.n_z, plant.n_y
    F_l = np.block([[np.eye(n_z), np.zeros((n_z, n_y))],
                    [C, np.eye(n_y)]])
    F_r = np.block([[A - L @ C, L],
                    [-H @ C, H]])
    return F_l, F_r
