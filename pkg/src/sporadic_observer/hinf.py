"""H-infinity norm of the shifted error transfer, a lower bound on any certified gain."""

from __future__ import annotations

import numpy as np

from .model import PlantModel


def _has_imag_eig(Abar, BBt, CtC, gamma: float, floor: float) -> bool:
    Ham = np.block([[Abar, BBt / gamma**2], [-CtC, -Abar.T]])
    ev = np.linalg.eigvals(Ham)
    tol = min(1e-9 * max(1.0, np.max(np.abs(ev))), floor)
    return bool(np.any(np.abs(ev.real) < tol))


def hinf_norm(A, B, C, rtol: float = 1e-6) -> float:
    """||C (sI - A)^-1 B||_inf for Hurwitz ``A``; +inf otherwise.

    Bisection on gamma: gamma exceeds the norm iff the Hamiltonian
    [[A, B B'/gamma^2], [-C'C, -A']] has no eigenvalue on the imaginary axis.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    poles = np.linalg.eigvals(A)
    if np.max(poles.real) >= 0:
        return float("inf")
    # for large gamma the Hamiltonian spectrum approaches that of A and -A'
    floor = 1e-3 * float(np.min(np.abs(poles.real)))
    if not np.any(B) or not np.any(C):
        return 0.0
    BBt, CtC = B @ B.T, C.T @ C
    # start from the DC gain and a few spot frequencies
    def gain(w):
        return np.linalg.norm(C @ np.linalg.solve(1j * w * np.eye(A.shape[0]) - A, B), 2)
    lo = max(gain(w) for w in np.concatenate([[0.0], np.abs(poles)]))
    if lo == 0.0:
        lo = 1e-12
    hi = 2.0 * lo
    while _has_imag_eig(A, BBt, CtC, hi, floor):
        lo, hi = hi, 2.0 * hi
        if hi > 1e150:
            return float("inf")
    while hi - lo > rtol * lo:
        mid = 0.5 * (lo + hi)
        if _has_imag_eig(A, BBt, CtC, mid, floor):
            lo = mid
        else:
            hi = mid
    return float(0.5 * (lo + hi))


def hinf_necessary(plant: PlantModel, L, lambda_t: float, rtol: float = 1e-6) -> float:
    """Smallest gamma any certificate with these gains and decay rate can carry."""
    L = np.atleast_2d(np.asarray(L, dtype=float)).reshape(plant.n_z, plant.n_y)
    Abar = plant.A - L @ plant.C + lambda_t * np.eye(plant.n_z)
    return hinf_norm(Abar, plant.N, plant.Cp, rtol)
