"""Benchmark plants, gains and input signals used by tests, scripts and bundled configs."""

from __future__ import annotations

import numpy as np

from .model import ObserverGains, PlantModel, SamplingSpec


def oscillator() -> PlantModel:
    """Undamped oscillator with a matched disturbance, first state measured."""
    return PlantModel.linear(A=[[0.0, 1.0], [-4.0, 0.0]], C=[[1.0, 0.0]], N=[[1.0], [0.0]],
                             Cp=np.eye(2), name="oscillator")


OSCILLATOR_LAMBDA_T = 0.05
OSCILLATOR_T2 = 0.41
OSCILLATOR_GAMMA = 36.0


def oscillator_sampling() -> SamplingSpec:
    return SamplingSpec(T1=0.5 * OSCILLATOR_T2, T2=OSCILLATOR_T2)


def oscillator_gains() -> ObserverGains:
    """Gains designed with an intersample predictor term."""
    return ObserverGains(L=[[2.067], [-3.0]], H=[[-1.384]], method="manual")


def oscillator_legacy_gains() -> ObserverGains:
    """Older zero-decay design, only certified for small decay rates."""
    return ObserverGains(L=[[0.3648], [-0.4655]], H=[[-0.3648]], method="manual")


def oscillator_init(T2: float = OSCILLATOR_T2) -> np.ndarray:
    """(z, eps, theta_tilde, tau)."""
    return np.array([1.0, 1.0, 3.0, 3.0, -2.0, T2])


def square_wave(t: float) -> np.ndarray:
    if t <= 5.0:
        v = -1.0
    elif t <= 10.0:
        v = 1.0
    elif t <= 15.0:
        v = -1.0
    else:
        v = 0.0
    return np.array([v])


def three_state() -> PlantModel:
    """Marginally stable three-state plant with two measured outputs."""
    return PlantModel.linear(A=[[0.0, 0.0, 1.0], [0.0, -0.01, 0.0], [0.0, 1.0, 0.0]],
                             C=[[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]], N=[[0.0], [1.0], [0.0]],
                             Cp=[[0.0, 1.0, 0.0]], name="three-state")


THREE_STATE_LAMBDA_T = 0.2


def three_state_sampling() -> SamplingSpec:
    return SamplingSpec(T1=0.1714, T2=0.3)


def three_state_pulse(t: float) -> np.ndarray:
    if t <= 2.0:
        v = 1.0
    elif t <= 6.0:
        v = 0.0
    elif t <= 8.0:
        v = -1.0
    else:
        v = 0.0
    return np.array([v])


ARM_AMPLITUDE = 3.33
ARM_LIPSCHITZ = 3.33


def flexible_arm(lipschitz_ell: float = ARM_LIPSCHITZ) -> PlantModel:
    """One-link flexible-joint arm: gravity enters through sin of the link angle."""
    A = [[0.0, 1.0, 0.0, 0.0],
         [-48.6, -1.25, 48.6, 0.0],
         [0.0, 0.0, 0.0, 1.0],
         [19.5, 0.0, -19.5, 0.0]]
    return PlantModel(A=A, B=[[0.0], [0.0], [0.0], [-1.0]], S=[[0.0, 0.0, 1.0, 0.0]],
                      N=[[0.0], [2.0], [0.0], [0.0]], C=[[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]],
                      Cp=[[0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]], lipschitz_ell=lipschitz_ell,
                      psi=lambda v: ARM_AMPLITUDE * np.sin(v), name="flexible-arm")


ARM_LAMBDA_T = 0.01


def flexible_arm_predictor_gains(plant: PlantModel | None = None) -> ObserverGains:
    """Emulation-based gain with H = -C L."""
    plant = plant or flexible_arm()
    L = [[9.328, 1.0], [-48.78, 22.11], [-0.0524, 3.199], [19.41, -0.9032]]
    return ObserverGains.predictor(plant, L)


def arm_input(t: float) -> np.ndarray:
    return np.array([np.sin(2 * t) if t <= 20.0 else 0.0])


def arm_delta_grid() -> np.ndarray:
    return np.linspace(1.0, 100.0, 100)


def arm_T2_grid(n: int = 20) -> np.ndarray:
    return np.linspace(0.01, 0.3, n)
