"""JSON scenario files: declarative plant, sampling, design and simulation settings."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import examples
from .design import default_delta_grid, parse_grid
from .model import ObserverGains, PlantModel, SamplingSpec, validate_plant
from .sim import JITTER_KINDS, HybridState, JitterSequence, SignalSpec


class ConfigError(ValueError):
    pass


_SECTIONS = {
    "plant": {"A", "B", "S", "N", "C", "Cp", "lipschitz_ell", "nonlinearity", "name"},
    "sampling": {"T1", "T2", "T2_range", "T2_grid"},
    "design": {"method", "lambda_t", "gamma", "delta_grid", "gain_cap"},
    "gains": {"L", "H", "method"},
    "simulate": {"init", "w", "eta", "jitter", "seed", "horizon", "h_max"},
    "output": {"dir", "prefix"},
}

# named input signals; configs stay free of executable content
SIGNALS = {
    "zero": None,
    "square-wave": examples.square_wave,
    "pulse": examples.three_state_pulse,
    "arm-sine": examples.arm_input,
}


def _check_keys(where: str, data: dict, allowed: set):
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be an object")
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")


def _nonlinearity(spec):
    if spec is None or spec == "zero":
        return None, 0.0
    if isinstance(spec, dict):
        _check_keys("plant.nonlinearity", spec, {"kind", "amplitude"})
        kind, amp = spec.get("kind"), float(spec.get("amplitude", 1.0))
    else:
        kind, amp = spec, 1.0
    if kind == "zero":
        return None, 0.0
    if kind == "sin":
        return (lambda v: amp * np.sin(v)), amp
    raise ConfigError(f"unknown nonlinearity selector {kind!r} (expected 'zero' or 'sin')")


@dataclass
class ScenarioConfig:
    plant: PlantModel
    sampling: SamplingSpec
    method: str = "PropPred"
    lambda_t: float = 0.05
    gamma: float | None = None
    delta_grid: np.ndarray = field(default_factory=default_delta_grid)
    gain_cap: float | None = None
    T2_range: tuple[float, float] | None = None
    T2_grid: np.ndarray | None = None
    gains: ObserverGains | None = None
    init: HybridState | None = None
    w: str = "zero"
    eta: str = "zero"
    jitter: str = "deterministic"
    seed: int = 0
    horizon: tuple[float, int] = (20.0, 10**6)
    h_max: float | None = None
    out_dir: str = "out"
    prefix: str = ""
    source: str = ""

    @classmethod
    def from_dict(cls, data: dict, source: str = "") -> "ScenarioConfig":
        _check_keys("config", data, set(_SECTIONS))
        for key, allowed in _SECTIONS.items():
            if key in data:
                _check_keys(key, data[key], allowed)
        if "plant" not in data or "sampling" not in data:
            raise ConfigError("config needs 'plant' and 'sampling' sections")
        pd = data["plant"]
        try:
            A = np.asarray(pd["A"], dtype=float)
            psi, _ = _nonlinearity(pd.get("nonlinearity"))
            n_z = A.shape[0]
            plant = PlantModel(A=A, B=pd.get("B", np.zeros((n_z, 1))), S=pd.get("S", np.zeros((1, n_z))),
                               N=pd["N"], C=pd["C"], Cp=pd.get("Cp", np.eye(n_z)),
                               lipschitz_ell=pd.get("lipschitz_ell", 1.0), psi=psi,
                               name=pd.get("name", "plant"))
        except KeyError as exc:
            raise ConfigError(f"plant is missing {exc}") from None
        issues = validate_plant(plant)
        if issues:
            raise ConfigError("invalid plant: " + "; ".join(str(v) for v in issues))
        sd = data["sampling"]
        if "T2" not in sd:
            raise ConfigError("sampling needs T2")
        T2 = float(sd["T2"])
        sampling = SamplingSpec(float(sd.get("T1", 0.5 * T2)), T2)
        cfg = cls(plant=plant, sampling=sampling, source=source)
        if "T2_range" in sd:
            lo, hi = (float(v) for v in sd["T2_range"])
            cfg.T2_range = (lo, hi)
        if "T2_grid" in sd:
            g = sd["T2_grid"]
            cfg.T2_grid = parse_grid(g) if isinstance(g, str) else np.asarray(g, dtype=float)
        dd = data.get("design", {})
        cfg.method = dd.get("method", cfg.method)
        cfg.lambda_t = float(dd.get("lambda_t", cfg.lambda_t))
        cfg.gamma = None if dd.get("gamma") is None else float(dd["gamma"])
        if "delta_grid" in dd:
            g = dd["delta_grid"]
            cfg.delta_grid = parse_grid(g) if isinstance(g, str) else np.asarray(g, dtype=float)
        cfg.gain_cap = None if dd.get("gain_cap") is None else float(dd["gain_cap"])
        if "gains" in data:
            cfg.gains = ObserverGains.from_dict(data["gains"])
        sim = data.get("simulate", {})
        if "init" in sim:
            v = np.asarray(sim["init"], dtype=float)
            if v.size != 2 * plant.n_z + plant.n_y + 1:
                raise ConfigError(f"simulate.init needs {2 * plant.n_z + plant.n_y + 1} entries")
            cfg.init = HybridState.from_vector(v, plant.n_z, plant.n_y)
        for key in ("w", "eta"):
            if key in sim:
                if sim[key] not in SIGNALS:
                    raise ConfigError(f"unknown signal selector {sim[key]!r}; known: {sorted(SIGNALS)}")
                setattr(cfg, key, sim[key])
        if "jitter" in sim:
            if sim["jitter"] not in JITTER_KINDS:
                raise ConfigError(f"unknown jitter kind {sim['jitter']!r}")
            cfg.jitter = sim["jitter"]
        cfg.seed = int(sim.get("seed", 0))
        if "horizon" in sim:
            t, j = sim["horizon"]
            cfg.horizon = (float(t), int(j))
        cfg.h_max = None if sim.get("h_max") is None else float(sim["h_max"])
        out = data.get("output", {})
        cfg.out_dir = out.get("dir", cfg.out_dir)
        cfg.prefix = out.get("prefix", cfg.prefix)
        return cfg

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: malformed JSON ({exc})") from None
        return cls.from_dict(data, source=str(path))

    def signals(self) -> SignalSpec:
        return SignalSpec(w=SIGNALS[self.w], eta=SIGNALS[self.eta])

    def jitter_sequence(self, seed: int | None = None) -> JitterSequence:
        return JitterSequence(self.jitter, self.sampling.T1, self.sampling.T2,
                              seed=self.seed if seed is None else seed)


def bundled(name: str) -> Path:
    """Path of a scenario shipped with the package (example1.json, ...)."""
    return Path(__file__).with_name("data") / name
