"""Run configuration: JSON ingestion, presets, and problem assembly."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .cohomology import amplification_estimate
from .constants import build_schedule, constants_chain
from .diophantine import FrequencyVector, catalog
from .engine import EngineOptions, HamiltonianDecomposition
from .series import FTSeries

__all__ = ["RunConfig", "ConfigError", "load_config", "prepare_run",
           "PRESETS"]


class ConfigError(ValueError):
    pass


# Field defaults; presets override a subset, explicit keys override both.
_DEFAULTS = {
    "preset": None,
    "n": 2,
    "tau": 1.0,
    "omega": "golden",
    "gamma": None,
    "C": None,
    "Q": "identity",
    "R": {"preset": "two-cosine", "eps": 1e-5},
    "r": 1.0,
    "s": 0.05,
    "theta": 0.05,
    "K_max": 32,
    "D_max": 4,
    "grid_size": None,   # default: transform size 2 K_max + 2 -> power of 2
    "ode_steps": 64,
    "k_max": 6,
    "mode": "measured",
    "c6": None,          # default: amplification estimate at (omega, K, d0)
    "floor_rel": 1e-14,
    "seed": 20260810,
    "cert_K": 64,
}

PRESETS = {
    # the desk example: quadratic decay at realistic scale, measured mode
    "golden-2d": {
        "omega": "golden", "tau": 1.0, "Q": "identity",
        "R": {"preset": "two-cosine", "eps": 1e-5},
        "r": 1.0, "s": 0.05, "theta": 0.05, "mode": "measured",
        "K_max": 16, "grid_size": 64, "ode_steps": 64, "k_max": 5,
        "floor_rel": 1e-22,
    },
    # fully hypothesis-checked run; eps small enough for (Man) to hold
    "golden-2d-schedule": {
        "omega": "golden", "tau": 1.0, "Q": "identity",
        "R": {"preset": "two-cosine", "eps": 1e-20},
        "r": 1.0, "s": 0.05, "theta": 1e-5, "mode": "schedule",
        "K_max": 16, "grid_size": 64, "ode_steps": 64, "k_max": 3,
        "floor_rel": 1e-22,
    },
}


@dataclass(frozen=True)
class RunConfig:
    preset: str | None
    n: int
    tau: float
    omega: object
    gamma: float | None
    C: object
    Q: object
    R: object
    r: float
    s: float
    theta: float
    K_max: int
    D_max: int
    grid_size: int
    ode_steps: int
    k_max: int
    mode: str
    c6: float | None
    floor_rel: float
    seed: int
    cert_K: int

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, raw):
        unknown = set(raw) - set(_DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        merged = dict(_DEFAULTS)
        preset = raw.get("preset")
        if preset is not None:
            if preset not in PRESETS:
                raise ConfigError(f"unknown preset {preset!r}")
            merged.update(PRESETS[preset])
        merged.update({k: v for k, v in raw.items() if v is not None})
        merged["preset"] = preset
        if merged["grid_size"] is None:
            merged["grid_size"] = _next_pow2(2 * merged["K_max"] + 2)
        cfg = cls(**merged)
        cfg.validate()
        return cfg

    def validate(self):
        if self.n < 2:
            raise ConfigError("n must be >= 2")
        if self.tau < self.n - 1:
            raise ConfigError(f"tau must satisfy tau >= n-1 = {self.n - 1}")
        for name in ("r", "s", "theta"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0")
        if not self.s <= self.r ** (self.tau + 1.0) <= 1.0:
            raise ConfigError(
                f"hypothesis 0 < s <= r^(tau+1) <= 1 fails: s={self.s}, "
                f"r^(tau+1)={self.r ** (self.tau + 1.0)}")
        for name in ("K_max", "D_max", "grid_size", "ode_steps", "k_max",
                     "cert_K"):
            if int(getattr(self, name)) <= 0:
                raise ConfigError(f"{name} must be a positive integer")
        if self.mode not in ("schedule", "measured"):
            raise ConfigError(f"mode must be schedule|measured, "
                              f"got {self.mode!r}")
        if self.grid_size < 2 * 2 + 2:
            raise ConfigError("grid_size too small")
        if self.floor_rel <= 0:
            raise ConfigError("floor_rel must be > 0")


def _next_pow2(m):
    return 1 << (max(int(m), 1) - 1).bit_length()


def load_config(path):
    """Read and validate a JSON config file."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config parse error at line {exc.lineno}, column {exc.colno}: "
            f"{exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return RunConfig.from_dict(raw)


def _build_omega(cfg) -> FrequencyVector:
    if isinstance(cfg.omega, str):
        fv = catalog(cfg.omega)
        if fv.n != cfg.n or fv.tau != cfg.tau:
            fv = FrequencyVector(fv.omega, cfg.tau, cfg.gamma)
    else:
        fv = FrequencyVector(np.asarray(cfg.omega, dtype=float), cfg.tau,
                             cfg.gamma)
    if cfg.gamma is not None:
        fv = FrequencyVector(fv.omega, fv.tau, cfg.gamma)
    return fv.certified(cfg.cert_K)


def _build_Q(cfg):
    n = cfg.n
    if cfg.Q == "identity":
        one = FTSeries.constant(n, 1.0)
        zero = FTSeries.zero(n)
        return [[one if i == j else zero for j in range(n)]
                for i in range(n)]
    if isinstance(cfg.Q, list):
        return [[FTSeries.from_json_obj(obj) for obj in row]
                for row in cfg.Q]
    raise ConfigError(f"unsupported Q spec {cfg.Q!r}")


def _build_R(cfg):
    n = cfg.n
    spec = cfg.R
    if isinstance(spec, dict) and "series" in spec:
        return FTSeries.from_json_obj(spec["series"])
    if isinstance(spec, dict) and spec.get("preset") == "two-cosine":
        eps = float(spec.get("eps", 1e-5))
        k2 = (1, 1) + (0,) * (n - 2)
        base = FTSeries.cosine(n, (1,) + (0,) * (n - 1), eps) \
            + FTSeries.cosine(n, k2, eps)
        lin = FTSeries.constant(n, 1.0) + FTSeries.y_monomial(
            n, (1,) + (0,) * (n - 1))
        return base.mul(lin, k_max=cfg.K_max, d_max=cfg.D_max)
    raise ConfigError(f"unsupported R spec {spec!r}")


def prepare_run(cfg: RunConfig):
    """Assemble (decomposition, chain, schedule, options, omega, C, theta).

    Refuses to start on an exactly resonant frequency; the c6 default is
    the empirical amplification estimate at the run's (omega, K, delta_0).
    """
    omega = _build_omega(cfg)
    if omega.certification.gamma_min == 0.0:
        from .engine import HypothesisError
        raise HypothesisError(
            f"omega is resonant: <omega, k> = 0 at "
            f"k = {omega.certification.argmin_k}")
    gamma = omega.effective_gamma()
    delta0 = cfg.s ** (1.0 / (cfg.tau + 1.0)) / 32.0
    if cfg.c6 is None:
        c6 = amplification_estimate(omega, cfg.K_max, delta0)
        c6_source = "amplification_estimate"
    else:
        c6, c6_source = float(cfg.c6), "config"
    Q = _build_Q(cfg)
    if cfg.C is not None:
        C = np.asarray(cfg.C, dtype=float)
    else:
        from .linearized import mean_matrix
        C = mean_matrix(Q)
    chain = constants_chain(cfg.n, cfg.tau, gamma, C, omega.omega_norm, c6,
                            c6_source=c6_source)
    schedule = build_schedule(cfg.r, cfg.s, cfg.theta, cfg.tau, chain,
                              k_max=cfg.k_max + 1,
                              enforce_theta=(cfg.mode == "schedule"))
    R = _build_R(cfg)
    decomp = HamiltonianDecomposition.from_parts(
        0.0, omega, Q, R, cfg.r, cfg.s)
    options = EngineOptions(mode=cfg.mode, k_max_steps=cfg.k_max,
                            grid_size=cfg.grid_size, ode_steps=cfg.ode_steps,
                            series_k_max=cfg.K_max,
                            series_d_max=cfg.D_max,
                            floor_rel=cfg.floor_rel, seed=cfg.seed)
    return decomp, chain, schedule, options, omega, C
