"""Run configuration: INI-style file with sections
[grid] [pressure] [viscosity] [noise] [initial] [run] [stability].

Validation is exhaustive: every violated constraint is collected and
reported with its section.key name before anything runs.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, field, fields, asdict

import numpy as np

from .noise import JumpLayer, LevyMeasureDiscrete, LevySpec

__all__ = ["RunConfig", "ConfigError", "parse_config", "parse_config_text", "serialize_config"]

GAMMA_MIN = 1.5


class ConfigError(ValueError):
    """Carries every violated constraint, one message per offending key."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {p}" for p in problems))


@dataclass
class RunConfig:
    # [grid]
    n_cells: int = 256
    length: float = 1.0
    # [pressure]
    gamma: float = 2.0
    pressure_coeff: float = 1.0
    allow_low_gamma: bool = False
    # [viscosity]
    mu_shear: float = 0.0075
    eta_bulk: float = 0.0
    # [noise]
    n_modes: int = 1
    mode_decay: float = 2.0
    mode_amplitude: float = 1.0
    drift: float = 0.0
    brownian_scale: float = 0.0
    levy_radii: tuple[float, ...] = ()
    layer_atoms: tuple[tuple[tuple[float, float], ...], ...] = ()
    layer_compensated: tuple[bool, ...] = ()
    noise_grid_points: int = 129
    # [initial]
    profile: str = "uniform"
    rho_base: float = 1.0
    bump_amplitude: float = 0.2
    bump_width: float = 0.1
    bump_center: float = -1.0  # negative means domain midpoint
    velocity0: float = 0.0
    rho_left: float = 1.0
    rho_right: float = 0.5
    u_left: float = 0.0
    u_right: float = 0.0
    # [run]
    t_final: float = 0.5
    cfl: float = 0.4
    output_times: tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5)
    seed: int = 0
    ensemble_size: int = 1
    record_steps: bool = False
    residual_coeff: float = 2.0
    # [stability]
    mollify_widths: tuple[float, ...] = ()

    def levy_spec(self) -> LevySpec:
        layers = tuple(
            JumpLayer(LevyMeasureDiscrete.from_atoms(atoms), comp)
            for atoms, comp in zip(self.layer_atoms, self.layer_compensated)
        )
        return LevySpec(self.drift, self.brownian_scale, layers, self.levy_radii)

    def digest(self) -> str:
        payload = repr(sorted(asdict(self).items())).encode()
        return hashlib.sha256(payload).hexdigest()[:12]


def _parse_atoms(text: str, key: str, problems: list[str]) -> tuple[tuple[float, float], ...]:
    atoms = []
    text = text.strip()
    if not text:
        return ()
    for part in text.split(";"):
        bits = part.split(":")
        if len(bits) != 2:
            problems.append(f"{key}: expected 'size:mass' pairs separated by ';', got {part!r}")
            continue
        try:
            atoms.append((float(bits[0]), float(bits[1])))
        except ValueError:
            problems.append(f"{key}: non-numeric atom {part!r}")
    return tuple(atoms)


def _floats(text: str, key: str, problems: list[str]) -> tuple[float, ...]:
    text = text.strip()
    if not text:
        return ()
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        problems.append(f"{key}: expected comma-separated numbers, got {text!r}")
        return ()


_REQUIRED = {
    "grid": ("n_cells", "length"),
    "pressure": ("gamma",),
    "viscosity": ("mu_shear",),
    "run": ("t_final",),
}


def parse_config_text(text: str, allow_low_gamma: bool = False) -> RunConfig:
    cp = configparser.ConfigParser()
    cp.read_string(text)
    problems: list[str] = []

    for section, keys in _REQUIRED.items():
        for key in keys:
            if not cp.has_option(section, key):
                problems.append(f"{section}.{key}: required key is missing")
    if problems:
        raise ConfigError(problems)

    def get(section, key, cast, default):
        if not cp.has_option(section, key):
            return default
        raw = cp.get(section, key)
        try:
            if cast is bool:
                return cp.getboolean(section, key)
            return cast(raw)
        except ValueError:
            problems.append(f"{section}.{key}: cannot parse {raw!r}")
            return default

    cfg = RunConfig(
        n_cells=get("grid", "n_cells", int, 256),
        length=get("grid", "length", float, 1.0),
        gamma=get("pressure", "gamma", float, 2.0),
        pressure_coeff=get("pressure", "coeff", float, 1.0),
        allow_low_gamma=allow_low_gamma or get("pressure", "allow_low_gamma", bool, False),
        mu_shear=get("viscosity", "mu_shear", float, 0.0075),
        eta_bulk=get("viscosity", "eta_bulk", float, 0.0),
        n_modes=get("noise", "modes", int, 1),
        mode_decay=get("noise", "mode_decay", float, 2.0),
        mode_amplitude=get("noise", "amplitude", float, 1.0),
        drift=get("noise", "drift", float, 0.0),
        brownian_scale=get("noise", "brownian_scale", float, 0.0),
        noise_grid_points=get("noise", "grid_points", int, 129),
        profile=get("initial", "profile", str, "uniform"),
        rho_base=get("initial", "rho_base", float, 1.0),
        bump_amplitude=get("initial", "amplitude", float, 0.2),
        bump_width=get("initial", "width", float, 0.1),
        bump_center=get("initial", "center", float, -1.0),
        velocity0=get("initial", "velocity", float, 0.0),
        rho_left=get("initial", "rho_left", float, 1.0),
        rho_right=get("initial", "rho_right", float, 0.5),
        u_left=get("initial", "u_left", float, 0.0),
        u_right=get("initial", "u_right", float, 0.0),
        t_final=get("run", "t_final", float, 0.5),
        cfl=get("run", "cfl", float, 0.4),
        seed=get("run", "seed", int, 0),
        ensemble_size=get("run", "ensemble_size", int, 1),
        record_steps=get("run", "record_steps", bool, False),
        residual_coeff=get("run", "residual_coeff", float, 2.0),
    )
    if cp.has_option("run", "output_times"):
        cfg.output_times = _floats(cp.get("run", "output_times"), "run.output_times", problems)
    if cp.has_option("stability", "widths"):
        cfg.mollify_widths = _floats(cp.get("stability", "widths"), "stability.widths", problems)
    if cp.has_option("noise", "levy_radii"):
        cfg.levy_radii = _floats(cp.get("noise", "levy_radii"), "noise.levy_radii", problems)
    n_layers = len(cfg.levy_radii)
    atoms, comps = [], []
    for i in range(n_layers):
        key = f"layer{i}_atoms"
        if not cp.has_option("noise", key):
            problems.append(f"noise.{key}: required key is missing (one per truncation radius)")
            atoms.append(())
        else:
            atoms.append(_parse_atoms(cp.get("noise", key), f"noise.{key}", problems))
        comps.append(get("noise", f"layer{i}_compensated", bool, i != 0))
    cfg.layer_atoms = tuple(atoms)
    cfg.layer_compensated = tuple(comps)

    problems.extend(validate(cfg))
    if problems:
        raise ConfigError(problems)
    return cfg


def parse_config(path: str, allow_low_gamma: bool = False) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), allow_low_gamma=allow_low_gamma)


def validate(cfg: RunConfig) -> list[str]:
    """Every violated constraint, tagged with its section.key."""
    p: list[str] = []
    if cfg.n_cells < 4:
        p.append("grid.n_cells: need at least 4 cells")
    if cfg.length <= 0:
        p.append("grid.length: must be positive")
    if cfg.gamma <= 1.0:
        p.append("pressure.gamma: must exceed 1")
    elif cfg.gamma <= GAMMA_MIN and not cfg.allow_low_gamma:
        p.append(
            f"pressure.gamma: {cfg.gamma} is at or below {GAMMA_MIN}; "
            "pass --allow-low-gamma to override"
        )
    if cfg.pressure_coeff <= 0:
        p.append("pressure.coeff: must be positive")
    if cfg.mu_shear <= 0:
        p.append("viscosity.mu_shear: must be positive")
    if cfg.eta_bulk < 0:
        p.append("viscosity.eta_bulk: must be nonnegative")
    if cfg.n_modes < 0:
        p.append("noise.modes: must be nonnegative")
    if cfg.brownian_scale < 0:
        p.append("noise.brownian_scale: must be nonnegative")
    if cfg.noise_grid_points < 2:
        p.append("noise.grid_points: need at least 2 samples")
    if cfg.t_final <= 0:
        p.append("run.t_final: must be positive")
    if not 0 < cfg.cfl <= 1:
        p.append("run.cfl: must lie in (0, 1]")
    if cfg.ensemble_size < 1:
        p.append("run.ensemble_size: must be at least 1")
    if any(t <= 0 or t > cfg.t_final for t in cfg.output_times):
        p.append("run.output_times: entries must lie in (0, t_final]")
    if list(cfg.output_times) != sorted(set(cfg.output_times)):
        p.append("run.output_times: must be strictly increasing")
    if cfg.profile not in ("uniform", "gaussian-bump", "riemann"):
        p.append(f"initial.profile: unknown profile {cfg.profile!r}")
    if cfg.profile == "uniform" and cfg.rho_base <= 0:
        p.append("initial.rho_base: must be positive")
    if cfg.profile == "gaussian-bump":
        if cfg.rho_base <= 0 or cfg.rho_base + min(0.0, cfg.bump_amplitude) <= 0:
            p.append("initial.amplitude: density profile must stay positive")
        if cfg.bump_width <= 0:
            p.append("initial.width: must be positive")
    if cfg.profile == "riemann" and (cfg.rho_left <= 0 or cfg.rho_right <= 0):
        p.append("initial.rho_left/rho_right: must be positive")
    if any(w <= 0 for w in cfg.mollify_widths):
        p.append("stability.widths: must be positive")
    if list(cfg.mollify_widths) != sorted(cfg.mollify_widths, reverse=True):
        p.append("stability.widths: must be decreasing")
    try:
        cfg.levy_spec()
    except ValueError as exc:
        p.append(f"noise.levy_radii/layers: {exc}")
    if cfg.residual_coeff <= 0:
        p.append("run.residual_coeff: must be positive")
    return p


def serialize_config(cfg: RunConfig) -> str:
    """Write the validated structure back to INI text (round-trips)."""
    cp = configparser.ConfigParser()
    cp["grid"] = {"n_cells": str(cfg.n_cells), "length": repr(cfg.length)}
    cp["pressure"] = {
        "gamma": repr(cfg.gamma),
        "coeff": repr(cfg.pressure_coeff),
        "allow_low_gamma": str(cfg.allow_low_gamma).lower(),
    }
    cp["viscosity"] = {"mu_shear": repr(cfg.mu_shear), "eta_bulk": repr(cfg.eta_bulk)}
    noise = {
        "modes": str(cfg.n_modes),
        "mode_decay": repr(cfg.mode_decay),
        "amplitude": repr(cfg.mode_amplitude),
        "drift": repr(cfg.drift),
        "brownian_scale": repr(cfg.brownian_scale),
        "grid_points": str(cfg.noise_grid_points),
    }
    if cfg.levy_radii:
        noise["levy_radii"] = ",".join(repr(r) for r in cfg.levy_radii)
        for i, (atoms, comp) in enumerate(zip(cfg.layer_atoms, cfg.layer_compensated)):
            noise[f"layer{i}_atoms"] = ";".join(f"{repr(z)}:{repr(m)}" for z, m in atoms)
            noise[f"layer{i}_compensated"] = str(comp).lower()
    cp["noise"] = noise
    cp["initial"] = {
        "profile": cfg.profile,
        "rho_base": repr(cfg.rho_base),
        "amplitude": repr(cfg.bump_amplitude),
        "width": repr(cfg.bump_width),
        "center": repr(cfg.bump_center),
        "velocity": repr(cfg.velocity0),
        "rho_left": repr(cfg.rho_left),
        "rho_right": repr(cfg.rho_right),
        "u_left": repr(cfg.u_left),
        "u_right": repr(cfg.u_right),
    }
    cp["run"] = {
        "t_final": repr(cfg.t_final),
        "cfl": repr(cfg.cfl),
        "output_times": ",".join(repr(t) for t in cfg.output_times),
        "seed": str(cfg.seed),
        "ensemble_size": str(cfg.ensemble_size),
        "record_steps": str(cfg.record_steps).lower(),
        "residual_coeff": repr(cfg.residual_coeff),
    }
    cp["stability"] = {"widths": ",".join(repr(w) for w in cfg.mollify_widths)}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
