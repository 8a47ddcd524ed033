"""Constitutive laws and the 1D pathwise finite-volume solver.

Between forcing jumps the solver advances mass and momentum with an
explicit conservative scheme (Rusanov convective fluxes, central viscous
stress) plus the body force rho * dw/dt from the continuous part of the
forcing.  At a forcing jump the momentum is kicked by rho * (field jump)
per cell, which leaves density and the velocity relative to the forcing
unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .noise import (
    NoiseField,
    continuous_increment_field,
    field_at,
    jump_field,
)

__all__ = [
    "PressureLaw",
    "Viscosity",
    "Grid1D",
    "State",
    "TrajectoryRecord",
    "Trajectory",
    "VacuumBreachError",
    "pressure",
    "pressure_derivative",
    "pressure_potential",
    "stress_1d",
    "cfl_dt",
    "step_deterministic",
    "apply_jump_kick",
    "solve_path",
    "velocity",
    "uniform_profile",
    "gaussian_bump_profile",
    "riemann_profile",
    "initial_energy",
]

VACUUM_FLOOR_FACTOR = 1e-13
GAMMA_MIN = 1.5


@dataclass(frozen=True)
class PressureLaw:
    """Power-law pressure p(rho) = coeff * rho**gamma with gamma > 3/2."""

    gamma: float
    coeff: float = 1.0
    allow_low_gamma: bool = False

    def __post_init__(self):
        if self.coeff <= 0:
            raise ValueError("pressure coefficient must be positive")
        if self.gamma <= 1.0:
            raise ValueError("gamma must exceed 1")
        if self.gamma <= GAMMA_MIN and not self.allow_low_gamma:
            raise ValueError(
                f"gamma={self.gamma} is at or below {GAMMA_MIN}; "
                "pass allow_low_gamma to override"
            )

    @property
    def p_inf(self) -> float:
        """Limit of p'(rho) / rho**(gamma-1) for large rho."""
        return self.coeff * self.gamma


@dataclass(frozen=True)
class Viscosity:
    mu_shear: float
    eta_bulk: float = 0.0

    def __post_init__(self):
        if self.mu_shear <= 0:
            raise ValueError("shear viscosity must be positive")
        if self.eta_bulk < 0:
            raise ValueError("bulk viscosity must be nonnegative")

    @property
    def lame_1d(self) -> float:
        return (4.0 / 3.0) * self.mu_shear + self.eta_bulk


@dataclass(frozen=True)
class Grid1D:
    n_cells: int
    length: float

    def __post_init__(self):
        if self.n_cells < 4:
            raise ValueError("need at least 4 cells")
        if self.length <= 0:
            raise ValueError("domain length must be positive")

    @property
    def dx(self) -> float:
        return self.length / self.n_cells

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.dx

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n_cells + 1) * self.dx

    @property
    def n_nodes(self) -> int:
        return self.n_cells + 1


@dataclass(eq=False)
class State:
    """Cell-averaged density and momentum at one time instant."""

    t: float
    rho: np.ndarray
    m: np.ndarray

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=float)
        self.m = np.asarray(self.m, dtype=float)
        if self.rho.shape != self.m.shape or self.rho.ndim != 1:
            raise ValueError("rho and m must be equal-length 1d arrays")

    def copy(self) -> "State":
        return State(self.t, self.rho.copy(), self.m.copy())


class VacuumBreachError(RuntimeError):
    """Raised when the scheme would produce a negative density."""

    def __init__(self, t: float, min_rho: float):
        super().__init__(f"vacuum-breach at t={t}: min density {min_rho}")
        self.t = t
        self.min_rho = min_rho


def pressure(law: PressureLaw, rho) -> np.ndarray | float:
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("density must be nonnegative")
    out = law.coeff * rho**law.gamma
    return out if out.ndim else float(out)


def pressure_derivative(law: PressureLaw, rho) -> np.ndarray | float:
    rho = np.asarray(rho, dtype=float)
    out = law.coeff * law.gamma * rho ** (law.gamma - 1.0)
    return out if out.ndim else float(out)


def pressure_potential(law: PressureLaw, rho) -> np.ndarray | float:
    """Convex potential rho * int_1^rho p(z)/z^2 dz, in closed form."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("density must be nonnegative")
    out = law.coeff * (rho**law.gamma - rho) / (law.gamma - 1.0)
    return out if out.ndim else float(out)


def total_mass_of(rho: np.ndarray, grid: Grid1D) -> float:
    return float(rho.sum() * grid.dx)


def velocity(rho: np.ndarray, m: np.ndarray, grid: Grid1D) -> np.ndarray:
    """m / rho with cells below the vacuum floor treated as stagnant."""
    floor = VACUUM_FLOOR_FACTOR * total_mass_of(rho, grid) / grid.length
    u = np.zeros_like(m)
    live = rho > floor
    u[live] = m[live] / rho[live]
    return u


def _face_gradient(u: np.ndarray, dx: float, boundary: str) -> np.ndarray:
    """du/dx at the n+1 faces; walls use one-sided differences against u=0."""
    g = np.empty(u.size + 1)
    g[1:-1] = np.diff(u) / dx
    if boundary == "periodic":
        wrap = (u[0] - u[-1]) / dx
        g[0] = wrap
        g[-1] = wrap
    else:
        g[0] = u[0] / (0.5 * dx)
        g[-1] = -u[-1] / (0.5 * dx)
    return g


def stress_1d(
    visc: Viscosity, u: np.ndarray, grid: Grid1D, boundary: str = "noslip"
) -> np.ndarray:
    """Face-valued viscous stress lame_1d * du/dx."""
    return visc.lame_1d * _face_gradient(u, grid.dx, boundary)


def cfl_dt(
    state: State,
    law: PressureLaw,
    visc: Viscosity,
    grid: Grid1D,
    cfl: float,
    max_dt: float | None = None,
) -> float:
    """Stable explicit step: convective and viscous bounds, optionally
    clamped to the gap before the next event."""
    if not 0 < cfl <= 1:
        raise ValueError("cfl must lie in (0, 1]")
    floor = VACUUM_FLOOR_FACTOR * total_mass_of(state.rho, grid) / grid.length
    live = state.rho > floor
    if not np.any(live):
        raise ValueError("all-vacuum state has no stable time step")
    u = velocity(state.rho, state.m, grid)
    c_max = float(np.sqrt(np.max(pressure_derivative(law, state.rho))))
    dt = grid.dx / (np.max(np.abs(u)) + c_max)
    if visc.lame_1d > 0:
        dt = min(dt, grid.dx**2 * float(state.rho[live].min()) / (2.0 * visc.lame_1d))
    dt *= cfl
    if max_dt is not None:
        dt = min(dt, max_dt)
    if dt <= 0:
        raise ValueError("nonpositive time step")
    return float(dt)


def _rusanov_fluxes(
    rho: np.ndarray, m: np.ndarray, u: np.ndarray, law: PressureLaw, boundary: str
) -> tuple[np.ndarray, np.ndarray]:
    """Mass and momentum fluxes at the n+1 faces.

    No-slip walls use reflected ghost cells (rho mirrored, m negated), which
    makes the wall mass flux exactly zero.
    """
    if boundary == "periodic":
        rho_e = np.concatenate([rho[-1:], rho, rho[:1]])
        m_e = np.concatenate([m[-1:], m, m[:1]])
        u_e = np.concatenate([u[-1:], u, u[:1]])
    else:
        rho_e = np.concatenate([rho[:1], rho, rho[-1:]])
        m_e = np.concatenate([-m[:1], m, -m[-1:]])
        u_e = np.concatenate([-u[:1], u, -u[-1:]])
    p_e = law.coeff * rho_e**law.gamma
    c_e = np.sqrt(law.coeff * law.gamma * rho_e ** (law.gamma - 1.0))
    f_rho = m_e
    f_m = m_e * u_e + p_e
    s = np.maximum(np.abs(u_e[:-1]) + c_e[:-1], np.abs(u_e[1:]) + c_e[1:])
    flux_rho = 0.5 * (f_rho[:-1] + f_rho[1:]) - 0.5 * s * (rho_e[1:] - rho_e[:-1])
    flux_m = 0.5 * (f_m[:-1] + f_m[1:]) - 0.5 * s * (m_e[1:] - m_e[:-1])
    return flux_rho, flux_m


def step_deterministic(
    state: State,
    noise: NoiseField | None,
    dt: float,
    law: PressureLaw,
    visc: Viscosity,
    grid: Grid1D,
    boundary: str = "noslip",
) -> State:
    """One explicit step with no forcing jump inside (t, t+dt].

    Conservative convection + pressure via Rusanov fluxes, explicit central
    viscosity, then the body force from the slope of the continuous forcing
    part: m += dt * rho * dw/dt per cell.
    """
    rho, m = state.rho, state.m
    u = velocity(rho, m, grid)
    flux_rho, flux_m = _rusanov_fluxes(rho, m, u, law, boundary)
    stress = stress_1d(visc, u, grid, boundary)
    lam = dt / grid.dx
    rho_new = rho - lam * np.diff(flux_rho)
    m_new = m - lam * np.diff(flux_m) + lam * np.diff(stress)
    t_new = state.t + dt
    if noise is not None and noise.paths:
        # exact integral of the piecewise-linear continuous part over the step
        dw_nodes = continuous_increment_field(noise, state.t, t_new)
        dw_cells = 0.5 * (dw_nodes[:-1] + dw_nodes[1:])
        m_new = m_new + rho_new * dw_cells
    if np.any(rho_new < 0.0):
        raise VacuumBreachError(t_new, float(rho_new.min()))
    return State(t_new, rho_new, m_new)


def apply_jump_kick(state: State, dw_field: np.ndarray) -> State:
    """Momentum kick m += rho * dw at a forcing jump; density untouched.

    The relative momentum m - rho*w is the same before and after because
    the forcing field itself jumps by dw.
    """
    dw_field = np.asarray(dw_field, dtype=float)
    if dw_field.shape != state.m.shape:
        raise ValueError("jump field shape does not match the state")
    return State(state.t, state.rho, state.m + state.rho * dw_field)


@dataclass(eq=False)
class TrajectoryRecord:
    """State snapshot with the forcing field at the same instant.

    ``kind`` is one of 'initial', 'output', 'step', 'pre_jump', 'post_jump';
    jump times always carry a pre/post pair at equal t.  ``w_nodes`` holds
    the forcing field on grid nodes (left limit for pre_jump records).
    """

    t: float
    kind: str
    rho: np.ndarray
    m: np.ndarray
    w_nodes: np.ndarray

    @property
    def w_cells(self) -> np.ndarray:
        return 0.5 * (self.w_nodes[:-1] + self.w_nodes[1:])

    def state(self) -> State:
        return State(self.t, self.rho, self.m)


@dataclass(eq=False)
class Trajectory:
    records: list[TrajectoryRecord]
    grid: Grid1D
    total_mass: float
    cfl: float
    dt_history: np.ndarray
    noise_digest: str = ""

    def times(self, kinds: Sequence[str] | None = None) -> np.ndarray:
        recs = self.records if kinds is None else [r for r in self.records if r.kind in kinds]
        return np.array([r.t for r in recs])

    def output_records(self) -> list[TrajectoryRecord]:
        return [r for r in self.records if r.kind in ("initial", "output")]

    def jump_pairs(self) -> list[tuple[TrajectoryRecord, TrajectoryRecord]]:
        pairs = []
        for i, rec in enumerate(self.records):
            if rec.kind == "pre_jump":
                post = self.records[i + 1]
                if post.kind != "post_jump" or post.t != rec.t:
                    raise RuntimeError("malformed jump pair in trajectory")
                pairs.append((rec, post))
        return pairs

    def record_at(self, t: float, prefer: str = "output") -> TrajectoryRecord:
        hits = [r for r in self.records if r.t == t]
        if not hits:
            raise KeyError(f"no record at t={t}")
        for r in hits:
            if r.kind == prefer:
                return r
        return hits[-1]


def _validate_initial(rho0: np.ndarray, m0: np.ndarray, grid: Grid1D) -> float:
    if np.any(rho0 < 0):
        raise ValueError("initial density must be nonnegative")
    mass = total_mass_of(rho0, grid)
    if mass <= 0:
        raise ValueError("initial mass must be positive")
    dead = rho0 == 0.0
    if np.any(m0[dead] != 0.0):
        raise ValueError("momentum must vanish on vacuum cells")
    return mass


def solve_path(
    rho0: np.ndarray,
    m0: np.ndarray,
    noise: NoiseField | None,
    law: PressureLaw,
    visc: Viscosity,
    grid: Grid1D,
    T: float,
    cfl: float,
    output_times: Sequence[float] | None = None,
    dt_fixed: float | None = None,
    record_steps: bool = False,
    noise_digest: str = "",
) -> Trajectory:
    """March one forcing realization from 0 to T.

    Steps land exactly on forcing jump times and output times; each jump
    stores a pre/post record pair at equal t.  With ``record_steps`` every
    accepted step is recorded, which the residual diagnostics need for
    their time quadrature.  ``dt_fixed`` bypasses the adaptive bound (the
    caller guarantees stability, e.g. in refinement studies).
    """
    rho0 = np.asarray(rho0, dtype=float)
    m0 = np.asarray(m0, dtype=float)
    if rho0.size != grid.n_cells:
        raise ValueError("initial data does not match the grid")
    if noise is not None and noise.paths:
        if noise.modes[0].values.size != grid.n_nodes:
            raise ValueError("noise modes are sampled on a different grid")
        if noise.horizon < T:
            raise ValueError("noise horizon shorter than the run horizon")
    mass = _validate_initial(rho0, m0, grid)

    jump_times = noise.jump_times if noise is not None else np.empty(0)
    jump_times = jump_times[(jump_times > 0) & (jump_times <= T)]
    out_times = np.asarray(sorted(set(float(t) for t in (output_times or []))))
    out_times = out_times[(out_times > 0) & (out_times <= T)]
    events = np.unique(np.concatenate([jump_times, out_times, [T]]))

    def w_nodes_at(t: float, side: str = "right") -> np.ndarray:
        if noise is None or not noise.paths:
            return np.zeros(grid.n_nodes)
        return field_at(noise, t, side=side)

    state = State(0.0, rho0.copy(), m0.copy())
    records = [TrajectoryRecord(0.0, "initial", rho0.copy(), m0.copy(), w_nodes_at(0.0))]
    dts: list[float] = []
    jump_set = set(float(t) for t in jump_times)
    out_set = set(float(t) for t in out_times)

    for target in events:
        while state.t < target:
            gap = target - state.t
            if dt_fixed is not None:
                dt = min(dt_fixed, gap)
            else:
                dt = cfl_dt(state, law, visc, grid, cfl, max_dt=gap)
            if gap - dt < 1e-14 * max(T, 1.0):
                dt = gap
            state = step_deterministic(state, noise, dt, law, visc, grid)
            if dt == gap:
                state.t = float(target)  # land exactly on the event
            dts.append(dt)
            if record_steps and state.t < target:
                records.append(
                    TrajectoryRecord(state.t, "step", state.rho.copy(), state.m.copy(), w_nodes_at(state.t))
                )
        t = float(target)
        is_jump = t in jump_set
        if is_jump:
            pre_nodes = w_nodes_at(t, side="left")
            dw_nodes = jump_field(noise, t)
            post_nodes = pre_nodes + dw_nodes
            records.append(TrajectoryRecord(t, "pre_jump", state.rho.copy(), state.m.copy(), pre_nodes))
            dw_cells = 0.5 * (dw_nodes[:-1] + dw_nodes[1:])
            state = apply_jump_kick(state, dw_cells)
            records.append(TrajectoryRecord(t, "post_jump", state.rho.copy(), state.m.copy(), post_nodes))
        if t in out_set or t == T:
            records.append(
                TrajectoryRecord(t, "output", state.rho.copy(), state.m.copy(),
                                 post_nodes if is_jump else w_nodes_at(t))
            )
        elif record_steps and not is_jump:
            records.append(TrajectoryRecord(t, "step", state.rho.copy(), state.m.copy(), w_nodes_at(t)))

    return Trajectory(records, grid, mass, cfl, np.asarray(dts), noise_digest)


def uniform_profile(grid: Grid1D, rho0: float, u0: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    if rho0 <= 0:
        raise ValueError("uniform density must be positive")
    rho = np.full(grid.n_cells, float(rho0))
    return rho, rho * u0


def gaussian_bump_profile(
    grid: Grid1D,
    base: float,
    amplitude: float,
    width: float,
    center: float | None = None,
    u0: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    if base <= 0 or base + min(0.0, amplitude) <= 0:
        raise ValueError("bump profile must stay strictly positive")
    if width <= 0:
        raise ValueError("bump width must be positive")
    c = 0.5 * grid.length if center is None else center
    x = grid.centers
    rho = base + amplitude * np.exp(-0.5 * ((x - c) / width) ** 2)
    return rho, rho * u0


def riemann_profile(
    grid: Grid1D, rho_left: float, rho_right: float, u_left: float = 0.0, u_right: float = 0.0
) -> tuple[np.ndarray, np.ndarray]:
    if rho_left <= 0 or rho_right <= 0:
        raise ValueError("riemann states must have positive density")
    x = grid.centers
    left = x < 0.5 * grid.length
    rho = np.where(left, rho_left, rho_right)
    u = np.where(left, u_left, u_right)
    return rho, rho * u


def initial_energy(rho: np.ndarray, m: np.ndarray, law: PressureLaw, grid: Grid1D) -> float:
    """Kinetic plus pressure-potential energy of initial data (vacuum cells
    contribute no kinetic part)."""
    kin = np.zeros_like(rho)
    live = rho > 0
    kin[live] = 0.5 * m[live] ** 2 / rho[live]
    return float(np.sum(kin + pressure_potential(law, rho)) * grid.dx)
