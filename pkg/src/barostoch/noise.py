"""Samplers for scalar Levy paths and assembly of spatial forcing fields.

Forcing fields take the finite-mode form w(t, x) = sum_k phi_k(x) L_k(t)
with smooth spatial modes that vanish on the boundary and independent
scalar cadlag paths per mode.  Every sampler is a pure function of its
arguments and an integer seed; independent components draw from sub-seeds
hashed out of (seed, component index) so concurrent generation is safe.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .paths import CadlagPath, add_paths, continuous_value, evaluate, left_limit, zero_path

__all__ = [
    "LevyMeasureDiscrete",
    "JumpLayer",
    "LevySpec",
    "SpatialMode",
    "NoiseField",
    "component_seed",
    "sample_brownian",
    "sample_compound_poisson",
    "compensate",
    "sample_levy",
    "build_noise_field",
    "sine_modes",
    "field_at",
    "jump_field",
]

JUMP_MERGE_TOL = 1e-12


def component_seed(seed: int, index: int) -> int:
    """Deterministic integer sub-seed for an independent component."""
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1, np.uint64)[0])


def _rng(seed: int) -> np.random.Generator:
    # Philox is counter-based; identical seeds give identical streams on any platform.
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


@dataclass(frozen=True, eq=False)
class LevyMeasureDiscrete:
    """Finite jump measure concentrated on finitely many nonzero sizes."""

    sizes: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "sizes", np.asarray(self.sizes, dtype=float))
        object.__setattr__(self, "masses", np.asarray(self.masses, dtype=float))
        if self.sizes.shape != self.masses.shape or self.sizes.ndim != 1:
            raise ValueError("sizes and masses must be equal-length 1d arrays")
        if np.any(self.sizes == 0.0):
            raise ValueError("jump measure cannot carry an atom at 0")
        if self.sizes.size and np.any(self.masses <= 0.0):
            raise ValueError("atom masses must be strictly positive")

    @classmethod
    def from_atoms(cls, atoms: Sequence[tuple[float, float]]) -> "LevyMeasureDiscrete":
        if not atoms:
            return cls(np.empty(0), np.empty(0))
        z, nu = zip(*atoms)
        return cls(np.asarray(z, dtype=float), np.asarray(nu, dtype=float))

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    @property
    def mean_jump_rate(self) -> float:
        """Expected drift per unit time, sum of size times mass."""
        return float(np.dot(self.sizes, self.masses))


@dataclass(frozen=True)
class JumpLayer:
    measure: LevyMeasureDiscrete
    compensated: bool = True


@dataclass(frozen=True)
class LevySpec:
    """Drift + Brownian part + finitely many jump layers in radius bands.

    With radii r_0 > r_1 > ... > r_{N-1} > 0, layer 0 carries jumps with
    |z| >= r_0 and layer i >= 1 carries r_i <= |z| < r_{i-1}.  At most the
    outermost layer may be uncompensated.  The tail below the smallest
    radius is not represented.
    """

    drift: float = 0.0
    brownian_scale: float = 0.0
    jump_layers: tuple[JumpLayer, ...] = ()
    truncation_radii: tuple[float, ...] = ()

    def __post_init__(self):
        if self.brownian_scale < 0:
            raise ValueError("brownian_scale must be nonnegative")
        radii = np.asarray(self.truncation_radii, dtype=float)
        layers = self.jump_layers
        if len(layers) != radii.size:
            raise ValueError("need exactly one truncation radius per jump layer")
        if radii.size:
            if np.any(radii <= 0.0):
                raise ValueError("truncation radii must be positive")
            if np.any(np.diff(radii) >= 0.0):
                raise ValueError("truncation radii must be strictly decreasing (overlapping bands)")
        for i, layer in enumerate(layers):
            lo = radii[i]
            hi = np.inf if i == 0 else radii[i - 1]
            z = np.abs(layer.measure.sizes)
            if z.size and (np.any(z < lo) or np.any(z >= hi)):
                raise ValueError(f"layer {i} atoms outside its radius band [{lo}, {hi})")
            if not layer.compensated and i != 0:
                raise ValueError("only the outermost layer may be uncompensated")


def sample_brownian(
    sigma: float, a: float, grid_times: np.ndarray, seed: int
) -> CadlagPath:
    """Drifted Brownian path sampled on the given grid, no jumps.

    Gaussian increments have standard deviation sigma*sqrt(dt) per step;
    between grid points the path is the linear interpolant.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    t = np.asarray(grid_times, dtype=float)
    if t.ndim != 1 or t.size < 2 or t[0] != 0.0 or np.any(np.diff(t) <= 0):
        raise ValueError("grid_times must start at 0 and be strictly increasing")
    values = a * t
    if sigma > 0:
        incr = _rng(seed).standard_normal(t.size - 1) * sigma * np.sqrt(np.diff(t))
        values = values + np.concatenate([[0.0], np.cumsum(incr)])
    values[0] = 0.0
    return CadlagPath(float(t[-1]), t, values)


def sample_compound_poisson(
    nu_levy: LevyMeasureDiscrete, T: float, seed: int
) -> CadlagPath:
    """Pure-jump path: Poisson(rate=total mass) many jumps, times uniform on
    (0, T], sizes i.i.d. from the normalized measure."""
    if T <= 0:
        raise ValueError("horizon must be positive")
    b = nu_levy.total_mass
    if b == 0.0:
        return zero_path(T)
    rng = _rng(seed)
    n = int(rng.poisson(b * T))
    if n == 0:
        return zero_path(T)
    times = T - rng.uniform(0.0, T, size=n)  # lands in (0, T]
    probs = nu_levy.masses / nu_levy.masses.sum()
    sizes = rng.choice(nu_levy.sizes, size=n, p=probs)
    order = np.argsort(times, kind="stable")
    times, sizes = times[order], sizes[order]
    # coincident draws are measure-zero but merge them to keep strict order
    keep_t, keep_s = [times[0]], [sizes[0]]
    for t, s in zip(times[1:], sizes[1:]):
        if t == keep_t[-1]:
            keep_s[-1] += s
        else:
            keep_t.append(t)
            keep_s.append(s)
    return CadlagPath(
        T,
        np.array([0.0, T]),
        np.array([0.0, 0.0]),
        np.array(keep_t),
        np.array(keep_s),
    )


def compensate(path: CadlagPath, nu_levy: LevyMeasureDiscrete) -> CadlagPath:
    """Subtract the expected linear drift of the jump part; jumps unchanged."""
    rate = nu_levy.mean_jump_rate
    if rate == 0.0:
        return path
    return CadlagPath(
        path.horizon,
        path.grid_times,
        path.continuous_values - rate * path.grid_times,
        path.jump_times,
        path.jump_sizes,
    )


def sample_levy(
    spec: LevySpec, T: float, grid_times: np.ndarray, seed: int
) -> CadlagPath:
    """Sum of independent components: drift + Brownian, then each jump layer
    (compensated where flagged), summed in declared order.

    Component k draws from ``component_seed(seed, k)`` with the Brownian
    part at index 0 and layer i at index i + 1.
    """
    t = np.asarray(grid_times, dtype=float)
    if t.size < 2 or t[-1] != T:
        raise ValueError("grid_times must cover [0, T] ending exactly at T")
    total = sample_brownian(spec.brownian_scale, spec.drift, t, component_seed(seed, 0))
    for i, layer in enumerate(spec.jump_layers):
        part = sample_compound_poisson(layer.measure, T, component_seed(seed, i + 1))
        if layer.compensated:
            part = compensate(part, layer.measure)
        total = add_paths(total, part)
    return total


@dataclass(frozen=True, eq=False)
class SpatialMode:
    """Spatial profile sampled on grid nodes, zero at both boundary nodes."""

    values: np.ndarray
    node_spacing: float

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.ndim != 1 or self.values.size < 2:
            raise ValueError("mode needs at least two nodes")
        if self.node_spacing <= 0:
            raise ValueError("node spacing must be positive")
        if self.values[0] != 0.0 or self.values[-1] != 0.0:
            raise ValueError("mode must vanish exactly at both boundary nodes")

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    @property
    def lipschitz_bound(self) -> float:
        """Max slope between adjacent nodes."""
        return float(np.max(np.abs(np.diff(self.values))) / self.node_spacing)

    @property
    def cell_values(self) -> np.ndarray:
        """Averages onto the cells between nodes."""
        return 0.5 * (self.values[:-1] + self.values[1:])

    @property
    def cell_slopes(self) -> np.ndarray:
        """Exact spatial derivative per cell (the mode is linear on cells)."""
        return np.diff(self.values) / self.node_spacing


def sine_modes(
    n_nodes: int, length: float, count: int, decay: float = 2.0, amplitude: float = 1.0
) -> list[SpatialMode]:
    """Default mode family: amplitude * k^-decay * sin(k pi x / L)."""
    x = np.linspace(0.0, length, n_nodes)
    dx = length / (n_nodes - 1)
    modes = []
    for k in range(1, count + 1):
        v = amplitude * k ** (-decay) * np.sin(k * np.pi * x / length)
        v[0] = 0.0
        v[-1] = 0.0
        modes.append(SpatialMode(v, dx))
    return modes


def _sum_abs_weighted(modes, paths, t: float, left: bool) -> float:
    total = 0.0
    for mode, path in zip(modes, paths):
        val = left_limit(path, t) if left else evaluate(path, t)
        total += abs(val) * (mode.sup_norm + mode.lipschitz_bound)
    return total


@dataclass(frozen=True, eq=False)
class NoiseField:
    """Finite-mode forcing field with merged jump schedule and its bound C_w.

    C_w is the supremum over event times of sum_k |L_k(t)| (sup|phi_k| +
    Lip(phi_k)), which dominates the spatial W1-infinity norm of w(t, .)
    at every time.
    """

    modes: tuple[SpatialMode, ...]
    paths: tuple[CadlagPath, ...]
    jump_times: np.ndarray
    c_w: float

    @property
    def horizon(self) -> float:
        return self.paths[0].horizon if self.paths else 0.0

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    def total_jump_count(self) -> int:
        return int(sum(p.n_jumps for p in self.paths))

    def is_zero(self) -> bool:
        return all(
            p.n_jumps == 0 and np.all(p.continuous_values == 0.0) for p in self.paths
        )


def merge_jump_times(paths: Sequence[CadlagPath], tol: float = JUMP_MERGE_TOL) -> np.ndarray:
    """Sorted union of all jump times, deduplicated within absolute tol."""
    allt = np.sort(np.concatenate([p.jump_times for p in paths])) if paths else np.empty(0)
    merged = []
    for t in allt:
        if not merged or t - merged[-1] > tol:
            merged.append(float(t))
    return np.asarray(merged)


def build_noise_field(
    modes: Sequence[SpatialMode], paths: Sequence[CadlagPath]
) -> NoiseField:
    """Assemble modes and paths; computes the merged jump schedule and C_w."""
    if len(modes) != len(paths):
        raise ValueError("need exactly one path per mode")
    if paths:
        horizons = {p.horizon for p in paths}
        if len(horizons) != 1:
            raise ValueError("all paths must share the horizon")
        if len({m.values.size for m in modes}) != 1:
            raise ValueError("all modes must be sampled on the same node grid")
    merged = merge_jump_times(paths)
    c_w = 0.0
    if paths:
        events = np.unique(np.concatenate([np.concatenate([p.grid_times, p.jump_times]) for p in paths]))
        right = np.zeros_like(events)
        left = np.zeros_like(events)
        for mode, path in zip(modes, paths):
            weight = mode.sup_norm + mode.lipschitz_bound
            right += weight * np.abs(np.atleast_1d(evaluate(path, events)))
            left += weight * np.abs(np.atleast_1d(left_limit(path, events)))
        c_w = float(max(right.max(), left.max()))
    return NoiseField(tuple(modes), tuple(paths), merged, c_w)


def weighted_amplitude_at(noise: NoiseField, t: float) -> float:
    """The C_w integrand at a single time (always <= noise.c_w)."""
    return _sum_abs_weighted(noise.modes, noise.paths, t, left=False)


def field_at(noise: NoiseField, t: float, side: str = "right") -> np.ndarray:
    """Node values of w(t, .); side='left' uses left limits of the paths."""
    if not noise.paths:
        raise ValueError("empty noise field has no spatial grid")
    out = np.zeros_like(noise.modes[0].values)
    for mode, path in zip(noise.modes, noise.paths):
        val = left_limit(path, t) if side == "left" else evaluate(path, t)
        out = out + mode.values * val
    return out


def jump_field(noise: NoiseField, t: float, tol: float = JUMP_MERGE_TOL) -> np.ndarray:
    """Node values of the field jump at a merged jump time."""
    if not noise.paths:
        raise ValueError("empty noise field has no spatial grid")
    out = np.zeros_like(noise.modes[0].values)
    for mode, path in zip(noise.modes, noise.paths):
        hit = np.abs(path.jump_times - t) <= tol
        if np.any(hit):
            out = out + mode.values * float(path.jump_sizes[hit].sum())
    return out


def continuous_increment_field(noise: NoiseField, t0: float, t1: float) -> np.ndarray:
    """Node values of the continuous-part increment of w over [t0, t1]."""
    out = np.zeros_like(noise.modes[0].values)
    for mode, path in zip(noise.modes, noise.paths):
        dv = continuous_value(path, t1) - continuous_value(path, t0)
        out = out + mode.values * dv
    return out
