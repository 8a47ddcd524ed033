"""Run orchestration: single pathwise runs, seed ensembles, forcing
mollification, and the weak-stability experiment.

Every artifact on disk is a pure function of (config, seed); ensembles
aggregate in seed order so summaries are independent of execution
interleaving.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io as _io
from .config import RunConfig
from .diagnostics import (
    DiagnosticsReport,
    evaluate_trajectory,
    space_test_family,
    weak_distance,
)
from .fluid import (
    Grid1D,
    PressureLaw,
    Trajectory,
    VacuumBreachError,
    Viscosity,
    gaussian_bump_profile,
    initial_energy,
    riemann_profile,
    solve_path,
    uniform_profile,
)
from .noise import (
    CadlagPath,
    NoiseField,
    build_noise_field,
    component_seed,
    sample_levy,
    sine_modes,
)
from .paths import (
    continuous_value,
    path_integral,
    skorokhod_distance,
    uniform_distance,
    zero_path,
)

__all__ = [
    "RunResult",
    "EnsembleSummary",
    "StabilityReport",
    "build_grid",
    "build_noise",
    "initial_data",
    "run_single",
    "run_ensemble",
    "mollify_path",
    "mollify_noise",
    "run_stability",
]

MAX_VACUUM_RETRIES = 3


def build_grid(cfg: RunConfig) -> Grid1D:
    return Grid1D(cfg.n_cells, cfg.length)


def build_law(cfg: RunConfig) -> PressureLaw:
    return PressureLaw(cfg.gamma, cfg.pressure_coeff, allow_low_gamma=cfg.allow_low_gamma)


def build_viscosity(cfg: RunConfig) -> Viscosity:
    return Viscosity(cfg.mu_shear, cfg.eta_bulk)


def build_noise(cfg: RunConfig, seed: int, grid: Grid1D) -> NoiseField:
    """Sine modes with power-law decay; one independent Levy path per mode."""
    if cfg.n_modes == 0:
        return build_noise_field([], [])
    modes = sine_modes(grid.n_nodes, grid.length, cfg.n_modes, cfg.mode_decay, cfg.mode_amplitude)
    spec = cfg.levy_spec()
    grid_times = np.linspace(0.0, cfg.t_final, cfg.noise_grid_points)
    grid_times[-1] = cfg.t_final
    paths = [
        sample_levy(spec, cfg.t_final, grid_times, component_seed(seed, k))
        for k in range(cfg.n_modes)
    ]
    return build_noise_field(modes, paths)


def initial_data(cfg: RunConfig, grid: Grid1D):
    """Named profile -> (rho0, m0, mass, initial energy bound)."""
    if cfg.profile == "uniform":
        rho0, m0 = uniform_profile(grid, cfg.rho_base, cfg.velocity0)
    elif cfg.profile == "gaussian-bump":
        center = None if cfg.bump_center < 0 else cfg.bump_center
        rho0, m0 = gaussian_bump_profile(
            grid, cfg.rho_base, cfg.bump_amplitude, cfg.bump_width, center, cfg.velocity0
        )
    elif cfg.profile == "riemann":
        rho0, m0 = riemann_profile(grid, cfg.rho_left, cfg.rho_right, cfg.u_left, cfg.u_right)
    else:
        raise ValueError(f"unknown initial profile {cfg.profile!r}")
    law = build_law(cfg)
    mass = float(rho0.sum() * grid.dx)
    e0 = initial_energy(rho0, m0, law, grid)
    return rho0, m0, mass, e0


@dataclass(eq=False)
class RunResult:
    seed: int
    trajectory: Trajectory
    report: DiagnosticsReport
    noise: NoiseField
    outdir: Path | None = None
    cfl_used: float = 0.0
    retries: int = 0


def run_single(
    cfg: RunConfig,
    seed: int | None = None,
    outdir: str | Path | None = None,
    persist: bool = True,
) -> RunResult:
    """Sample forcing from the seed, solve, diagnose, optionally persist.

    A vacuum breach is retried with the CFL number halved, up to
    MAX_VACUUM_RETRIES times; the breach propagates if retries run out.
    """
    seed = cfg.seed if seed is None else seed
    grid = build_grid(cfg)
    law = build_law(cfg)
    visc = build_viscosity(cfg)
    noise = build_noise(cfg, seed, grid)
    rho0, m0, mass, _ = initial_data(cfg, grid)
    digest = _io.noise_digest(noise)

    cfl = cfg.cfl
    retries = 0
    while True:
        try:
            traj = solve_path(
                rho0, m0, noise, law, visc, grid, cfg.t_final, cfl,
                output_times=cfg.output_times, record_steps=cfg.record_steps,
                noise_digest=digest,
            )
            break
        except VacuumBreachError as exc:
            retries += 1
            if retries > MAX_VACUUM_RETRIES:
                raise VacuumBreachError(exc.t, exc.min_rho) from exc
            cfl *= 0.5

    report = evaluate_trajectory(traj, noise, law, visc, grid, residual_coeff=cfg.residual_coeff)
    result = RunResult(seed, traj, report, noise, None, cfl, retries)

    if persist:
        base = Path(outdir) if outdir is not None else Path(".")
        rundir = base / f"{cfg.digest()}-seed{seed}"
        _io.write_trajectory(traj, grid, rundir)
        _io.write_metadata(
            rundir, grid, law, visc, seed, mass, digest,
            extra={"cfl_used": cfl, "vacuum_retries": retries},
        )
        _io.write_report(report, rundir)
        for k, path in enumerate(noise.paths):
            _io.write_path_csv(path, rundir / f"path_{k:02d}")
        result.outdir = rundir
    return result


@dataclass(eq=False)
class EnsembleSummary:
    """Aggregate over seeds seed+0 .. seed+N-1, reduced in seed order."""

    n_paths: int
    seeds: list[int]
    passed: list[bool]
    failed_seeds: list[int]
    mass_mean: float
    mass_var: float
    final_energy_mean: float
    final_energy_var: float
    jump_count_mean: float
    jump_count_var: float
    mass_pass_rate: float

    def validate(self, cfg: RunConfig) -> None:
        if self.n_paths != cfg.ensemble_size:
            raise ValueError("summary path count does not match the configuration")


def run_ensemble(
    cfg: RunConfig, outdir: str | Path | None = None, persist: bool = True
) -> EnsembleSummary:
    """run_single over consecutive seeds; individual failures are recorded
    and only a failure fraction above one half aborts the ensemble."""
    seeds = [cfg.seed + k for k in range(cfg.ensemble_size)]
    masses, energies, jumps, passed, failed = [], [], [], [], []
    for s in seeds:
        try:
            res = run_single(cfg, seed=s, outdir=outdir, persist=persist)
        except VacuumBreachError:
            failed.append(s)
            passed.append(False)
            continue
        masses.append(res.report.mass_series[-1])
        energies.append(res.report.energy_series[-1])
        jumps.append(res.noise.total_jump_count())
        passed.append(res.report.all_pass())
        if not res.report.all_pass():
            failed.append(s)
    if len(failed) > 0.5 * len(seeds):
        raise RuntimeError(
            f"ensemble failure fraction {len(failed)}/{len(seeds)} exceeds one half; "
            f"failing seeds: {failed}"
        )
    masses = np.asarray(masses)
    energies = np.asarray(energies)
    jumps = np.asarray(jumps, dtype=float)
    mass_ok = [abs(m - masses[0]) <= 1e-12 * max(abs(masses[0]), 1.0) for m in masses]
    summary = EnsembleSummary(
        n_paths=len(seeds),
        seeds=seeds,
        passed=passed,
        failed_seeds=failed,
        mass_mean=float(masses.mean()),
        mass_var=float(masses.var()),
        final_energy_mean=float(energies.mean()),
        final_energy_var=float(energies.var()),
        jump_count_mean=float(jumps.mean()),
        jump_count_var=float(jumps.var()),
        mass_pass_rate=float(np.mean(mass_ok)),
    )
    summary.validate(cfg)
    if persist and outdir is not None:
        import json

        path = Path(outdir) / f"{cfg.digest()}-ensemble.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(
                {
                    "n_paths": summary.n_paths,
                    "failed_seeds": summary.failed_seeds,
                    "mass_mean": summary.mass_mean,
                    "mass_var": summary.mass_var,
                    "final_energy_mean": summary.final_energy_mean,
                    "final_energy_var": summary.final_energy_var,
                    "jump_count_mean": summary.jump_count_mean,
                    "jump_count_var": summary.jump_count_var,
                    "mass_pass_rate": summary.mass_pass_rate,
                },
                fh,
                sort_keys=True,
                indent=1,
            )
            fh.write("\n")
    return summary


def _mollify_knots(path: CadlagPath, eps: float) -> np.ndarray:
    """Knot set on which the box average of the path is sampled exactly."""
    half = 0.5 * eps
    base = [path.grid_times, path.jump_times]
    shifted = [g + s for g in base for s in (-half, half)]
    knots = np.concatenate(base + shifted + [np.array([0.0, path.horizon])])
    knots = np.unique(np.clip(knots, 0.0, path.horizon))
    # midpoints resolve the quadratic spans that arise around kinks
    mids = 0.5 * (knots[:-1] + knots[1:])
    return np.unique(np.concatenate([knots, mids]))


def _box_average(path: CadlagPath, t: float, eps: float) -> float:
    """(1/eps) int_{t-eps/2}^{t+eps/2} w~, with w~ the odd reflection of the
    path at 0 (so the average vanishes exactly at t=0) and constant
    extension past the horizon."""
    half = 0.5 * eps
    lo, hi = t - half, t + half

    def anti(x: float) -> float:
        # signed integral of the extended path from 0 to x
        if x < 0.0:
            return float(path_integral(path, 0.0, -x))  # even extension of the integral
        if x > path.horizon:
            from .paths import evaluate

            tail = evaluate(path, path.horizon) * (x - path.horizon)
            return float(path_integral(path, 0.0, path.horizon) + tail)
        return float(path_integral(path, 0.0, x))

    return (anti(hi) - anti(lo)) / eps


def mollify_path(path: CadlagPath, eps: float) -> CadlagPath:
    """Box mollification of width eps: jumps become linear ramps over
    [tau - eps/2, tau + eps/2], straight spans are reproduced exactly, and
    the value at 0 stays exactly 0 through odd reflection at the origin.
    """
    if eps <= 0:
        raise ValueError("mollification width must be positive")
    knots = _mollify_knots(path, eps)
    values = np.array([_box_average(path, float(t), eps) for t in knots])
    values[0] = 0.0
    return CadlagPath(path.horizon, knots, values)


def mollify_noise(noise: NoiseField, eps: float) -> NoiseField:
    """Mollify every scalar path; modes are untouched and the result has no
    jumps, so it drives the solver purely through the body force."""
    new_paths = [mollify_path(p, eps) for p in noise.paths]
    return build_noise_field(list(noise.modes), new_paths)


@dataclass(eq=False)
class StabilityReport:
    widths: tuple[float, ...]
    rho_distances: tuple[float, ...]
    relmom_distances: tuple[float, ...]
    uniform_path_distances: tuple[float, ...]
    skorokhod_path_distances: tuple[float, ...]
    baseline_rho: float
    baseline_relmom: float

    def distances_non_increasing(self, allowed_inversions: int = 1, slack: float = 0.1) -> bool:
        """Monotone trend check: at most ``allowed_inversions`` increases,
        each by at most a ``slack`` fraction."""

        def ok(ds):
            inversions = 0
            for a, b in zip(ds, ds[1:]):
                if b > a:
                    inversions += 1
                    if b > (1.0 + slack) * a:
                        return False
            return inversions <= allowed_inversions

        return ok(self.rho_distances) and ok(self.relmom_distances)

    def final_within_baseline(self, factor: float = 10.0) -> bool:
        return (
            self.rho_distances[-1] <= factor * self.baseline_rho
            and self.relmom_distances[-1] <= factor * self.baseline_relmom
        )


def _refined_config(cfg: RunConfig) -> RunConfig:
    from dataclasses import replace

    return replace(cfg, n_cells=2 * cfg.n_cells)


def run_stability(cfg: RunConfig, seed: int | None = None) -> StabilityReport:
    """Sample one forcing realization w, solve with it under jump semantics,
    then solve with mollified versions w_eps for each configured width and
    report pairing distances plus path-space distances.

    The baseline is the same pairing distance between zero-forcing runs at
    the configured grid and at twice the resolution: the scheme-error scale
    that the mollification error is compared against.
    """
    if not cfg.mollify_widths:
        raise ValueError("stability run needs stability.widths in the configuration")
    seed = cfg.seed if seed is None else seed
    grid = build_grid(cfg)
    law = build_law(cfg)
    visc = build_viscosity(cfg)
    rho0, m0, _, _ = initial_data(cfg, grid)
    noise = build_noise(cfg, seed, grid)
    family = space_test_family(grid)

    traj_jump = solve_path(
        rho0, m0, noise, law, visc, grid, cfg.t_final, cfg.cfl, output_times=cfg.output_times
    )

    rho_d, q_d, uni_d, sko_d = [], [], [], []
    for eps in cfg.mollify_widths:
        smooth = mollify_noise(noise, eps)
        traj_eps = solve_path(
            rho0, m0, smooth, law, visc, grid, cfg.t_final, cfg.cfl, output_times=cfg.output_times
        )
        dr, dq = weak_distance(traj_eps, traj_jump, family, grid)
        rho_d.append(dr)
        q_d.append(dq)
        uni = max(
            uniform_distance(a, b) for a, b in zip(smooth.paths, noise.paths)
        ) if noise.paths else 0.0
        sko = max(
            skorokhod_distance(a, b, tol=1e-3)[0] for a, b in zip(smooth.paths, noise.paths)
        ) if noise.paths else 0.0
        uni_d.append(uni)
        sko_d.append(sko)

    # zero-forcing scheme-error baseline: same run, no noise, grid vs grid*2
    zero = build_noise_field([], [])
    traj_coarse = solve_path(
        rho0, m0, zero, law, visc, grid, cfg.t_final, cfg.cfl, output_times=cfg.output_times
    )
    cfg_f = _refined_config(cfg)
    grid_f = build_grid(cfg_f)
    rho0_f, m0_f, _, _ = initial_data(cfg_f, grid_f)
    traj_fine = solve_path(
        rho0_f, m0_f, zero, law, visc, grid_f, cfg.t_final, cfg.cfl, output_times=cfg.output_times
    )
    family_f = space_test_family(grid_f)
    base_rho, base_q = weak_distance(
        traj_coarse, traj_fine, family, grid, grid_b=grid_f, test_family_b=family_f
    )

    return StabilityReport(
        tuple(cfg.mollify_widths),
        tuple(rho_d),
        tuple(q_d),
        tuple(uni_d),
        tuple(sko_d),
        base_rho,
        base_q,
    )
