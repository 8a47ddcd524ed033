"""Functional and residual diagnostics tests.

Refinement thresholds follow the measured first-order behavior of the
scheme (ratios near 2 when dx and dt are halved together).
"""

import numpy as np
import pytest
from scipy import integrate

from barostoch.diagnostics import (
    DEFAULT_RESIDUAL_COEFF,
    TestFunction,
    constant_space_function,
    dissipation,
    energy_residual,
    evaluate_trajectory,
    relative_energy,
    renorm_residual,
    renormalizer_bump,
    space_test_family,
    total_mass,
    weak_distance,
    weak_pairing,
    zero_renormalizer,
)
from barostoch.fluid import (
    Grid1D,
    PressureLaw,
    State,
    Trajectory,
    TrajectoryRecord,
    Viscosity,
    gaussian_bump_profile,
    solve_path,
    uniform_profile,
)
from barostoch.noise import build_noise_field, sine_modes
from barostoch.paths import CadlagPath

LAW = PressureLaw(2.0, 1.0)
VISC = Viscosity(0.003)  # lame = 0.004

REFINEMENT = [(128, 1.2e-3), (256, 6e-4), (512, 3e-4)]


def smooth_run(n, dt, noise=None, T=0.1):
    grid = Grid1D(n, 1.0)
    rho0, m0 = gaussian_bump_profile(grid, 1.0, 0.2, 0.1)
    traj = solve_path(rho0, m0, noise, LAW, VISC, grid, T, 0.9,
                      output_times=[T], dt_fixed=dt, record_steps=True)
    return grid, traj


def hand_trajectory(grid, fields, w=None):
    """Trajectory with hand-written output records at times 0, 1, 2, ..."""
    w_nodes = np.zeros(grid.n_nodes) if w is None else w
    records = []
    for i, (rho, m) in enumerate(fields):
        kind = "initial" if i == 0 else "output"
        records.append(TrajectoryRecord(float(i), kind, rho, m, w_nodes))
    mass = float(fields[0][0].sum() * grid.dx)
    return Trajectory(records, grid, mass, 0.5, np.empty(0))


# ---------------------------------------------------------------- functionals

def test_total_mass_uniform():
    grid = Grid1D(10, 1.0)
    assert total_mass(State(0.0, np.full(10, 2.0), np.zeros(10)), grid) == pytest.approx(2.0, rel=1e-15)


def test_total_mass_hat_profile_analytic():
    grid = Grid1D(400, 1.0)
    x = grid.centers
    # triangular density of unit integral: peak 2/0.5 over width 1, apex at 1/2
    rho = np.maximum(0.0, 2.0 - 4.0 * np.abs(x - 0.5))
    ref, _ = integrate.quad(lambda s: max(0.0, 2.0 - 4.0 * abs(s - 0.5)), 0.0, 1.0)
    assert total_mass(State(0.0, rho, np.zeros_like(rho)), grid) == pytest.approx(ref, abs=1e-5)


def test_relative_energy_matched_velocity_is_potential_only():
    grid = Grid1D(32, 1.0)
    w_nodes = 0.3 * np.sin(np.pi * grid.nodes)
    w_cells = 0.5 * (w_nodes[:-1] + w_nodes[1:])
    rho = np.ones(32)
    state = State(0.0, rho, rho * w_cells)  # u = w
    assert relative_energy(state, w_nodes, LAW, grid) == pytest.approx(0.0, abs=1e-15)


def test_relative_energy_unit_mismatch():
    grid = Grid1D(20, 1.0)
    rho = np.ones(20)
    state = State(0.0, rho, rho * 1.0)  # u = 1, w = 0
    assert relative_energy(state, np.zeros(grid.n_nodes), LAW, grid) == pytest.approx(0.5, rel=1e-12)


def test_relative_energy_lower_bound_by_potential():
    grid = Grid1D(32, 1.0)
    rng = np.random.default_rng(1)
    rho = 0.3 + rng.uniform(0, 1.5, 32)
    m = rng.standard_normal(32)
    state = State(0.0, rho, m)
    from barostoch.fluid import pressure_potential

    e = relative_energy(state, np.zeros(grid.n_nodes), LAW, grid)
    pot = float(np.sum(pressure_potential(LAW, rho)) * grid.dx)
    min_pot = float(np.min(pressure_potential(LAW, rho)))
    assert e >= pot
    assert pot >= -grid.length * max(0.0, -min_pot)


def test_dissipation_zero_velocity():
    grid = Grid1D(16, 1.0)
    assert dissipation(np.zeros(16), VISC, grid) == 0.0


def test_dissipation_tent_profile_analytic():
    grid = Grid1D(64, 1.0)
    s = 1.3
    u = s * np.minimum(grid.centers, 1.0 - grid.centers)
    d = dissipation(u, VISC, grid)
    assert d == pytest.approx(VISC.lame_1d * s**2 * 1.0, rel=2.0 * grid.dx)


def test_dissipation_nonnegative_random():
    grid = Grid1D(32, 1.0)
    rng = np.random.default_rng(2)
    for _ in range(25):
        assert dissipation(rng.standard_normal(32), VISC, grid) >= 0.0


# ---------------------------------------------------------------- test functions

def test_space_family_members_vanish_in_boundary_cells():
    grid = Grid1D(64, 1.0)
    for phi in space_test_family(grid):
        assert phi.values[0] == 0.0 and phi.values[-1] == 0.0


def test_space_family_coarse_grid_fallback_margin():
    # below 16 cells the margin widens to one cell but members stay compact
    for phi in space_test_family(Grid1D(8, 1.0)):
        assert phi.values[0] == 0.0 and phi.values[-1] == 0.0
        assert np.any(phi.values != 0.0)


def test_space_testfunction_requires_compact_support():
    grid = Grid1D(32, 1.0)
    with pytest.raises(ValueError):
        TestFunction.space(np.ones(32), np.zeros(32), grid)
    constant_space_function(grid)  # the continuity identity admits phi == 1


def test_time_testfunction_validation():
    times = np.linspace(0.0, 1.0, 11)
    vals = 1.0 - times
    TestFunction.time(vals, times)
    with pytest.raises(ValueError):
        TestFunction.time(np.ones(11), times)  # does not vanish at the end
    with pytest.raises(ValueError):
        TestFunction.time(vals - 2.0, times)  # negative


def test_renormalizer_bump_compact_and_interpolated():
    b = renormalizer_bump(rho_cap=2.0)
    rho = np.array([0.0, 0.5, 1.0, 1.999, 2.0, 5.0])
    vals = b.eval_b(rho)
    assert vals[-1] == 0.0 and vals[-2] == pytest.approx(0.0, abs=1e-12)
    assert np.all(vals >= 0.0)
    mid = b.eval_b(np.array([1.0]))[0]
    assert mid == pytest.approx(1.0, abs=1e-6)  # symmetric bump peaks at the middle


# ---------------------------------------------------------------- energy residual

def test_energy_residual_static_state_zero():
    grid = Grid1D(64, 1.0)
    rho0, m0 = uniform_profile(grid, 1.0)
    traj = solve_path(rho0, m0, None, LAW, VISC, grid, 0.2, 0.5,
                      output_times=[0.1, 0.2], record_steps=True)
    r = energy_residual(traj, None, LAW, VISC, grid, 0.0, 0.2)
    assert abs(r) <= 1e-12


def test_energy_residual_requires_recorded_times():
    grid, traj = smooth_run(64, 1e-3, T=0.05)
    with pytest.raises(ValueError):
        energy_residual(traj, None, LAW, VISC, grid, 0.0, 0.033)
    with pytest.raises(ValueError):
        energy_residual(traj, None, LAW, VISC, grid, 0.05, 0.0)


def test_energy_residual_refinement_zero_forcing():
    values = []
    for n, dt in REFINEMENT:
        grid, traj = smooth_run(n, dt)
        values.append(energy_residual(traj, None, LAW, VISC, grid, 0.0, 0.1))
    # the inequality holds (negative residual) and shrinks at first order
    for r in values:
        assert max(r, 0.0) <= 1e-13
    assert abs(values[1]) <= abs(values[0]) / 1.5
    assert abs(values[2]) <= abs(values[1]) / 1.5


def test_energy_residual_refinement_smooth_forcing():
    values = []
    for n, dt in REFINEMENT:
        grid = Grid1D(n, 1.0)
        mode = sine_modes(grid.n_nodes, grid.length, 1, amplitude=0.3)[0]
        t = np.array([0.0, 1.0])
        noise = build_noise_field([mode], [CadlagPath(1.0, t, 0.5 * t)])
        rho0, m0 = gaussian_bump_profile(grid, 1.0, 0.2, 0.1)
        traj = solve_path(rho0, m0, noise, LAW, VISC, grid, 0.1, 0.9,
                          output_times=[0.1], dt_fixed=dt, record_steps=True)
        values.append(energy_residual(traj, noise, LAW, VISC, grid, 0.0, 0.1))
    coeffs = [abs(r) / (1.0 / n + dt) for r, (n, dt) in zip(values, REFINEMENT)]
    assert max(coeffs) <= DEFAULT_RESIDUAL_COEFF
    assert abs(values[2]) <= abs(values[1]) / 1.5 <= abs(values[0]) / (1.5 * 1.5)


# ---------------------------------------------------------------- renormalized continuity

def test_renorm_zero_b_unit_phi_is_mass_defect():
    grid, traj = smooth_run(128, 1.2e-3)
    r = renorm_residual(traj, zero_renormalizer(4.0), constant_space_function(grid), grid, 0.1)
    assert r / traj.total_mass <= 1e-12


def test_renorm_constant_trajectory_exactly_zero():
    grid = Grid1D(32, 1.0)
    rho0, m0 = uniform_profile(grid, 1.0)
    traj = solve_path(rho0, m0, None, LAW, VISC, grid, 0.1, 0.5,
                      output_times=[0.1], record_steps=True)
    b = renormalizer_bump(4.0)
    phi = space_test_family(grid)[0]
    assert renorm_residual(traj, b, phi, grid, 0.1) == pytest.approx(0.0, abs=1e-14)


def test_renorm_bump_refinement_first_order():
    values = []
    for n, dt in REFINEMENT:
        grid, traj = smooth_run(n, dt)
        rho_cap = 4.0 * max(rec.rho.max() for rec in traj.records)
        b = renormalizer_bump(rho_cap)
        phi = space_test_family(grid)[0]
        values.append(renorm_residual(traj, b, phi, grid, 0.1))
    assert values[1] <= values[0] / 1.5
    assert values[2] <= values[1] / 1.5


def test_renorm_validates_test_function_kinds():
    grid, traj = smooth_run(64, 1e-3, T=0.05)
    phi = space_test_family(grid)[0]
    with pytest.raises(ValueError):
        renorm_residual(traj, phi, phi, grid, 0.05)


# ---------------------------------------------------------------- weak pairings

def test_weak_pairing_constant_phi_is_total_mass():
    grid = Grid1D(32, 1.0)
    rho = np.full(32, 1.7)
    assert weak_pairing(rho, constant_space_function(grid), grid) == pytest.approx(1.7, rel=1e-14)


def test_weak_pairing_sine_bump_analytic():
    grid = Grid1D(256, 1.0)
    phi = space_test_family(grid)[0]  # sine on [1/16, 15/16]
    span = 1.0 - 2.0 / 16.0
    analytic = 2.0 * span / np.pi
    assert weak_pairing(np.ones(256), phi, grid) == pytest.approx(analytic, abs=1e-4)


def test_weak_pairing_linear_in_field():
    grid = Grid1D(64, 1.0)
    rng = np.random.default_rng(4)
    phi = space_test_family(grid)[2]
    r1, r2 = rng.uniform(0, 2, 64), rng.uniform(0, 2, 64)
    lhs = weak_pairing(r1 + r2, phi, grid)
    rhs = weak_pairing(r1, phi, grid) + weak_pairing(r2, phi, grid)
    assert lhs == pytest.approx(rhs, rel=1e-13)


def test_weak_distance_identical_trajectories_zero():
    grid = Grid1D(64, 1.0)
    rho, m = gaussian_bump_profile(grid, 1.0, 0.2, 0.1)
    traj = hand_trajectory(grid, [(rho, m), (rho, m)])
    family = space_test_family(grid)
    dr, dq = weak_distance(traj, traj, family, grid)
    assert dr == 0.0 and dq == 0.0


def test_weak_distance_density_scaling_with_unit_phi():
    grid = Grid1D(64, 1.0)
    rho, m = gaussian_bump_profile(grid, 1.0, 0.2, 0.1)
    ta = hand_trajectory(grid, [(rho, m)])
    tb = hand_trajectory(grid, [(2.0 * rho, m)])
    family = [constant_space_function(grid)]
    dr, _ = weak_distance(ta, tb, family, grid)
    assert dr == pytest.approx(ta.total_mass, rel=1e-13)


def test_weak_distance_rejects_mismatched_output_times():
    grid = Grid1D(64, 1.0)
    rho, m = gaussian_bump_profile(grid, 1.0, 0.2, 0.1)
    ta = hand_trajectory(grid, [(rho, m)])
    tb = hand_trajectory(grid, [(rho, m), (rho, m)])
    with pytest.raises(ValueError):
        weak_distance(ta, tb, space_test_family(grid), grid)


# ---------------------------------------------------------------- report

def test_evaluate_trajectory_static_all_pass():
    grid = Grid1D(64, 1.0)
    rho0, m0 = uniform_profile(grid, 1.0)
    traj = solve_path(rho0, m0, None, LAW, VISC, grid, 0.2, 0.5,
                      output_times=[0.1, 0.2], record_steps=True)
    report = evaluate_trajectory(traj, None, LAW, VISC, grid)
    assert report.all_pass(), report.flags
    assert np.all(report.dissipation_series == 0.0)
    np.testing.assert_allclose(report.mass_series, traj.total_mass, rtol=1e-15)


def test_evaluate_trajectory_with_jump_passes_consistency():
    grid = Grid1D(64, 1.0)
    mode = sine_modes(grid.n_nodes, grid.length, 1, amplitude=0.4)[0]
    path = CadlagPath(1.0, np.array([0.0, 1.0]), np.zeros(2),
                      np.array([0.37]), np.array([0.25]))
    noise = build_noise_field([mode], [path])
    rho0, m0 = gaussian_bump_profile(grid, 1.0, 0.2, 0.1)
    traj = solve_path(rho0, m0, noise, LAW, VISC, grid, 0.8, 0.4,
                      output_times=[0.4, 0.8], record_steps=True)
    report = evaluate_trajectory(traj, noise, LAW, VISC, grid)
    assert report.flags["jumps_consistent"]
    assert report.flags["mass_constant"]
    assert report.all_pass(), report.flags
