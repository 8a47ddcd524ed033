"""Sampler distribution checks and forcing-field assembly tests.

Monte Carlo assertions use fixed seeds (recorded in the calls) with the
tolerances stated alongside each check, so a failure is replayable.
Statistical oracles come from scipy.stats.
"""

import numpy as np
import pytest
from scipy import stats

from barostoch.noise import (
    JumpLayer,
    LevyMeasureDiscrete,
    LevySpec,
    NoiseField,
    SpatialMode,
    build_noise_field,
    compensate,
    component_seed,
    field_at,
    jump_field,
    sample_brownian,
    sample_compound_poisson,
    sample_levy,
    sine_modes,
    weighted_amplitude_at,
)
from barostoch.paths import evaluate, left_limit, uniform_distance, zero_path

UNIT_GRID = np.linspace(0.0, 1.0, 51)


def unit_measure(rate=3.0, size=1.0):
    return LevyMeasureDiscrete.from_atoms([(size, rate)])


def symmetric_measure(rate_each=2.0, size=1.0):
    return LevyMeasureDiscrete.from_atoms([(size, rate_each), (-size, rate_each)])


# ---------------------------------------------------------------- measures

def test_measure_rejects_atom_at_zero_and_nonpositive_mass():
    with pytest.raises(ValueError):
        LevyMeasureDiscrete.from_atoms([(0.0, 1.0)])
    with pytest.raises(ValueError):
        LevyMeasureDiscrete.from_atoms([(1.0, -1.0)])


def test_measure_total_mass_is_sum():
    nu = LevyMeasureDiscrete.from_atoms([(1.0, 2.0), (-0.5, 0.25)])
    assert nu.total_mass == pytest.approx(2.25, rel=1e-15)


# ---------------------------------------------------------------- brownian

def test_brownian_zero_scale_zero_drift_is_zero_path():
    p = sample_brownian(0.0, 0.0, UNIT_GRID, seed=1)
    assert np.all(p.continuous_values == 0.0)
    assert p.n_jumps == 0


def test_brownian_pure_drift_value():
    p = sample_brownian(0.0, 2.0, np.array([0.0, 0.5, 1.0]), seed=1)
    assert evaluate(p, 0.5) == 1.0


def test_brownian_rejects_bad_grid():
    with pytest.raises(ValueError):
        sample_brownian(1.0, 0.0, np.array([0.0, 0.5, 0.5]), seed=1)
    with pytest.raises(ValueError):
        sample_brownian(1.0, 0.0, np.array([0.1, 0.5]), seed=1)


def test_brownian_reproducible_bitwise():
    a = sample_brownian(1.3, -0.2, UNIT_GRID, seed=42)
    b = sample_brownian(1.3, -0.2, UNIT_GRID, seed=42)
    assert np.array_equal(a.continuous_values, b.continuous_values)
    c = sample_brownian(1.3, -0.2, UNIT_GRID, seed=43)
    assert not np.array_equal(a.continuous_values, c.continuous_values)


def test_brownian_terminal_variance_monte_carlo():
    # Var L(1) = sigma^2; sample variance of N normals has std sigma^2*sqrt(2/N)
    n = 10_000
    vals = np.array(
        [evaluate(sample_brownian(1.0, 0.0, UNIT_GRID, seed=s), 1.0) for s in range(n)]
    )
    assert abs(vals.var() - 1.0) <= 3.0 * np.sqrt(2.0 / n)


def test_brownian_terminal_mean_matches_drift():
    n = 10_000
    a, sigma = 0.7, 1.0
    vals = np.array(
        [evaluate(sample_brownian(sigma, a, UNIT_GRID, seed=s), 1.0) for s in range(n)]
    )
    assert abs(vals.mean() - a) <= 3.0 * sigma / np.sqrt(n)


# ---------------------------------------------------------------- compound poisson

def test_compound_poisson_empty_measure_gives_zero_path():
    p = sample_compound_poisson(LevyMeasureDiscrete.from_atoms([]), 1.0, seed=5)
    assert p.n_jumps == 0
    assert np.all(p.continuous_values == 0.0)


def test_compound_poisson_zero_jump_probability():
    # P[no jump by t=1] = exp(-rate)
    n = 10_000
    rate = 3.0
    none = sum(
        sample_compound_poisson(unit_measure(rate), 1.0, seed=s).n_jumps == 0
        for s in range(n)
    )
    p0 = np.exp(-rate)
    band = 3.0 * np.sqrt(p0 * (1 - p0) / n)
    assert abs(none / n - p0) <= band


def test_compound_poisson_symmetric_measure_mean_zero():
    n = 10_000
    vals = np.array(
        [evaluate(sample_compound_poisson(symmetric_measure(2.0), 1.0, seed=s), 1.0) for s in range(n)]
    )
    # E L(1) = sum z*mass = 0; Var = t * sum z^2 mass = 4
    assert abs(vals.mean()) <= 3.0 * np.sqrt(4.0 / n)


def test_compound_poisson_jump_times_inside_and_sorted():
    p = sample_compound_poisson(unit_measure(20.0), 2.0, seed=9)
    assert np.all(p.jump_times > 0.0)
    assert np.all(p.jump_times <= 2.0)
    assert np.all(np.diff(p.jump_times) > 0)


def test_compound_poisson_rejects_nonpositive_horizon():
    with pytest.raises(ValueError):
        sample_compound_poisson(unit_measure(), 0.0, seed=1)


def test_increment_stationarity_two_sample():
    # law of L(t+s) - L(s) depends only on t
    n = 10_000
    t, s = 0.4, 0.3
    a = np.empty(n)
    b = np.empty(n)
    for k in range(n):
        p = sample_compound_poisson(symmetric_measure(2.0), 1.0, seed=10_000 + k)
        a[k] = evaluate(p, t) - evaluate(p, 0.0)
        b[k] = evaluate(p, t + s) - evaluate(p, s)
    res = stats.ks_2samp(a, b, method="asymp")
    assert res.pvalue > 0.01, f"stationarity rejected: p={res.pvalue} (seed base 10000)"


def test_increment_independence_correlation():
    n = 10_000
    t1, t2 = 0.5, 1.0
    inc1 = np.empty(n)
    inc2 = np.empty(n)
    for k in range(n):
        p = sample_compound_poisson(symmetric_measure(2.0), 1.0, seed=50_000 + k)
        inc1[k] = evaluate(p, t1)
        inc2[k] = evaluate(p, t2) - evaluate(p, t1)
    corr = np.corrcoef(inc1, inc2)[0, 1]
    assert abs(corr) <= 3.0 / np.sqrt(n)


def test_stochastic_continuity_surrogate():
    # fraction of paths with a jump in (0, delta] matches 1 - exp(-b delta)
    n = 5_000
    rate = 3.0
    fractions = []
    for delta in (0.4, 0.2, 0.1, 0.05):
        cnt = 0
        for k in range(n):
            p = sample_compound_poisson(unit_measure(rate), 1.0, seed=90_000 + k)
            cnt += bool(p.n_jumps and p.jump_times[0] <= delta)
        frac = cnt / n
        expect = 1.0 - np.exp(-rate * delta)
        band = 3.0 * np.sqrt(expect * (1 - expect) / n)
        assert abs(frac - expect) <= band, f"delta={delta}"
        fractions.append(frac)
    assert fractions == sorted(fractions, reverse=True)  # decreasing toward 0


# ---------------------------------------------------------------- compensation

def test_compensate_symmetric_measure_is_identity():
    p = sample_compound_poisson(symmetric_measure(2.0), 1.0, seed=3)
    q = compensate(p, symmetric_measure(2.0))
    assert np.array_equal(p.continuous_values, q.continuous_values)
    assert np.array_equal(p.jump_times, q.jump_times)


def test_compensate_unit_measure_adds_negative_drift():
    lam = 3.0
    p = sample_compound_poisson(unit_measure(lam), 1.0, seed=4)
    q = compensate(p, unit_measure(lam))
    # continuous part gains slope -lam, jumps untouched
    assert evaluate(q, 1.0) == pytest.approx(evaluate(p, 1.0) - lam, rel=1e-12, abs=1e-12)
    assert np.array_equal(p.jump_sizes, q.jump_sizes)


def test_compensated_mean_is_zero_monte_carlo():
    n = 10_000
    lam = 3.0
    nu = unit_measure(lam)
    vals = np.array(
        [evaluate(compensate(sample_compound_poisson(nu, 1.0, seed=s), nu), 1.0) for s in range(n)]
    )
    assert abs(vals.mean()) <= 3.0 * vals.std() / np.sqrt(n)


# ---------------------------------------------------------------- levy-khinchine

def test_levy_spec_validation():
    inner = JumpLayer(LevyMeasureDiscrete.from_atoms([(0.5, 1.0)]), compensated=True)
    outer = JumpLayer(LevyMeasureDiscrete.from_atoms([(2.0, 1.0)]), compensated=False)
    LevySpec(0.0, 0.0, (outer, inner), (1.0, 0.1))  # valid
    with pytest.raises(ValueError):  # radii not decreasing -> overlapping bands
        LevySpec(0.0, 0.0, (outer, inner), (0.1, 1.0))
    with pytest.raises(ValueError):  # atom outside its band
        LevySpec(0.0, 0.0, (inner, outer), (1.0, 0.1))
    with pytest.raises(ValueError):  # uncompensated inner layer
        bad = JumpLayer(LevyMeasureDiscrete.from_atoms([(0.5, 1.0)]), compensated=False)
        LevySpec(0.0, 0.0, (outer, bad), (1.0, 0.1))
    with pytest.raises(ValueError):  # layer count must match radii count
        LevySpec(0.0, 0.0, (outer,), (1.0, 0.1))


def test_levy_degenerate_brownian_only_matches_subseed():
    spec = LevySpec(drift=0.4, brownian_scale=1.1)
    p = sample_levy(spec, 1.0, UNIT_GRID, seed=21)
    q = sample_brownian(1.1, 0.4, UNIT_GRID, seed=component_seed(21, 0))
    assert np.array_equal(p.continuous_values, q.continuous_values)
    assert p.n_jumps == 0


def test_levy_single_uncompensated_layer_matches_compound_poisson():
    outer = JumpLayer(unit_measure(3.0), compensated=False)
    spec = LevySpec(0.0, 0.0, (outer,), (0.5,))
    p = sample_levy(spec, 1.0, np.array([0.0, 1.0]), seed=33)
    q = sample_compound_poisson(unit_measure(3.0), 1.0, seed=component_seed(33, 1))
    assert np.array_equal(p.jump_times, q.jump_times)
    assert np.array_equal(p.jump_sizes, q.jump_sizes)
    ts = np.linspace(0, 1, 101)
    assert np.array_equal(np.asarray(evaluate(p, ts)), np.asarray(evaluate(q, ts)))


def test_levy_two_compensated_layers_mean_zero():
    inner = JumpLayer(symmetric_measure(2.0, 0.5), compensated=True)
    outer = JumpLayer(symmetric_measure(1.0, 1.5), compensated=True)
    spec = LevySpec(0.0, 0.0, (outer, inner), (1.0, 0.1))
    n = 10_000
    vals = np.array(
        [evaluate(sample_levy(spec, 1.0, np.array([0.0, 1.0]), seed=s), 1.0) for s in range(n)]
    )
    # Var = sum over layers of t * sum z^2 mass = (2*1.5^2*1.0 + 2*0.5^2*0.5)
    var = 2 * 1.5**2 * 1.0 + 2 * 0.5**2 * 0.5
    assert abs(vals.mean()) <= 3.0 * np.sqrt(var / n)


def test_levy_reproducible_bitwise():
    inner = JumpLayer(symmetric_measure(2.0, 0.5), compensated=True)
    spec = LevySpec(0.1, 0.8, (inner,), (0.5,))
    a = sample_levy(spec, 1.0, UNIT_GRID, seed=77)
    b = sample_levy(spec, 1.0, UNIT_GRID, seed=77)
    assert np.array_equal(a.continuous_values, b.continuous_values)
    assert np.array_equal(a.jump_times, b.jump_times)
    assert np.array_equal(a.jump_sizes, b.jump_sizes)


# ---------------------------------------------------------------- modes / field

def test_sine_modes_vanish_at_boundaries_and_decay():
    modes = sine_modes(65, 1.0, 4, decay=2.0, amplitude=1.0)
    for k, m in enumerate(modes, start=1):
        assert m.values[0] == 0.0 and m.values[-1] == 0.0
        assert m.sup_norm <= 1.0 / k**2 + 1e-12


def test_mode_rejects_nonzero_boundary():
    with pytest.raises(ValueError):
        SpatialMode(np.array([0.1, 1.0, 0.0]), 0.5)


def test_mode_lipschitz_bound_is_max_slope():
    # tent of height 1 on [0,1]: slope 2 up, -2 down
    vals = np.array([0.0, 0.5, 1.0, 0.5, 0.0])
    mode = SpatialMode(vals, 0.25)
    assert mode.lipschitz_bound == pytest.approx(2.0, rel=1e-15)
    assert mode.sup_norm == 1.0


def test_build_noise_field_zero_paths():
    modes = sine_modes(33, 1.0, 2)
    paths = [zero_path(1.0), zero_path(1.0)]
    field = build_noise_field(modes, paths)
    assert field.c_w == 0.0
    assert field.jump_times.size == 0
    assert np.all(field_at(field, 0.7) == 0.0)


def test_build_noise_field_cw_drift_example():
    # single tent mode, sup 1 and Lip 2, driven by pure drift t: C_w = sup t * 3 = 3
    mode = SpatialMode(np.array([0.0, 0.5, 1.0, 0.5, 0.0]), 0.25)
    t = np.array([0.0, 1.0])
    drift = __import__("barostoch.paths", fromlist=["CadlagPath"]).CadlagPath(1.0, t, t)
    field = build_noise_field([mode], [drift])
    assert field.c_w == pytest.approx(3.0, rel=1e-15)
    assert weighted_amplitude_at(field, 0.25) <= field.c_w


def test_noise_field_boundary_values_always_zero():
    modes = sine_modes(33, 1.0, 3)
    rng_spec = LevySpec(0.2, 0.5, (JumpLayer(symmetric_measure(3.0, 0.4), True),), (0.2,))
    paths = [sample_levy(rng_spec, 1.0, UNIT_GRID, seed=component_seed(5, k)) for k in range(3)]
    field = build_noise_field(modes, paths)
    for t in (0.0, 0.31, 0.77, 1.0):
        w = field_at(field, t)
        assert w[0] == 0.0 and w[-1] == 0.0


def test_noise_field_cw_dominates_every_time():
    modes = sine_modes(33, 1.0, 2)
    spec = LevySpec(0.0, 0.0, (JumpLayer(symmetric_measure(4.0, 0.3), False),), (0.1,))
    paths = [sample_levy(spec, 1.0, np.array([0.0, 1.0]), seed=component_seed(8, k)) for k in range(2)]
    field = build_noise_field(modes, paths)
    rng = np.random.default_rng(0)
    for t in rng.uniform(0, 1, 50):
        assert weighted_amplitude_at(field, float(t)) <= field.c_w + 1e-12


def test_build_noise_field_rejects_mismatched_lengths():
    with pytest.raises(ValueError):
        build_noise_field(sine_modes(33, 1.0, 2), [zero_path(1.0)])


def test_jump_field_collects_simultaneous_jumps():
    mode = SpatialMode(np.array([0.0, 1.0, 0.0]), 0.5)
    p = sample_compound_poisson(unit_measure(5.0), 1.0, seed=2)
    field = build_noise_field([mode], [p])
    for tj in field.jump_times:
        dw = jump_field(field, tj)
        assert dw[1] != 0.0
        assert dw[0] == 0.0 and dw[-1] == 0.0
