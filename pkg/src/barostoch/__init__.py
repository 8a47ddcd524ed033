"""barostoch: pathwise simulation of 1D barotropic flow driven by cadlag
stochastic forcing, with verification diagnostics for the weak-form
identities and a Skorokhod-metric toolkit."""

from .paths import (
    CadlagPath,
    Reparametrization,
    evaluate,
    left_limit,
    uniform_distance,
    skorokhod_distance,
    skorokhod_converges,
)
from .noise import (
    LevyMeasureDiscrete,
    JumpLayer,
    LevySpec,
    SpatialMode,
    NoiseField,
    component_seed,
    sample_brownian,
    sample_compound_poisson,
    compensate,
    sample_levy,
    build_noise_field,
    sine_modes,
)
from .fluid import (
    PressureLaw,
    Viscosity,
    Grid1D,
    State,
    Trajectory,
    VacuumBreachError,
    pressure,
    pressure_potential,
    stress_1d,
    cfl_dt,
    step_deterministic,
    apply_jump_kick,
    solve_path,
)
from .diagnostics import (
    TestFunction,
    total_mass,
    relative_energy,
    dissipation,
    energy_residual,
    renorm_residual,
    weak_pairing,
    weak_distance,
    DiagnosticsReport,
)
from .config import RunConfig, ConfigError, parse_config
from .harness import (
    run_single,
    run_ensemble,
    mollify_noise,
    run_stability,
    EnsembleSummary,
    StabilityReport,
)

__version__ = "0.1.0"
