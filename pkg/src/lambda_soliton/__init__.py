"""Simulation lab for soliton-like structures of a lambda-parametrized
implicit scheme applied to the diffusion equation with an imaginary
coefficient, plus a Grunwald-Letnikov fractional-time comparator."""

__version__ = "0.1.0"

from .errors import (
    BracketInvalid,
    DivisionNearZero,
    EmptySeries,
    GridMismatch,
    InvalidRamp,
    SamplesLengthMismatch,
    SingularOrIllConditioned,
    TooFewRows,
    TooFewSamples,
)
from .field import (
    GridSpec,
    InitialCondition,
    Samples,
    SimulationConfig,
    StateVector,
    Uniform,
    UniformWithEdgeRamp,
    apply_boundary,
    build_initial_field,
)
from .fractional import (
    DivergenceTable,
    GLConfig,
    GLHistory,
    compare_lambda_gl,
    gl_simulate,
    gl_step,
    gl_weights,
    laplacian,
    trajectory_divergence,
)
from .peaks import (
    EventRecord,
    Peak,
    PeakTrack,
    TrackingParams,
    detect_collisions,
    detect_peaks,
    detect_reflections,
    estimate_velocity,
    height_series,
    track_peaks,
)
from .scheme import (
    StepFactorization,
    Trajectory,
    TridiagonalSystem,
    amplification_factor,
    assemble_step_system,
    resonant_wavenumber,
    simulate,
    solve_tridiagonal,
    step,
)
from .experiments import (
    FormationCriteria,
    HeightTrace,
    HeightTraceBundle,
    SweepResult,
    SweepRow,
    ThresholdResult,
    dominant_track,
    formation_config,
    formed,
    height_config,
    height_vs_time,
    monotonicity_check,
    probe_config,
    probe_wavepacket,
    threshold_gradient,
    velocity_vs_lambda,
)
