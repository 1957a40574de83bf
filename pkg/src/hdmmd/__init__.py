"""Studentized kernel two-sample testing (MMD, energy distance) in high dimension.

The compute core (Gram matrices and kernel sums) is a compiled extension
when available, with a numpy fallback chosen at import time; ``BACKEND``
reports which one is active.
"""

__version__ = "0.1.0"

from ._backend import BACKEND, default_threads
from .errors import (
    ConfigError,
    DegenerateBandwidth,
    DegenerateVariance,
    DimensionMismatch,
    DomainError,
    EmptyInput,
    HdMmdError,
    HypothesisViolated,
    MissingSummary,
    NotPositiveSemiDefinite,
    SingularMatrix,
    TooFewSamples,
    TooFewValues,
    UnsupportedOrder,
)
from .kernels import (
    BandwidthMode,
    BandwidthPolicy,
    Family,
    KernelSpec,
    f_deriv,
    kernel_value,
    parse_bandwidth,
    parse_kernel,
    resolve_bandwidth,
)
from .mmd import (
    PooledGram,
    TestResult,
    mmd_unbiased,
    squared_distance_block,
    tau_hats,
    trace_estimators,
    two_sample_test,
    variance_estimate,
)
from .datagen import (
    CovarianceSpec,
    EntryDist,
    ModelSpec,
    Sampler,
    covariance_matrix,
    derive_rng,
    population_moments,
    sample,
)
from .theory import (
    PowerPrediction,
    ReducedSummary,
    Regime,
    TheoryInput,
    h1,
    h2,
    population_mmd_gaussian,
    population_mmd_monte_carlo,
    power_higher_order,
    power_local,
    predict_power,
    t1_exact,
    t1_frobenius,
    tau_params,
    ts_monte_carlo,
    var_delta1_components,
)
from .montecarlo import (
    DEFAULT_SEED,
    ExperimentConfig,
    ExperimentResult,
    GridPoint,
    KernelChoice,
    Mode,
    clopper_pearson,
    ks_distance,
    run_experiment,
)
