"""Random-access MAC with SIC reception: analytic throughput, channel
simulation, active-count estimation, and the five-phase gateway frame."""

from .analytic import (
    BracketingError,
    MaxThroughputResult,
    ThroughputCurve,
    ThroughputPoint,
    max_throughput,
    poisson_arrival_pmf,
    throughput,
    throughput_curve,
    throughput_derivative,
)
from .estimator import (
    EstimationOutcome,
    HypothesisConfig,
    MonteCarloEstimation,
    bonferroni_threshold,
    estimate_active_count,
    monte_carlo_estimation,
    p_value_from_statistic,
    prior_config_probability,
    simulate_estimation_round,
)
from .protocol import (
    BackoffPolicy,
    DeviceState,
    FrameResult,
    FrameSchedule,
    SessionStats,
    TraceEvent,
    effective_throughput,
    format_trace,
    power_backoff,
    run_frame,
    run_session,
)
from .simcore import (
    SicMode,
    SicModel,
    SimConfig,
    SimStats,
    Transmission,
    generate_traffic,
    overlap_count,
    resolve_sic,
    run_simulation,
)

__version__ = "0.1.0"
