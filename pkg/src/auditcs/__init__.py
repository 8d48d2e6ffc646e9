"""Risk-limiting financial audits with anytime-valid confidence sequences."""

from .confseq import (
    CS_FAMILIES,
    ClosedFormState,
    Interval,
    betting_interval,
    empirical_bernstein_interval,
    hoeffding_interval,
    intersect_running,
    logical_bounds,
)
from .engine import (
    AuditHistory,
    AuditSession,
    IntervalState,
    SessionConfig,
    StepResult,
    create_session,
    restore_session,
    save_session,
)
from .errors import (
    AuditError,
    ConfigurationError,
    DegenerateDistributionError,
    FormatError,
    InvariantViolation,
    SequencingError,
    ValidationError,
)
from .martingale import (
    DEFAULT_GRID_SIZE,
    GrowthDiagnostics,
    NullGrid,
    Observation,
    StepContext,
    approx_kelly_bet,
    bet_bounds,
    beta_update,
    compute_payoff,
    control_variate_values,
    residual_null,
    update_wealth,
    update_wealth_batch,
)
from .population import (
    Population,
    load_population_csv,
    normalize_weights,
    parse_population_csv,
    population_from_arrays,
    save_population_csv,
)
from .sampling import (
    STRATEGY_KINDS,
    Distribution,
    SamplingStrategy,
    draw_index,
    make_distribution,
)
from .simulator import (
    CvSweepResult,
    ExperimentResult,
    ScenarioConfig,
    cv_gain_sweep,
    generate_population,
    generate_scores,
    run_single_trial,
    run_trials,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
