"""Delay-cost allocation for projects with stochastic activity durations."""

from scheduling.allocation import (
    Allocation,
    SamplingPlan,
    balancedness_residual,
    exact_shapley,
    relative_error_pct,
    shapley_det,
    shapley_stoch,
    value_error_survey,
)
from scheduling.distributions import (
    Discrete,
    Exponential,
    Point,
    RngStream,
    Triangular,
    Uniform,
    discretize,
    mean,
    sample,
)
from scheduling.errors import (
    BudgetError,
    CycleError,
    DelayShareError,
    DomainError,
    IoError,
    ParseError,
    SchemaError,
)
from scheduling.experiments import conditional_study, export_density
from scheduling.game import (
    CharacteristicFunction,
    DeterministicProblem,
    SampleMatrix,
    StochasticProblem,
    det_value,
    draw_sample_matrix,
    eliminate,
    stoch_value_exact,
    stoch_value_mc,
)
from scheduling.project import (
    DelayCost,
    Project,
    ThresholdCost,
    delay_cost,
    early_times,
    project_duration,
    topological_order,
    transitive_closure,
)

__version__ = "1.0.0"
