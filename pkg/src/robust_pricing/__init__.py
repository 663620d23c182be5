"""Robust multi-product pricing under GEV choice models."""

from .errors import (
    ConfigurationError,
    ConvergenceError,
    DomainError,
    NumericError,
    PricingError,
)
from .gev import (
    ChoiceParams,
    GevModel,
    Nest,
    ProductLine,
    choice_probabilities,
    cpgf_value,
    cpgf_weighted_grad,
    expected_revenue,
    gev_property_check,
    partition_value,
    utilities,
)
from .lambertw import lambert_w0
from .uncertainty import (
    MixtureUncertaintySet,
    coordinate_bounds,
    params_at,
    project_weights,
    sample_uniform,
)
from .adversary import (
    AdversarySession,
    AdversarySolution,
    maximize_cpgf,
    min_cpgf_inverse,
    minimize_cpgf,
)
from .pricing_det import DetSolution, det_price_homogeneous, det_price_partition
from .pricing_robust import (
    RobustSolution,
    SampledEvaluation,
    markup_bracket,
    markups_from_probabilities,
    reduced_objective_and_grad,
    robust_price_homogeneous,
    robust_price_partition,
    sampled_worst_case,
    solution_to_json,
    worst_case_markup_revenue,
)
from .penalty import (
    PenaltySpec,
    constrained_reference_solve,
    lambda_sweep_convergence,
    penalty_profit,
    penalty_violation,
    robust_penalty_solve,
)
from .baselines import BaselineSolution, det_baseline, sampling_baseline
from .harness import (
    EvaluationReport,
    Instance,
    generate_instance,
    instance_from_json,
    instance_to_json,
    percentile_rank,
    run_comparison,
    run_penalty_comparison,
)

__version__ = "0.1.0"
