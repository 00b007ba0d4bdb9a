"""Preference elicitation engine for factored (GAI) utility models."""

__version__ = "0.1.0"

from .belief import ParameterBelief, UniformMixture
from .elicitation import (
    LocalValueTable,
    assemble_utility,
    conditioning_set,
    global_scaling_plan,
    local_query_plan,
    run_exact_elicitation,
)
from .evoi import ComparisonQuery, EvoiContext, best_local_query, optimal_threshold
from .harness import CAR_RENTAL_SCALE, ExperimentConfig, generate_synthetic_model, run_experiment
from .inference import expected_tables, max_expected_outcome, restricted_max
from .model import (
    AnchorUtilities,
    AttributeSpec,
    CompiledPlan,
    Constraint,
    FactorScope,
    GaiModel,
    build_gai_graph,
    compute_canonical_plan,
    evaluate_utility,
    validate_model,
)
from .problemfile import ProblemDocument, load_problem, parse_problem
from .session import ElicitationSession

__all__ = [
    "AnchorUtilities",
    "AttributeSpec",
    "CAR_RENTAL_SCALE",
    "ComparisonQuery",
    "CompiledPlan",
    "Constraint",
    "ElicitationSession",
    "EvoiContext",
    "ExperimentConfig",
    "FactorScope",
    "GaiModel",
    "LocalValueTable",
    "ParameterBelief",
    "ProblemDocument",
    "UniformMixture",
    "assemble_utility",
    "best_local_query",
    "build_gai_graph",
    "compute_canonical_plan",
    "conditioning_set",
    "evaluate_utility",
    "expected_tables",
    "generate_synthetic_model",
    "global_scaling_plan",
    "load_problem",
    "local_query_plan",
    "max_expected_outcome",
    "optimal_threshold",
    "parse_problem",
    "restricted_max",
    "run_exact_elicitation",
    "run_experiment",
    "validate_model",
]
