"""Fair recommendation policies for two-sided matching markets."""

from .baselines import TuConfig, iterlp_policy, naive_policy, prod_policy, tu_policy, tu_scores
from .birkhoff import (
    SinkhornConfig,
    SinkhornOverflowError,
    gain_to_cost,
    linear_max_exact,
    linear_max_sinkhorn,
    sinkhorn,
)
from .core import (
    ExaminationModel,
    Instance,
    InstanceError,
    Policy,
    examination_vector,
    load_instance,
    policy_from_rankings,
    uniform_policy,
    validate_policy,
)
from .datagen import GenConfig, generate, perturb
from .estimators import (
    IterLPRecommender,
    NaiveRecommender,
    ProdRecommender,
    TURecommender,
    WelfareRecommender,
)
from .metrics import (
    MetricsReport,
    alpha_sw,
    envy_counts,
    evaluate,
    gini,
    nsw_log,
    opportunity_utility,
    pareto_dominates,
    social_welfare,
    utilities,
)
from .optim import Objective, OptimConfig, OptimTrace, alternating_maximize, gradient_A, gradient_B

__version__ = "0.1.0"

__all__ = [
    "ExaminationModel",
    "GenConfig",
    "Instance",
    "InstanceError",
    "IterLPRecommender",
    "MetricsReport",
    "NaiveRecommender",
    "Objective",
    "OptimConfig",
    "OptimTrace",
    "Policy",
    "ProdRecommender",
    "SinkhornConfig",
    "SinkhornOverflowError",
    "TURecommender",
    "TuConfig",
    "WelfareRecommender",
    "alpha_sw",
    "alternating_maximize",
    "envy_counts",
    "evaluate",
    "examination_vector",
    "gain_to_cost",
    "generate",
    "gini",
    "gradient_A",
    "gradient_B",
    "iterlp_policy",
    "linear_max_exact",
    "linear_max_sinkhorn",
    "load_instance",
    "naive_policy",
    "nsw_log",
    "opportunity_utility",
    "pareto_dominates",
    "perturb",
    "policy_from_rankings",
    "prod_policy",
    "sinkhorn",
    "social_welfare",
    "tu_policy",
    "tu_scores",
    "uniform_policy",
    "utilities",
    "validate_policy",
]
