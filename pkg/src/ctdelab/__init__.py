"""Tabular Dec-POMDP oracles and small centralized-training / decentralized-execution learners."""
from .core import (DecPomdpModel, JointDeterministicPolicy, JointHistory, JointStochasticPolicy,
                   brute_force_optimal, exact_policy_value, load_model, monte_carlo_value, save_model)
from .envs import REGISTRY, make_env
from .errors import (AlignmentError, ConfigError, CtdeLabError, DimensionError, EnumerationBudgetError,
                     LifecycleError, ModelIntegrityError, NumericError, SpecError, UnsupportedError,
                     ZeroProbabilityError)

__version__ = "0.1.0"

__all__ = [
    "DecPomdpModel", "JointDeterministicPolicy", "JointHistory", "JointStochasticPolicy",
    "brute_force_optimal", "exact_policy_value", "load_model", "monte_carlo_value", "save_model",
    "REGISTRY", "make_env", "AlignmentError", "ConfigError", "CtdeLabError", "DimensionError",
    "EnumerationBudgetError", "LifecycleError", "ModelIntegrityError", "NumericError", "SpecError",
    "UnsupportedError", "ZeroProbabilityError", "__version__",
]
