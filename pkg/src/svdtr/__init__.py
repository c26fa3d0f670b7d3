"""Set-valued treatment regimes for two competing outcomes.

The plug-in rule recommends a single treatment when it is clinically better
for one outcome and not clinically worse for the other, and both treatments
otherwise. Two-stage regimes are estimated by enumerating every linear
stage-2 rule compatible with the set-valued stage-2 recommendation and
refitting stage 1 for each.
"""

from .core import (BOTH, NEG, POS, Dataset, ModelSpec, Thresholds, TrajectoryOneStage, TrajectoryTwoStage,
                   TreatmentSet, validate)
from .dynamic_rule import TwoStageRule, estimate_two_stage, qlearning_single_outcome, union_rule
from .enumeration import (Labeling, canonical_feasible_rule, enumerate_feasible, enumerate_feasible_multi,
                          enumerate_labelings)
from .errors import (BindingError, BudgetExceeded, ConfigError, DataError, DimensionMismatch, InsufficientData,
                     NumericalFailure, ParseError, RankDeficient, SvdtrError)
from .lp import lp_feasible
from .regression import FittedQModel, fit_q_model
from .static_rule import SetValuedRule, apply_rule, classify, estimate_static_rule, multi_recommend

__version__ = "0.1.0"

__all__ = [
    "BOTH", "NEG", "POS", "Dataset", "ModelSpec", "Thresholds", "TrajectoryOneStage", "TrajectoryTwoStage",
    "TreatmentSet", "validate", "TwoStageRule", "estimate_two_stage", "qlearning_single_outcome", "union_rule",
    "Labeling", "canonical_feasible_rule", "enumerate_feasible", "enumerate_feasible_multi",
    "enumerate_labelings", "BindingError", "BudgetExceeded", "ConfigError", "DataError", "DimensionMismatch",
    "InsufficientData", "NumericalFailure", "ParseError", "RankDeficient", "SvdtrError", "lp_feasible",
    "FittedQModel", "fit_q_model", "SetValuedRule", "apply_rule", "classify", "estimate_static_rule",
    "multi_recommend",
]
