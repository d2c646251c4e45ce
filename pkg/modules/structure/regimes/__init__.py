"""
Regimes module: evaluator family {l_k}, regime weights, contextual switching,
salience-weighted active loss, the protected evaluative core and the certified
evaluator update (projection of candidate weights onto the admissible set).
"""

from .cert_update import ADMISSIBLE_TOL, DIVERGENCES, cert_update, divergence_value
from .core import (
    AuditCase,
    OrderingConstraint,
    ProtectedCore,
    ThresholdConstraint,
    WeightConstraint,
    check_core_equivalence,
    check_evaluative_invariance,
    check_protected_core,
    constraint_from_dict,
    grid_single_evaluators,
)
from .evaluators import (
    DEFAULT_CONTEXT,
    SIMPLEX_TOL,
    Evaluator,
    EvaluatorFamily,
    RegimeWeights,
    SwitchingOperator,
    active_loss,
    label_of,
    select_regime,
)

MODULE_INFO = {
    "display_name": "Evaluator regimes",
    "description": "Multi-regime evaluators, switching, protected core and certified weight updates.",
    "type": "structure",
    "commands": ["simulate", "certify", "fixtures", "protocol"],
}
MODULE_NAME = "regimes"


def get_setting_keys():
    return ["cert_update_divergence", "core_grid_per_axis"]


def get_default_settings():
    """Return default settings for this module."""
    return {
        "cert_update_divergence": "squared_euclidean",
        "core_grid_per_axis": 100,
    }
