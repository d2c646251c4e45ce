"""
Bounds module: numerical evaluation of the generalization bounds (baseline
PAC-Bayes, structural, unified, Azuma drift term) and the program prior with
its KL-length identity.
"""

from .formulas import (
    BOUND_KINDS,
    BoundReport,
    azuma_drift_term,
    bound_validity_experiment,
    evaluate_bound,
    kl_length_identity_check,
    pacbayes_basic,
    program_log_normalizer,
    program_prior,
    structural_bound,
    structural_bound_trajectory,
    structural_confidence,
    sweep_bound,
    unified_bound,
    write_rows_csv,
)

MODULE_INFO = {
    "display_name": "Generalization bounds",
    "description": "PAC-Bayes, structural and unified bounds; program prior and KL-length identity.",
    "type": "certification",
    "commands": ["bound", "protocol"],
}
MODULE_NAME = "bounds"


def get_setting_keys():
    return ["bound_delta", "bound_sweep"]


def get_default_settings():
    """Return default settings for this module."""
    return {
        "bound_delta": 0.05,
        "bound_sweep": {},
    }
