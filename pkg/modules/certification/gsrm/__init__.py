"""
GSRM module: generalized structural risk minimization over regime sequences
with switching and incoherence penalties; exact minimization and Monte-Carlo
expectation under a switching operator.
"""

from .objective import (
    AUTO_EXHAUSTIVE_LIMIT,
    MODES,
    EXHAUSTIVE_LIMIT,
    GsrmInstance,
    gsrm_exact_expectation,
    gsrm_expected,
    gsrm_minimize,
    gsrm_objective,
    gsrm_rows,
)

MODULE_INFO = {
    "display_name": "GSRM",
    "description": "Regime-sequence risk with switching and incoherence penalties; exact minimization.",
    "type": "certification",
    "commands": ["gsrm"],
}
MODULE_NAME = "gsrm"


def get_setting_keys():
    return ["gsrm_mode", "gsrm_mc_samples"]


def get_default_settings():
    """Return default settings for this module."""
    return {
        "gsrm_mode": "auto",
        "gsrm_mc_samples": 10000,
    }
