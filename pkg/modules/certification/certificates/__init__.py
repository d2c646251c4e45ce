"""
Certificates module: Lyapunov drift (stability), capacity, the (U1)-(U5)
admissibility bundle and the composite structural-closure check.
"""

from .bundle import (
    VERDICT_KEYS,
    check_bundle,
    check_evaluator_shift,
    check_theorem_closure,
    first_failing,
    verdict_vector,
)
from .drift import (
    CAPACITY_KINDS,
    DRIFT_TOL,
    CapacityFunctional,
    LyapunovWitness,
    capacity_value,
    check_capacity,
    check_drift,
    kl_to_prior,
    non_explosion_constant,
)

MODULE_INFO = {
    "display_name": "Admissibility certificates",
    "description": "Drift, capacity, (U1)-(U5) bundle and structural-closure checks.",
    "type": "certification",
    "commands": ["certify", "fixtures", "protocol"],
}
MODULE_NAME = "certificates"


def get_setting_keys():
    return ["drift_mc_samples", "lipschitz_ell"]


def get_default_settings():
    """Return default settings for this module."""
    return {
        "drift_mc_samples": 1000,
        "lipschitz_ell": 1.0,
    }
