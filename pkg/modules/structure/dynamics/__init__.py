"""
Dynamics module: states of S_theta, transition kernels T_{theta,tau},
seeded trajectory simulation and the closure certificate.
"""

from .closure import check_closure
from .kernels import (
    COUNTER_BOUND,
    KERNEL_KINDS,
    State,
    TransitionKernel,
    constant_kernel,
    counter_kernel,
    drift_chain_kernel,
    identity_kernel,
    kernel_from_dict,
    point_states,
    sampler_kernel,
    step,
    table_kernel,
)
from .simulation import (
    CSV_COLUMNS,
    Trajectory,
    empirical_risk,
    empirical_risk_posterior,
    simulate,
    trajectory_rows,
    write_trajectory_csv,
)

MODULE_INFO = {
    "display_name": "Induced dynamics",
    "description": "Transition kernels, seeded trajectory simulation, closure certificate.",
    "type": "structure",
    "commands": ["simulate", "certify", "protocol"],
}
MODULE_NAME = "dynamics"


def get_setting_keys():
    return ["horizon", "closure_probes"]


def get_default_settings():
    """Return default settings for this module."""
    return {
        "horizon": 100,
        "closure_probes": 1000,
    }
