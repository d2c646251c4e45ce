"""
Protocol workflow_automation module.
Grows the environment family along one axis (adversarial-context frequency or
evaluator antagonism) and runs a certified K = 2 arm against a tuned K = 1
baseline at every level with identical seeds and step budget.
"""

from lib.errors import ConfigError

from .growth import (
    AXIS_KINDS,
    GrowthAxis,
    active_contexts,
    adversarial_frequency,
    antagonistic_row,
    family_at_level,
    grow_family,
    risk_rows,
)
from .runner import (
    ARMS,
    CSV_FIELDS,
    DEFAULT_LEVELS,
    ArmResult,
    ProtocolBudget,
    ProtocolConfig,
    ProtocolReport,
    default_base_family,
    default_protocol_configs,
    derived_core,
    run_protocol,
    smgi_evaluators,
    tuned_baseline,
)

MODULE_INFO = {
    "display_name": "Growth protocol",
    "description": "Matched-budget SMGI versus single-evaluator baseline along a growth axis.",
    "type": "workflow_automation",
    "commands": ["protocol"],
}
MODULE_NAME = "protocol"


def get_setting_keys():
    """Keys this module reads from a run configuration."""
    return [key for key, _conv, _default in _PROTOCOL_SETTINGS_SPEC]


# (key, converter, default)
_PROTOCOL_SETTINGS_SPEC = [
    ("protocol_axis", str, "evaluator_antagonism"),
    ("protocol_levels", lambda x: [float(v) for v in x] if x else None, None),
    ("protocol_steps", int, 50),
    ("protocol_seeds", int, 20),
    ("protocol_grid_per_axis", int, 21),
]


def get_default_settings():
    """Return default settings for this module (extracted from the settings spec)."""
    return {key: default for key, _conv, default in _PROTOCOL_SETTINGS_SPEC}


def _get_int(s: dict, key: str, default: int, lo: int, hi: int) -> int:
    """Get int from settings, handling JSON null; clamp to [lo, hi]."""
    v = s.get(key)
    if v is None:
        return default
    try:
        return max(lo, min(hi, int(v)))
    except (TypeError, ValueError):
        return default


def protocol_settings(s: dict) -> dict:
    """Normalized protocol settings from a loaded run configuration."""
    axis = s.get("protocol_axis") or "evaluator_antagonism"
    if axis not in AXIS_KINDS:
        raise ConfigError(f"protocol_axis must be one of {AXIS_KINDS}", field="protocol_axis")
    levels = s.get("protocol_levels")
    return {
        "axis": axis,
        "levels": tuple(float(v) for v in levels) if levels else DEFAULT_LEVELS[axis],
        "n_steps": _get_int(s, "protocol_steps", 50, 2, 10 ** 6),
        "n_seeds": _get_int(s, "protocol_seeds", 20, 1, 10 ** 5),
        "grid_per_axis": _get_int(s, "protocol_grid_per_axis", 21, 2, 1001),
    }
