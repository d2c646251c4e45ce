"""
Fixtures workflow_automation module.
Canonical single-obligation counterexamples, the strict-inclusion instance, the
two-regime tool-use instance and the classical embedding; each runs through the
bundle checker and exports as a standalone run configuration.
"""

from .catalog import (
    CAPACITY_SCHEDULE,
    MINIMALITY_FIXTURES,
    FixtureEntry,
    capacity_witness_level,
    default_catalog,
    export_fixture,
    fixture_names,
    get_fixture,
    load_fixture,
    minimality_expected,
    run_fixture,
)
from .suites import (
    SUITES,
    SuiteResult,
    minimality_suite,
    run_suite,
    strict_inclusion_suite,
    tooluse_suite,
    tooluse_update,
)

MODULE_INFO = {
    "display_name": "Fixtures",
    "description": "Counterexample catalog, minimality and strict-inclusion suites.",
    "type": "workflow_automation",
    "commands": ["certify", "fixtures"],
}
MODULE_NAME = "fixtures"


def get_setting_keys():
    """Keys this module reads from a run configuration."""
    return ["fixture", "fixture_spec", "suite"]


# (key, converter, default)
_FIXTURE_SETTINGS_SPEC = [
    ("fixture", lambda x: str(x) if x else None, None),
    ("fixture_spec", lambda x: dict(x) if x else None, None),
    ("suite", lambda x: str(x) if x else None, None),
]


def get_default_settings():
    """Return default settings for this module (extracted from the settings spec)."""
    return {key: default for key, _conv, default in _FIXTURE_SETTINGS_SPEC}
