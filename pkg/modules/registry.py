"""
Discover modules packages and their metadata.
Modules live under modules/<type>/<name>/ (structure, certification, workflow_automation).
Each module declares MODULE_INFO and optionally get_setting_keys() /
get_default_settings(); the run configuration uses this to build its strict
schema and defaults, and the CLI uses the declared commands for its help text.
"""

import importlib
import logging
import pkgutil
import sys
from typing import Any

MODULES_PACKAGE = "modules"
_TYPE_SUBPACKAGES = ("structure", "certification", "workflow_automation")

log = logging.getLogger("smgi.registry")


def _discover_entries() -> list[tuple[str, str]]:
    """Return list of (name, import_path) for all leaf modules under modules/<type>/."""
    entries: list[tuple[str, str]] = []
    mod = sys.modules.get(MODULES_PACKAGE)
    if mod is None:
        mod = importlib.import_module(MODULES_PACKAGE)
    if getattr(mod, "__path__", None) is None:
        return []
    for type_name in _TYPE_SUBPACKAGES:
        try:
            submod = importlib.import_module(f"{MODULES_PACKAGE}.{type_name}")
        except ImportError as e:
            log.warning("type=%s import-error=%s", type_name, e)
            continue
        subpath = getattr(submod, "__path__", None)
        if subpath is None:
            continue
        for _importer, name, ispkg in pkgutil.iter_modules(subpath):
            if name.startswith("_") or not ispkg:
                continue
            entries.append((name, f"{MODULES_PACKAGE}.{type_name}.{name}"))
    return sorted(entries, key=lambda x: x[0])


def get_module_info(import_path: str) -> dict[str, Any]:
    """
    Import by import_path and return MODULE_INFO (or defaults).
    Returns dict with: display_name, description, type, commands, setting_keys (list).
    """
    name = import_path.split(".")[-1]
    defaults = {
        "display_name": name.replace("_", " ").title(),
        "description": "",
        "type": "structure",
        "commands": [],
        "setting_keys": [],
    }
    mod = importlib.import_module(import_path)
    info = getattr(mod, "MODULE_INFO", None)
    if isinstance(info, dict):
        defaults.update(info)
    get_sk = getattr(mod, "get_setting_keys", None)
    if callable(get_sk):
        keys = get_sk()
        if isinstance(keys, (list, tuple)):
            defaults["setting_keys"] = list(keys)
    return defaults


def discover_modules() -> list[dict[str, Any]]:
    """
    Return list of module info dicts for all discovered packages under modules/<type>/.
    Each dict has: name, import_path, display_name, description, type, commands, setting_keys.
    """
    result = []
    for name, import_path in _discover_entries():
        info = get_module_info(import_path)
        info["name"] = name
        info["import_path"] = import_path
        result.append(info)
    return result


def modules_for_command(modules: list[dict[str, Any]], command: str) -> list[str]:
    """Names of modules that declare they serve command (for CLI help and logging)."""
    return [m["name"] for m in modules if command in (m.get("commands") or [])]


def all_extra_settings_keys(modules: list[dict[str, Any]]) -> set[str]:
    """Return set of all module setting keys accepted in a run configuration."""
    keys = set()
    for m in modules:
        keys.update(m.get("setting_keys") or [])
    return keys


def collect_module_defaults(modules: list[dict[str, Any]]) -> dict[str, Any]:
    """
    Collect default settings from all modules.
    Uses import_path for each module.
    """
    defaults = {}
    for m in modules:
        mod = importlib.import_module(m["import_path"])
        get_defaults = getattr(mod, "get_default_settings", None)
        if callable(get_defaults):
            module_defaults = get_defaults()
            if isinstance(module_defaults, dict):
                defaults.update(module_defaults)
    return defaults
