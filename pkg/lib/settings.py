#!/usr/bin/env python3
"""
Run configuration: defaults, strict JSON loading and saving.
A run configuration is a flat JSON object; any key not declared by the core
defaults or by a module's get_setting_keys() is rejected.

Module-specific defaults are collected from modules via registry.collect_module_defaults().
Only core defaults are defined here.
"""

import json
import os
import pathlib

from lib.errors import ConfigError
from lib.reports import jsonable

# Working directory of the run (outputs default to <cwd>/runs)
SETTINGS_DIR = pathlib.Path.cwd()
SETTINGS_FILE_NAME = "run_config.json"
SEED_ENV_VAR = "SMGI_SEED"

COMMANDS = ("simulate", "certify", "bound", "gsrm", "fixtures", "protocol")

# Core defaults only (module defaults are collected from modules at runtime)
CORE_DEFAULTS = {
    "command": "certify",
    "inputs": [],
    "seed": 0,
    "output_dir": "runs",
    "tolerances": {"exact": 1e-12, "numeric": 1e-9, "confidence": 0.95},
    "workers": 1,
}

# Built at runtime by combining CORE_DEFAULTS with module defaults
_DEFAULTS_CACHE = None


def get_all_defaults(modules=None) -> dict:
    """
    Return combined defaults: core defaults + module defaults.
    Modules are discovered if not provided. Cached after first call.
    """
    global _DEFAULTS_CACHE
    if _DEFAULTS_CACHE is not None and modules is None:
        return dict(_DEFAULTS_CACHE)

    # Lazy import to avoid circular dependency
    from modules.registry import discover_modules, collect_module_defaults
    if modules is None:
        modules = discover_modules()

    defaults = dict(CORE_DEFAULTS)
    defaults["tolerances"] = dict(CORE_DEFAULTS["tolerances"])
    defaults.update(collect_module_defaults(modules))
    _DEFAULTS_CACHE = dict(defaults)
    return defaults


def allowed_keys(modules=None) -> set:
    """Keys accepted by the strict schema: core keys plus every module's setting keys."""
    from modules.registry import discover_modules, all_extra_settings_keys
    if modules is None:
        modules = discover_modules()
    return set(CORE_DEFAULTS) | all_extra_settings_keys(modules)


def load_json_document(path) -> dict:
    """Read a JSON object from disk, mapping every failure to ConfigError with the path."""
    path = pathlib.Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError("configuration file not found", path=path) from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON ({e.msg} at line {e.lineno})", path=path) from None
    if not isinstance(data, dict):
        raise ConfigError("top-level JSON value must be an object", path=path)
    return data


def validate_settings(data: dict, path="", modules=None) -> dict:
    """Merge data over defaults; unknown keys and malformed core fields raise ConfigError."""
    allowed = allowed_keys(modules)
    for k in data:
        if k not in allowed:
            raise ConfigError("unknown configuration field", path=path, field=k)
    out = get_all_defaults(modules)
    for k, v in data.items():
        if k == "tolerances":
            if not isinstance(v, dict):
                raise ConfigError("tolerances must be an object", path=path, field=k)
            tol = dict(out["tolerances"])
            for tk, tv in v.items():
                if tk not in CORE_DEFAULTS["tolerances"]:
                    raise ConfigError("unknown tolerance", path=path, field=f"tolerances.{tk}")
                tol[tk] = float(tv)
            out["tolerances"] = tol
        else:
            out[k] = v
    if out["command"] not in COMMANDS:
        raise ConfigError(f"command must be one of {COMMANDS}", path=path, field="command")
    try:
        out["seed"] = int(out["seed"])
        out["workers"] = max(1, int(out["workers"]))
    except (TypeError, ValueError):
        raise ConfigError("seed and workers must be integers", path=path, field="seed") from None
    if not isinstance(out["inputs"], list):
        raise ConfigError("inputs must be a list of paths", path=path, field="inputs")
    return apply_seed_override(out)


def apply_seed_override(settings_dict: dict) -> dict:
    """SMGI_SEED in the environment overrides the configured seed."""
    raw = os.environ.get(SEED_ENV_VAR, "").strip()
    if raw:
        try:
            settings_dict["seed"] = int(raw)
        except ValueError:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer", field=SEED_ENV_VAR) from None
    return settings_dict


def load_settings(path=None, overrides=None, modules=None) -> dict:
    """Load a run configuration (defaults if path is None), then apply CLI overrides."""
    data = load_json_document(path) if path is not None else {}
    if overrides:
        data = {**data, **{k: v for k, v in overrides.items() if v is not None}}
    return validate_settings(data, path=path or "", modules=modules)


def save_settings(settings_dict: dict, output_dir) -> pathlib.Path:
    """Write the resolved run configuration next to the run outputs."""
    out_dir = pathlib.Path(output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / SETTINGS_FILE_NAME
    with open(path, "w", encoding="utf-8") as f:
        json.dump(jsonable(settings_dict), f, indent=2, sort_keys=True, allow_nan=False)
    return path
