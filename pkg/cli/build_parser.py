"""
Argument parser for smgi.py: shared run flags plus one subcommand per command.
Parsed arguments are turned into run-configuration overrides by overrides_from_args.
"""

from __future__ import annotations

import argparse

from cli.constants import BOUND_PRESETS, DEFAULT_EMPIRICAL_RISK, SUITE_NAMES
from modules.certification.gsrm import MODES as GSRM_MODES
from modules.workflow_automation.fixtures import fixture_names
from modules.workflow_automation.protocol import AXIS_KINDS


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="JSON run configuration (unknown fields are rejected)")
    p.add_argument("--input", metavar="PATH", action="append", dest="inputs",
                   help="JSON input document; may be repeated")
    p.add_argument("--seed", type=int, help="base seed (SMGI_SEED overrides)")
    p.add_argument("--output-dir", metavar="DIR", help="where reports, CSVs and the manifest are written")
    p.add_argument("--workers", type=int, help="parallel workers for probes, seeds and levels")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _sweep_axis(text: str) -> tuple[str, list[float]]:
    name, sep, values = text.partition("=")
    if not sep or not name.strip():
        raise argparse.ArgumentTypeError(f"sweep axis must look like name=v1,v2 (got {text!r})")
    return name.strip(), _float_list(values)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smgi",
        description="Simulate, certify and bound structural learning dynamics.",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = False

    p = sub.add_parser("simulate", help="simulate a trajectory and write it as CSV")
    _add_common(p)
    p.add_argument("--fixture", choices=fixture_names(), help="simulate a catalog fixture")
    p.add_argument("--horizon", type=int, help="number of steps")

    p = sub.add_parser("certify", help="run the admissibility bundle")
    _add_common(p)
    p.add_argument("--fixture", choices=fixture_names(), help="certify a catalog fixture")

    p = sub.add_parser("bound", help="evaluate or sweep a generalization bound")
    _add_common(p)
    p.add_argument("--preset", choices=BOUND_PRESETS, default="structural")
    p.add_argument("--emp", type=float, default=DEFAULT_EMPIRICAL_RISK, help="empirical risk")
    p.add_argument("--kl", type=float, default=0.0)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--delta", type=float, help="confidence parameter (default: bound_delta)")
    p.add_argument("--L", type=float, default=0.0)
    p.add_argument("--B", type=float, default=1.0)
    p.add_argument("--V0", type=float, default=0.0)
    p.add_argument("--sweep", type=_sweep_axis, action="append", metavar="NAME=V1,V2",
                   help="sweep one parameter over values (repeatable; cartesian product)")

    p = sub.add_parser("gsrm", help="minimize a GSRM instance")
    _add_common(p)
    p.add_argument("--mode", choices=GSRM_MODES, help="minimizer")

    p = sub.add_parser("fixtures", help="run a fixture suite or export a fixture")
    _add_common(p)
    p.add_argument("--suite", choices=SUITE_NAMES)
    p.add_argument("--export", choices=fixture_names(), metavar="NAME",
                   help="write the fixture as a standalone run configuration")

    p = sub.add_parser("protocol", help="run the growth protocol")
    _add_common(p)
    p.add_argument("--axis", choices=AXIS_KINDS)
    p.add_argument("--levels", type=_float_list, help="comma-separated strictly increasing levels")
    p.add_argument("--steps", type=int, help="steps per trajectory")
    p.add_argument("--seeds", type=int, help="trajectories per arm and level")
    p.add_argument("--grid", type=int, help="baseline tuning grid points per axis")

    return parser


def overrides_from_args(args: argparse.Namespace) -> dict:
    """Run-configuration keys set on the command line (None values are dropped by load_settings)."""
    out = {
        "command": getattr(args, "command", None),
        "seed": getattr(args, "seed", None),
        "output_dir": getattr(args, "output_dir", None),
        "workers": getattr(args, "workers", None),
        "inputs": getattr(args, "inputs", None),
        "fixture": getattr(args, "fixture", None),
        "suite": getattr(args, "suite", None),
        "horizon": getattr(args, "horizon", None),
        "gsrm_mode": getattr(args, "mode", None),
        "bound_delta": getattr(args, "delta", None),
        "bound_sweep": dict(args.sweep) if getattr(args, "sweep", None) else None,
        "protocol_axis": getattr(args, "axis", None),
        "protocol_levels": getattr(args, "levels", None),
        "protocol_steps": getattr(args, "steps", None),
        "protocol_seeds": getattr(args, "seeds", None),
        "protocol_grid_per_axis": getattr(args, "grid", None),
    }
    return {k: v for k, v in out.items() if v is not None}
