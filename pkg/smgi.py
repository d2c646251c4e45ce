#!/usr/bin/env python3
"""
Command-line entry point: simulate, certify, bound, gsrm, fixtures, protocol.
Exit codes: 0 when every certificate passes, 1 when one fails, 2 on an
invalid run configuration or input document.
"""

import logging
import os
import sys

# Ensure app directory is on path for module imports
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
from cli.build_parser import build_parser, overrides_from_args
from cli.constants import EXIT_CERTIFICATE_FAILED, EXIT_CONFIG_ERROR, EXIT_OK, LOG_FORMAT
from cli.display import print_outcome
from cli.pipeline import run_command
from lib.errors import ConfigError, SmgiError
from lib.settings import load_settings
from modules.registry import discover_modules

log = logging.getLogger("smgi")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help(sys.stderr)
        return EXIT_CONFIG_ERROR
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format=LOG_FORMAT,
                        stream=sys.stderr, force=True)
    try:
        modules = discover_modules()
        settings = load_settings(args.config, overrides_from_args(args), modules=modules)
        log.debug("settings command=%s seed=%s output_dir=%s", settings["command"], settings["seed"],
                  settings["output_dir"])
        outcome = run_command(settings, args)
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except SmgiError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    print_outcome(outcome, sys.stdout)
    return EXIT_OK if outcome.passed else EXIT_CERTIFICATE_FAILED


if __name__ == "__main__":
    sys.exit(main())
