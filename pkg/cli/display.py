"""Human-readable summaries printed after a command; the JSON reports stay authoritative."""

from __future__ import annotations

from typing import TextIO

from cli.constants import SUMMARY_DIGITS
from cli.pipeline import RunOutcome
from modules.certification.certificates import VERDICT_KEYS


def _mark(ok: bool) -> str:
    return "pass" if ok else "FAIL"


def format_matrix(rows: list[str], matrix: list[list[bool]]) -> str:
    """Fixture-by-obligation table; a diagonal of FAIL marks each obligation as independent."""
    width = max([len(r) for r in rows] + [7])
    head = " " * width + "  " + "  ".join(f"{k[:12]:>12}" for k in VERDICT_KEYS)
    lines = [head]
    for name, row in zip(rows, matrix):
        lines.append(f"{name:<{width}}  " + "  ".join(f"{_mark(v):>12}" for v in row))
    return "\n".join(lines)


def format_outcome(outcome: RunOutcome) -> str:
    s = outcome.summary
    d = SUMMARY_DIGITS
    if outcome.command == "bound":
        return f"{s['kind']} bound: {s['total']:.{d}f} (confidence {s['confidence_term']:.{d}f})"
    if outcome.command == "simulate":
        return f"simulated {s['horizon']} steps, empirical risk {s['empirical_risk']:.{d}f}"
    if outcome.command == "certify":
        verdicts = "  ".join(f"{k}={_mark(v)}" for k, v in s["verdicts"].items())
        tail = f"  first failing: {s['first_failing']}" if s["first_failing"] else ""
        return verdicts + tail
    if outcome.command == "gsrm":
        seq = " ".join(str(k) for k in s["minimizer"])
        return f"minimizer [{seq}] value {s['value']:.{d}f}"
    if outcome.command == "fixtures":
        if "exported" in s:
            return f"exported {s['exported']}"
        lines = [f"suite {s['suite']}: matches expected = {s['matches_expected']}"]
        if s["suite"] == "minimality":
            lines.append(format_matrix(s["rows"], s["matrix"]))
        lines += [f"  {name}: {_mark(ok)}" for name, ok in s["checks"].items()]
        return "\n".join(lines)
    if outcome.command == "protocol":
        lines = [f"axis {s['axis']}"]
        for arm, first in s["first_failure"].items():
            lines.append(f"  {arm}: " + ("no failure" if first is None
                                         else f"fails {first['obligation']} at level {first['level']:g}"))
        for a in s["anomalies"]:
            lines.append(f"  anomaly: {a}")
        return "\n".join(lines)
    return outcome.command


def print_outcome(outcome: RunOutcome, stream: TextIO) -> None:
    print(format_outcome(outcome), file=stream)
    print(f"wrote {len(outcome.files)} file(s); exit {'ok' if outcome.passed else 'certificate failure'}",
          file=stream)
