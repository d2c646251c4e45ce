"""
Fixture suites: the 4 x 4 minimality matrix, strict structural inclusion over
the flipped-ordering instance and the certified update on the tool-use instance.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from lib.reports import CertificateReport, jsonable
from modules.certification.certificates import VERDICT_KEYS
from modules.structure.regimes import RegimeWeights, cert_update, check_core_equivalence

from .catalog import MINIMALITY_FIXTURES, get_fixture, run_fixture

log = logging.getLogger("smgi.fixtures")

SUITES = ("minimality", "strict_inclusion", "tooluse")
PROJECTION_TOL = 1e-6


@dataclass
class SuiteResult:
    name: str
    verdicts: dict[str, dict[str, bool]]
    expected: dict[str, dict[str, bool]]
    reports: dict[str, list[CertificateReport]] = field(default_factory=dict)
    checks: dict[str, bool] = field(default_factory=dict)
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def matches_expected(self) -> bool:
        return self.verdicts == self.expected and all(self.checks.values())

    @property
    def all_certified(self) -> bool:
        return all(all(v.values()) for v in self.verdicts.values())

    def matrix(self) -> list[list[bool]]:
        """Rows in fixture order, columns closure, stability, capacity, invariance."""
        return [[self.verdicts[name][k] for k in VERDICT_KEYS] for name in self.verdicts]

    def to_dict(self) -> dict:
        return {
            "suite": self.name,
            "columns": list(VERDICT_KEYS),
            "verdicts": self.verdicts,
            "expected": self.expected,
            "matches_expected": self.matches_expected,
            "checks": self.checks,
            "extra": jsonable(self.extra),
            "reports": {name: [r.to_dict() for r in reps] for name, reps in self.reports.items()},
        }


def minimality_suite(seed: int = 0, n_probe: int = 1000, n_mc: int = 1000, workers: int = 1) -> SuiteResult:
    """Each counterexample fails exactly its own obligation."""
    verdicts, expected, reports = {}, {}, {}
    for name in MINIMALITY_FIXTURES:
        entry = get_fixture(name)
        verdicts[name], reports[name] = run_fixture(entry, seed, n_probe, n_mc, workers)
        expected[name] = dict(entry.expected)
    result = SuiteResult("minimality", verdicts, expected, reports)
    log.info("suite=minimality matches_expected=%s", result.matches_expected)
    return result


def strict_inclusion_suite(seed: int = 0, per_axis: int = 100) -> SuiteResult:
    """
    K = 2 instance certified under SMGI while no single evaluator on the grid
    reproduces both orderings; the K = 1 classical embedding passes all four.
    """
    entry = get_fixture("strict_inclusion")
    eq = check_core_equivalence(entry.extras["risk_matrix"], hypotheses=entry.extras["hypotheses"],
                                per_axis=per_axis)
    verdicts, expected, reports = {}, {}, {}
    for name in ("strict_inclusion", "classical_embedding"):
        fx = get_fixture(name)
        verdicts[name], reports[name] = run_fixture(fx, seed)
        expected[name] = dict(fx.expected)
    reports["core_equivalence"] = [eq]
    checks = {
        "no_single_evaluator": not eq.passed,
        "impossibility_flagged": bool(eq.flags.get("impossibility")),
    }
    result = SuiteResult("strict_inclusion", verdicts, expected, reports, checks,
                         {"grid_candidates": eq.evidence["n_candidates"], "grid_matches": eq.evidence["n_matches"]})
    log.info("suite=strict_inclusion candidates=%d matches=%d", int(eq.evidence["n_candidates"]),
             int(eq.evidence["n_matches"]))
    return result


def tooluse_update(divergence: str = "squared_euclidean") -> dict[str, tuple[RegimeWeights, CertificateReport]]:
    """Certified update of every candidate weight vector of the tool-use fixture."""
    entry = get_fixture("two_regime_tooluse")
    out = {}
    for name, cand in entry.extras["candidates"].items():
        out[name] = cert_update(entry.core, entry.model.evaluators, RegimeWeights(tuple(cand)), divergence,
                                entry.extras["admissible_set"])
    return out


def tooluse_suite(seed: int = 0, divergence: str = "squared_euclidean") -> SuiteResult:
    entry = get_fixture("two_regime_tooluse")
    verdicts, bundles = run_fixture(entry, seed)
    want: Mapping[str, tuple] = entry.extras["expected_projection"]
    reports = {"two_regime_tooluse": bundles}
    checks, projections = {}, {}
    for name, (w, rep) in tooluse_update(divergence).items():
        projections[name] = list(w.weights)
        checks[f"projection.{name}"] = bool(np.allclose(w.weights, want[name], atol=PROJECTION_TOL))
        checks[f"admissible.{name}"] = rep.passed
        reports[f"update.{name}"] = [rep]
    log.info("suite=tooluse projections=%s", projections)
    return SuiteResult("tooluse", {"two_regime_tooluse": verdicts}, {"two_regime_tooluse": dict(entry.expected)},
                       reports, checks, {"projections": projections})


def run_suite(name: str, seed: int = 0, workers: int = 1, per_axis: int = 100,
              divergence: str = "squared_euclidean") -> SuiteResult:
    if name == "minimality":
        return minimality_suite(seed, workers=workers)
    if name == "strict_inclusion":
        return strict_inclusion_suite(seed, per_axis)
    if name == "tooluse":
        return tooluse_suite(seed, divergence)
    raise ValueError(f"unknown suite {name!r}; known: {', '.join(SUITES)}")
