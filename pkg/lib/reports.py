"""
Certificate reports: verdict plus numeric evidence for one obligation, or a
nested bundle of them. Reports serialize to JSON with stable field names so the
CLI can write, digest and re-read them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional

import numpy as np

OBLIGATIONS = (
    "closure",
    "stability",
    "capacity",
    "evaluative_invariance",
    "transform_magnitude",
    "evaluator_shift",
    "representation_lipschitz",
    "memory_nonexpansive",
    "core_equivalence",
    "bundle",
    "theorem_structural_closure",
)
MODES = ("exhaustive", "sampled")

# Two-sided 95% Hoeffding / rule-of-three constant: ln(1 / 0.05)
_LN_20 = math.log(20.0)


def zero_violation_radius(sample_count: int) -> float:
    """95% upper bound on the violation rate after sample_count clean samples."""
    return _LN_20 / max(int(sample_count), 1)


def hoeffding_radius(sample_count: int, value_range: float = 1.0, confidence: float = 0.95) -> float:
    """Two-sided Hoeffding radius for the mean of sample_count values in a range of width value_range."""
    n = max(int(sample_count), 1)
    return float(value_range) * math.sqrt(math.log(2.0 / (1.0 - confidence)) / (2.0 * n))


def _finite_or_tag(x: float) -> Any:
    if math.isfinite(x):
        return x
    return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")


def jsonable(value: Any) -> Any:
    """Convert witnesses and evidence into plain JSON values; non-finite floats become "inf", "-inf" or "nan"."""
    if hasattr(value, "to_dict") and callable(value.to_dict):
        return jsonable(value.to_dict())
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, frozenset, set)):
        items = [jsonable(v) for v in value]
        if isinstance(value, (frozenset, set)):
            items.sort(key=lambda v: json.dumps(v, sort_keys=True))
        return items
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return _finite_or_tag(float(value))
    return value


@dataclass(frozen=True)
class CertificateReport:
    obligation: str
    passed: bool
    mode: str = "exhaustive"
    evidence: dict[str, float] = field(default_factory=dict)
    witnesses: tuple = ()
    children: tuple["CertificateReport", ...] = ()
    flags: dict[str, bool] = field(default_factory=dict)
    notes: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.obligation not in OBLIGATIONS:
            raise ValueError(f"unknown obligation {self.obligation!r}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "sampled":
            missing = [k for k in ("sample_count", "confidence_radius") if k not in self.evidence]
            if missing:
                raise ValueError(f"sampled report for {self.obligation} lacks {missing}")

    @property
    def epistemic(self) -> str:
        """'proof' for exhaustive verdicts, 'evidence' for sampled ones (children included)."""
        if self.mode == "sampled" or any(c.epistemic == "evidence" for c in self.children):
            return "evidence"
        return "proof"

    def child(self, obligation: str) -> Optional["CertificateReport"]:
        for c in self.children:
            if c.obligation == obligation:
                return c
        return None

    def to_dict(self) -> dict[str, Any]:
        return {
            "obligation": self.obligation,
            "pass": bool(self.passed),
            "mode": self.mode,
            "epistemic": self.epistemic,
            "evidence": {k: _finite_or_tag(float(self.evidence[k])) for k in sorted(self.evidence)},
            "flags": {k: bool(self.flags[k]) for k in sorted(self.flags)},
            "witnesses": jsonable(list(self.witnesses)),
            "notes": list(self.notes),
            "children": [c.to_dict() for c in self.children],
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, allow_nan=False)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "CertificateReport":
        return cls(
            obligation=data["obligation"],
            passed=bool(data["pass"]),
            mode=data.get("mode", "exhaustive"),
            evidence={k: float(v) for k, v in (data.get("evidence") or {}).items()},
            witnesses=tuple(data.get("witnesses") or ()),
            children=tuple(cls.from_dict(c) for c in data.get("children") or ()),
            flags={k: bool(v) for k, v in (data.get("flags") or {}).items()},
            notes=tuple(data.get("notes") or ()),
        )


def all_passed(reports: Iterable[CertificateReport]) -> bool:
    return all(r.passed for r in reports)
