"""
Protected evaluative core: threshold and pairwise-ordering constraints checked
on an audited set, the invariance check across transforms, and the
single-evaluator equivalence check behind strict structural inclusion.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Any, Iterable, Optional, Sequence, Union

import numpy as np

from lib.reports import CertificateReport

from .evaluators import DEFAULT_CONTEXT, EvaluatorFamily, RegimeWeights, active_loss

log = logging.getLogger("smgi.regimes")

MARGIN_TOL = 1e-12


@dataclass(frozen=True)
class AuditCase:
    state: Any = None
    observation: Any = None
    context: str = DEFAULT_CONTEXT
    weight: float = 1.0

    def to_dict(self) -> dict:
        state = self.state.to_dict() if hasattr(self.state, "to_dict") else self.state
        return {"state": state, "observation": self.observation, "context": self.context,
                "weight": float(self.weight)}

    @classmethod
    def from_dict(cls, data: dict) -> "AuditCase":
        state = data.get("state")
        if isinstance(state, dict):
            from modules.structure.dynamics import State
            state = State.from_dict(state)
        return cls(state, data.get("observation"), str(data.get("context", DEFAULT_CONTEXT)),
                   float(data.get("weight", 1.0)))


@dataclass(frozen=True)
class ThresholdConstraint:
    """Audited risk of hypothesis stays at or below threshold."""

    name: str
    hypothesis: str
    threshold: float
    evaluator: Optional[int] = None  # 1-based component; None = active mixture
    context: Optional[str] = None  # restrict audit cases (and mixing) to this context

    def to_dict(self) -> dict:
        return {"kind": "threshold", "name": self.name, "hypothesis": self.hypothesis,
                "threshold": float(self.threshold), "evaluator": self.evaluator, "context": self.context}


@dataclass(frozen=True)
class OrderingConstraint:
    """Audited risk of `lower` stays strictly below that of `higher`."""

    name: str
    lower: str
    higher: str
    context: Optional[str] = None
    margin: float = 0.0

    def to_dict(self) -> dict:
        return {"kind": "ordering", "name": self.name, "lower": self.lower, "higher": self.higher,
                "context": self.context, "margin": float(self.margin)}


Constraint = Union[ThresholdConstraint, OrderingConstraint]


def constraint_from_dict(data: dict) -> Constraint:
    kind = data.get("kind")
    if kind == "threshold":
        ev = data.get("evaluator")
        return ThresholdConstraint(str(data["name"]), str(data["hypothesis"]), float(data["threshold"]),
                                   int(ev) if ev is not None else None, data.get("context"))
    if kind == "ordering":
        return OrderingConstraint(str(data["name"]), str(data["lower"]), str(data["higher"]),
                                  data.get("context"), float(data.get("margin", 0.0)))
    raise ValueError(f"unknown core constraint kind {kind!r}")


@dataclass(frozen=True)
class WeightConstraint:
    """Linear constraint coeffs . lambda (>= or <=) bound on regime weights."""

    coeffs: tuple[float, ...]
    bound: float
    sense: str = ">="
    name: str = ""

    def __post_init__(self) -> None:
        if self.sense not in (">=", "<="):
            raise ValueError(f"sense must be '>=' or '<=' (got {self.sense!r})")
        object.__setattr__(self, "coeffs", tuple(float(a) for a in self.coeffs))

    def slack(self, w: Sequence[float]) -> float:
        """Nonnegative iff the constraint holds."""
        v = float(np.dot(self.coeffs, np.asarray(w, dtype=float)))
        return v - self.bound if self.sense == ">=" else self.bound - v

    def holds(self, w: Sequence[float], tol: float = 1e-9) -> bool:
        return self.slack(w) >= -tol

    def as_leq(self) -> tuple[np.ndarray, float]:
        """Row (g, h) with g . lambda <= h."""
        g = np.asarray(self.coeffs, dtype=float)
        return (-g, -self.bound) if self.sense == ">=" else (g, self.bound)

    @classmethod
    def floor(cls, k: int, value: float, K: int, name: str = "") -> "WeightConstraint":
        """lambda_k >= value (1-based k)."""
        coeffs = tuple(1.0 if i == k - 1 else 0.0 for i in range(K))
        return cls(coeffs, float(value), ">=", name or f"lambda_{k}>={value}")

    def to_dict(self) -> dict:
        return {"coeffs": list(self.coeffs), "bound": float(self.bound), "sense": self.sense, "name": self.name}

    @classmethod
    def from_dict(cls, data: dict) -> "WeightConstraint":
        return cls(tuple(data["coeffs"]), float(data["bound"]), data.get("sense", ">="), data.get("name", ""))


@dataclass(frozen=True)
class ProtectedCore:
    constraints: tuple = ()
    audit_set: tuple[AuditCase, ...] = ()

    def __post_init__(self) -> None:
        if self.constraints and not self.audit_set:
            raise ValueError("a protected core with constraints needs a non-empty audit set")

    def _cases(self, context: Optional[str]) -> list[AuditCase]:
        if context is None:
            return list(self.audit_set)
        return [c for c in self.audit_set if c.context == context]

    def audit_risk(self, fam: EvaluatorFamily, h: str, context: Optional[str] = None,
                   evaluator: Optional[int] = None, weights: Optional[RegimeWeights] = None) -> float:
        """Weighted mean loss of h over the audit cases of context."""
        cases = self._cases(context)
        if not cases:
            raise ValueError(f"audit set has no cases for context {context!r}")
        total, mass = 0.0, 0.0
        for case in cases:
            if evaluator is not None:
                loss = fam.evaluators[evaluator - 1](h, case.state, case.observation)
            else:
                w = weights if weights is not None else fam.weights_for(case.context)
                loss = active_loss(fam, w, h, case.state, case.observation)
            total += case.weight * loss
            mass += case.weight
        return total / mass

    def margin(self, constraint: Constraint, fam: EvaluatorFamily,
               weights: Optional[RegimeWeights] = None) -> float:
        """Nonnegative (threshold) or positive (ordering) margin means the constraint holds."""
        if isinstance(constraint, ThresholdConstraint):
            risk = self.audit_risk(fam, constraint.hypothesis, constraint.context, constraint.evaluator, weights)
            return constraint.threshold - risk
        lo = self.audit_risk(fam, constraint.lower, constraint.context, None, weights)
        hi = self.audit_risk(fam, constraint.higher, constraint.context, None, weights)
        return hi - lo - constraint.margin

    @staticmethod
    def holds(constraint: Constraint, margin: float) -> bool:
        if isinstance(constraint, ThresholdConstraint):
            return margin >= -MARGIN_TOL
        return margin > MARGIN_TOL

    def linearize(self, fam: EvaluatorFamily, min_gap: float = 1e-9) -> list[WeightConstraint]:
        """Each core constraint as a linear constraint on the regime weights of its context."""
        K = fam.K
        basis = [RegimeWeights.one_hot(k, K) for k in range(1, K + 1)]
        rows = []
        for con in self.constraints:
            if isinstance(con, ThresholdConstraint):
                if con.evaluator is not None:
                    slack = self.margin(con, fam)
                    rows.append(WeightConstraint(tuple([0.0] * K), slack, "<=", con.name))
                else:
                    coeffs = [self.audit_risk(fam, con.hypothesis, con.context, None, b) for b in basis]
                    rows.append(WeightConstraint(tuple(coeffs), con.threshold, "<=", con.name))
            else:
                coeffs = [
                    self.audit_risk(fam, con.higher, con.context, None, b)
                    - self.audit_risk(fam, con.lower, con.context, None, b)
                    for b in basis
                ]
                rows.append(WeightConstraint(tuple(coeffs), con.margin + min_gap, ">=", con.name))
        return rows

    def to_dict(self) -> dict:
        return {
            "constraints": [c.to_dict() for c in self.constraints],
            "audit_set": [c.to_dict() for c in self.audit_set],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ProtectedCore":
        return cls(
            tuple(constraint_from_dict(c) for c in data.get("constraints", ())),
            tuple(AuditCase.from_dict(c) for c in data.get("audit_set", ())),
        )


def check_protected_core(core: ProtectedCore, fam: EvaluatorFamily,
                         weights: Optional[RegimeWeights] = None) -> CertificateReport:
    """
    Evaluate every core constraint on the audit set. weights, when given,
    replaces the family's mixing in every context (a swapped-in evaluator).
    """
    evidence, flags, witnesses = {}, {}, []
    for con in core.constraints:
        m = core.margin(con, fam, weights)
        ok = core.holds(con, m)
        evidence[f"margin.{con.name}"] = m
        flags[f"holds.{con.name}"] = ok
        if not ok:
            if isinstance(con, OrderingConstraint):
                witnesses.append({"constraint": con.name, "pair": [con.lower, con.higher], "context": con.context})
            else:
                witnesses.append({"constraint": con.name, "hypothesis": con.hypothesis, "context": con.context})
    passed = not witnesses
    log.debug("core constraints=%d pass=%s", len(core.constraints), passed)
    return CertificateReport(
        obligation="evaluative_invariance",
        passed=passed,
        evidence=evidence,
        flags=flags,
        witnesses=tuple(witnesses),
        notes=("audit-set predicate evaluation",),
    )


def check_evaluative_invariance(core: Optional[ProtectedCore], fam: EvaluatorFamily,
                                transforms: Iterable[Any] = ()) -> CertificateReport:
    """
    Core verdict before and after every transform's evaluator action; passes iff
    the core holds in all of them (so Pi_C is unchanged by each transform).
    """
    if core is None or not core.constraints:
        return CertificateReport(obligation="evaluative_invariance", passed=True,
                                 notes=("no protected core declared",))
    children = [check_protected_core(core, fam)]
    notes = ["child[0]=before"]
    for t in transforms:
        action = getattr(t, "evaluator_action", None)
        if action is None:
            continue
        children.append(check_protected_core(core, fam, weights=action))
        notes.append(f"child[{len(children) - 1}]=after:{getattr(t, 'identifier', '?')}")
    passed = all(c.passed for c in children)
    return CertificateReport(
        obligation="evaluative_invariance",
        passed=passed,
        children=tuple(children),
        evidence={"checked": float(len(children))},
        notes=tuple(notes),
    )


def grid_single_evaluators(H: int, per_axis: int = 100) -> np.ndarray:
    """All risk vectors on a per_axis^H grid over [0, 1]^H (one row per candidate)."""
    axis = np.linspace(0.0, 1.0, per_axis)
    mesh = np.meshgrid(*([axis] * H), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def check_core_equivalence(risk_matrix, candidate_single_evaluators=None,
                           hypotheses: Optional[Sequence[str]] = None,
                           per_axis: int = 100) -> CertificateReport:
    """
    Does some single evaluator reproduce the strict risk ordering of every
    regime row? Flags impossibility when two rows order a pair oppositely.
    """
    R = np.asarray(risk_matrix, dtype=float)
    if R.ndim != 2 or R.shape[1] < 2:
        raise ValueError("risk matrix must be K x H with H >= 2")
    if np.any(R < 0) or np.any(R > 1):
        raise ValueError("risk matrix entries must lie in [0, 1]")
    K, H = R.shape
    names = list(hypotheses) if hypotheses is not None else [f"h{i}" for i in range(H)]

    required = set()
    for k in range(K):
        for i, j in itertools.permutations(range(H), 2):
            if R[k, i] < R[k, j]:
                required.add((i, j))
    conflicts = sorted((i, j) for (i, j) in required if (j, i) in required and i < j)

    if candidate_single_evaluators is None:
        candidates = grid_single_evaluators(H, per_axis)
    else:
        candidates = np.asarray(candidate_single_evaluators, dtype=float).reshape(-1, H)
    candidates = np.vstack([R, candidates])
    match = np.ones(len(candidates), dtype=bool)
    for i, j in sorted(required):
        match &= candidates[:, i] < candidates[:, j]
    n_matches = int(match.sum())

    witnesses = []
    for i, j in conflicts:
        rows_ij = [k + 1 for k in range(K) if R[k, i] < R[k, j]]
        rows_ji = [k + 1 for k in range(K) if R[k, j] < R[k, i]]
        witnesses.append({"pair": [names[i], names[j]], "regimes_lower_first": rows_ij,
                          "regimes_higher_first": rows_ji})
    if n_matches:
        witnesses.append({"equivalent_evaluator": candidates[int(np.argmax(match))].tolist()})
    log.debug("core-equivalence K=%d H=%d candidates=%d matches=%d conflicts=%d",
              K, H, len(candidates), n_matches, len(conflicts))
    return CertificateReport(
        obligation="core_equivalence",
        passed=n_matches > 0,
        evidence={"n_candidates": float(len(candidates)), "n_matches": float(n_matches),
                  "n_conflicts": float(len(conflicts))},
        flags={"impossibility": bool(conflicts)},
        witnesses=tuple(witnesses),
    )
