"""
Environments, environment families and admissible transformations.

An Environment is a state-conditioned distribution over a finite observation
support plus a context mechanism (schedule or random draw). Distances between
environments are total variation or Wasserstein-1 on an ordered support,
averaged uniformly over conditioning keys.
"""

from __future__ import annotations

import logging
import numbers
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Optional, Sequence

import numpy as np
from scipy.stats import wasserstein_distance

from lib.errors import DomainMismatch
from lib.reports import CertificateReport
from lib.rng import sample_index
from modules.structure.regimes import RegimeWeights

log = logging.getLogger("smgi.metamodel")

METRIC_KINDS = ("total_variation", "wasserstein1_on_ordered_support")
ACTION_KINDS = ("identity", "mix", "shift", "replace", "context")
ANY_KEY = "*"
PROB_TOL = 1e-12
MAGNITUDE_TOL = 1e-12


def _check_distribution(probs: Sequence[float], n: int, where: str) -> tuple[float, ...]:
    p = tuple(float(x) for x in probs)
    if len(p) != n:
        raise ValueError(f"{where}: {len(p)} probabilities for a support of size {n}")
    if any(x < 0 for x in p) or abs(sum(p) - 1.0) > PROB_TOL:
        raise ValueError(f"{where}: not a distribution {p}")
    return p


def condition_key(s: Any) -> str:
    """Conditioning key of a state: its representation component, else the value itself."""
    if s is None:
        return ANY_KEY
    rep = getattr(s, "representation_state", s)
    return str(rep)


@dataclass(frozen=True)
class Environment:
    name: str
    support: tuple
    conditionals: Mapping[str, tuple[float, ...]]
    positions: Optional[tuple[float, ...]] = None
    context_schedule: Optional[tuple[str, ...]] = None
    context_probs: Optional[Mapping[str, float]] = None

    def __post_init__(self) -> None:
        support = tuple(self.support)
        if not support:
            raise ValueError(f"environment {self.name!r} has an empty support")
        if len({str(z) for z in support}) != len(support):
            raise ValueError(f"environment {self.name!r} has duplicate support labels")
        if not self.conditionals:
            raise ValueError(f"environment {self.name!r} declares no observation distribution")
        conds = {str(k): _check_distribution(p, len(support), f"environment {self.name!r} key {k!r}")
                 for k, p in self.conditionals.items()}
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "conditionals", conds)
        if self.positions is not None:
            pos = tuple(float(x) for x in self.positions)
            if len(pos) != len(support):
                raise ValueError(f"environment {self.name!r}: positions do not match the support")
            object.__setattr__(self, "positions", pos)
        if self.context_schedule is not None:
            if not self.context_schedule:
                raise ValueError(f"environment {self.name!r}: empty context schedule")
            object.__setattr__(self, "context_schedule", tuple(str(c) for c in self.context_schedule))
        if self.context_probs is not None:
            names = sorted(str(c) for c in self.context_probs)
            probs = _check_distribution([self.context_probs[c] for c in names], len(names),
                                        f"environment {self.name!r} context_probs")
            object.__setattr__(self, "context_probs", dict(zip(names, probs)))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(str(z) for z in self.support)

    def ordered_positions(self) -> Optional[np.ndarray]:
        """Declared positions, else numeric support values, else None."""
        if self.positions is not None:
            return np.asarray(self.positions, dtype=float)
        if all(isinstance(z, numbers.Real) and not isinstance(z, bool) for z in self.support):
            return np.asarray(self.support, dtype=float)
        return None

    def distribution(self, key: str = ANY_KEY) -> np.ndarray:
        if key in self.conditionals:
            return np.asarray(self.conditionals[key], dtype=float)
        if ANY_KEY in self.conditionals:
            return np.asarray(self.conditionals[ANY_KEY], dtype=float)
        raise KeyError(f"environment {self.name!r} has no distribution for key {key!r}")

    def support_at(self, s: Any) -> tuple:
        """Observations with positive probability under P(. | s)."""
        return tuple(z for z, p in zip(self.support, self.distribution(condition_key(s))) if p > 0)

    def sample(self, s: Any, rng: np.random.Generator) -> Any:
        """Draw one observation z ~ P(. | s)."""
        return self.support[sample_index(rng, self.distribution(condition_key(s)))]

    def context_at(self, t: int, s: Any, rng: np.random.Generator) -> str:
        """Context descriptor c_t: schedule entry, random draw, or the '*' context."""
        if self.context_schedule is not None:
            return self.context_schedule[t % len(self.context_schedule)]
        if self.context_probs is not None:
            names = list(self.context_probs)
            return names[sample_index(rng, [self.context_probs[c] for c in names])]
        return ANY_KEY

    def context_probability(self, context: str) -> float:
        if self.context_schedule is not None:
            return self.context_schedule.count(context) / len(self.context_schedule)
        if self.context_probs is not None:
            return float(self.context_probs.get(context, 0.0))
        return 1.0 if context == ANY_KEY else 0.0

    def contexts(self) -> tuple[str, ...]:
        if self.context_schedule is not None:
            return tuple(sorted(set(self.context_schedule)))
        if self.context_probs is not None:
            return tuple(c for c, p in self.context_probs.items() if p > 0)
        return (ANY_KEY,)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "support": list(self.support),
            "conditionals": {k: list(p) for k, p in sorted(self.conditionals.items())},
            "positions": list(self.positions) if self.positions is not None else None,
            "context_schedule": list(self.context_schedule) if self.context_schedule is not None else None,
            "context_probs": dict(self.context_probs) if self.context_probs is not None else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Environment":
        pos = data.get("positions")
        sched = data.get("context_schedule")
        cprobs = data.get("context_probs")
        return cls(
            name=str(data["name"]),
            support=tuple(data["support"]),
            conditionals={str(k): tuple(p) for k, p in data["conditionals"].items()},
            positions=tuple(pos) if pos is not None else None,
            context_schedule=tuple(sched) if sched is not None else None,
            context_probs=dict(cprobs) if cprobs is not None else None,
        )


@dataclass(frozen=True)
class EnvironmentFamily:
    instances: tuple[Environment, ...]
    metric_kind: str = "total_variation"
    # context -> risk row over the hypothesis class members (regime risk matrix)
    regime_risks: Optional[Mapping[str, tuple[float, ...]]] = None

    def __post_init__(self) -> None:
        if self.metric_kind not in METRIC_KINDS:
            raise ValueError(f"metric_kind must be one of {METRIC_KINDS}")
        if not self.instances:
            raise ValueError("environment family needs at least one instance")
        names = [e.name for e in self.instances]
        if len(set(names)) != len(names):
            raise ValueError("environment names must be unique within a family")
        if self.regime_risks is not None:
            rows = {}
            for c, row in self.regime_risks.items():
                r = tuple(float(x) for x in row)
                if any(not 0.0 <= x <= 1.0 for x in r):
                    raise ValueError(f"regime risks for context {c!r} must lie in [0, 1]")
                rows[str(c)] = r
            widths = {len(r) for r in rows.values()}
            if len(widths) > 1:
                raise ValueError("regime risk rows must share one hypothesis count")
            object.__setattr__(self, "regime_risks", dict(sorted(rows.items())))

    def support_at(self, s: Any) -> tuple:
        """Union over instances of the observations reachable from s, in first-seen order."""
        seen: dict[str, Any] = {}
        for e in self.instances:
            for z in e.support_at(s):
                seen.setdefault(str(z), z)
        return tuple(seen.values())

    def instance(self, name: str) -> Environment:
        for e in self.instances:
            if e.name == name:
                return e
        raise KeyError(f"no environment named {name!r}")

    def to_dict(self) -> dict:
        return {
            "instances": [e.to_dict() for e in self.instances],
            "metric_kind": self.metric_kind,
            "regime_risks": {c: list(r) for c, r in self.regime_risks.items()}
            if self.regime_risks is not None else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EnvironmentFamily":
        risks = data.get("regime_risks")
        return cls(
            instances=tuple(Environment.from_dict(e) for e in data["instances"]),
            metric_kind=data.get("metric_kind", "total_variation"),
            regime_risks={str(c): tuple(r) for c, r in risks.items()} if risks is not None else None,
        )


def _tv(a: Environment, pa: np.ndarray, b: Environment, pb: np.ndarray) -> float:
    mass: dict[str, float] = {}
    for lab, p in zip(a.labels, pa):
        mass[lab] = mass.get(lab, 0.0) + float(p)
    for lab, p in zip(b.labels, pb):
        mass[lab] = mass.get(lab, 0.0) - float(p)
    return 0.5 * sum(abs(v) for v in mass.values())


def _w1_positions(a: Environment, b: Environment) -> tuple[np.ndarray, np.ndarray]:
    pos_a, pos_b = a.ordered_positions(), b.ordered_positions()
    if pos_a is not None and pos_b is not None:
        return pos_a, pos_b
    if a.labels == b.labels:
        idx = np.arange(len(a.labels), dtype=float)
        return idx, idx
    raise DomainMismatch(
        f"environments {a.name!r} and {b.name!r} have different supports and no declared order"
    )


def env_distance(a: Environment, b: Environment, metric_kind: str = "total_variation") -> float:
    """
    D_E(a, b): TV (half L1) or Wasserstein-1 on the ordered support, averaged
    uniformly over the union of conditioning keys.

    Args:
        a, b: environments over a shared observation domain.
        metric_kind: 'total_variation' or 'wasserstein1_on_ordered_support'.

    Returns:
        Nonnegative distance; in [0, 1] for total variation.
    """
    if metric_kind not in METRIC_KINDS:
        raise ValueError(f"metric_kind must be one of {METRIC_KINDS}")
    keys = sorted(set(a.conditionals) | set(b.conditionals))
    if metric_kind == "wasserstein1_on_ordered_support":
        pos_a, pos_b = _w1_positions(a, b)
    total = 0.0
    for key in keys:
        pa, pb = a.distribution(key), b.distribution(key)
        if metric_kind == "total_variation":
            total += _tv(a, pa, b, pb)
        else:
            total += float(wasserstein_distance(pos_a, pos_b, u_weights=pa, v_weights=pb))
    return total / len(keys)


def _action_env(e: Environment, action: Mapping[str, Any]) -> Environment:
    kind = action.get("kind", "identity")
    if kind == "identity":
        return e
    if kind == "mix":
        target = np.asarray(action["target"], dtype=float)
        w = float(action["weight"])
        if not 0.0 <= w <= 1.0:
            raise ValueError("mix weight must lie in [0, 1]")
        conds = {k: tuple((1.0 - w) * np.asarray(p) + w * target) for k, p in e.conditionals.items()}
        return replace(e, conditionals=conds)
    if kind == "shift":
        pos = e.ordered_positions()
        if pos is None:
            raise DomainMismatch(f"cannot shift environment {e.name!r}: support has no order")
        delta = float(action["delta"])
        return replace(e, positions=tuple(float(x) for x in pos + delta))
    if kind == "replace":
        conds = {str(k): tuple(p) for k, p in action["conditionals"].items()}
        return replace(e, conditionals=conds)
    if kind == "context":
        return replace(e, context_schedule=None, context_probs=dict(action["context_probs"]))
    raise ValueError(f"unknown transform action kind {kind!r}")


@dataclass(frozen=True)
class TransformSpec:
    """
    Admissible transformation tau: a declared action on every environment in
    a family, a magnitude bound epsilon_max under D_E, and an optional evaluator
    action (the regime weights that replace the active mixing after tau).
    """

    identifier: str
    action_spec: Mapping[str, Any] = field(default_factory=lambda: {"kind": "identity"})
    epsilon_max: float = 0.0
    evaluator_action: Any = None  # RegimeWeights

    def __post_init__(self) -> None:
        if self.epsilon_max < 0:
            raise ValueError("epsilon_max must be nonnegative")
        if self.action_spec.get("kind", "identity") not in ACTION_KINDS:
            raise ValueError(f"transform action kind must be one of {ACTION_KINDS}")

    @property
    def is_identity(self) -> bool:
        return self.action_spec.get("kind", "identity") == "identity" and self.evaluator_action is None

    def apply_env(self, e: Environment) -> Environment:
        return _action_env(e, self.action_spec)

    def apply(self, fam: EnvironmentFamily) -> EnvironmentFamily:
        return replace(fam, instances=tuple(self.apply_env(e) for e in fam.instances))

    def to_dict(self) -> dict:
        return {
            "identifier": self.identifier,
            "action": dict(self.action_spec),
            "epsilon_max": float(self.epsilon_max),
            "evaluator_action": self.evaluator_action.to_dict() if self.evaluator_action is not None else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TransformSpec":
        ev = data.get("evaluator_action")
        return cls(
            identifier=str(data["identifier"]),
            action_spec=dict(data.get("action") or {"kind": "identity"}),
            epsilon_max=float(data.get("epsilon_max", 0.0)),
            evaluator_action=RegimeWeights(tuple(ev)) if ev is not None else None,
        )


def identity_transform(epsilon_max: float = 0.0) -> TransformSpec:
    return TransformSpec("identity", {"kind": "identity"}, epsilon_max)


def check_transform_magnitude(t: TransformSpec, fam: EnvironmentFamily) -> CertificateReport:
    """(U2): max over instances of D_E(e, tau(e)) against epsilon_max."""
    achieved, worst = 0.0, None
    per_instance = {}
    for e in fam.instances:
        d = env_distance(e, t.apply_env(e), fam.metric_kind)
        per_instance[e.name] = d
        if d > achieved:
            achieved, worst = d, e.name
    passed = achieved <= t.epsilon_max + MAGNITUDE_TOL
    log.debug("transform=%s achieved=%.6g epsilon_max=%.6g pass=%s", t.identifier, achieved, t.epsilon_max, passed)
    witnesses = () if passed else ({"transform": t.identifier, "environment": worst, "distance": achieved},)
    return CertificateReport(
        obligation="transform_magnitude",
        passed=passed,
        evidence={"achieved": achieved, "epsilon_max": float(t.epsilon_max),
                  **{f"distance.{k}": v for k, v in per_instance.items()}},
        witnesses=witnesses,
        notes=(f"transform={t.identifier}", f"metric={fam.metric_kind}"),
    )
