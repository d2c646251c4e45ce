"""
Growth axes: a monotone sequence of environment families obtained by raising
the adversarial context's frequency or by antagonizing its risk ordering.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Optional

from lib.rng import make_rng
from modules.structure.metamodel import Environment, EnvironmentFamily

log = logging.getLogger("smgi.protocol")

AXIS_KINDS = ("regime_switch_frequency", "evaluator_antagonism")


@dataclass(frozen=True)
class GrowthAxis:
    kind: str
    levels: tuple[float, ...]
    adversarial_context: str = "adversarial"
    reference_context: str = "benign"

    def __post_init__(self) -> None:
        if self.kind not in AXIS_KINDS:
            raise ValueError(f"growth axis kind must be one of {AXIS_KINDS}")
        levels = tuple(float(x) for x in self.levels)
        if not levels:
            raise ValueError("growth axis needs at least one level")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ValueError("growth levels must be strictly increasing")
        if levels[0] < 0.0 or levels[-1] > 1.0:
            raise ValueError("growth levels must lie in [0, 1]")
        if self.adversarial_context == self.reference_context:
            raise ValueError("adversarial and reference contexts must differ")
        object.__setattr__(self, "levels", levels)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "levels": list(self.levels),
                "adversarial_context": self.adversarial_context, "reference_context": self.reference_context}

    @classmethod
    def from_dict(cls, data: dict) -> "GrowthAxis":
        return cls(str(data["kind"]), tuple(data["levels"]),
                   str(data.get("adversarial_context", "adversarial")),
                   str(data.get("reference_context", "benign")))


def _more_frequent(e: Environment, level: float, axis: GrowthAxis) -> Environment:
    """Mix the context law with a point mass on the adversarial context."""
    old = dict(e.context_probs) if e.context_probs is not None else {axis.reference_context: 1.0}
    new = {c: (1.0 - level) * p for c, p in old.items()}
    new[axis.adversarial_context] = new.get(axis.adversarial_context, 0.0) + level
    return replace(e, context_schedule=None, context_probs=new)


def antagonistic_row(base_adversarial: tuple[float, ...], reference: tuple[float, ...],
                     level: float) -> tuple[float, ...]:
    """(1 - a) base + a (1 - reference): a = 1 fully reverses the reference ordering."""
    return tuple((1.0 - level) * x + level * (1.0 - r) for x, r in zip(base_adversarial, reference))


def family_at_level(base: EnvironmentFamily, axis: GrowthAxis, level: float) -> EnvironmentFamily:
    """Family at one growth level; level 0 returns base unchanged."""
    if not 0.0 <= level <= 1.0:
        raise ValueError("growth level must lie in [0, 1]")
    if level == 0.0:
        return base
    if axis.kind == "regime_switch_frequency":
        return replace(base, instances=tuple(_more_frequent(e, level, axis) for e in base.instances))
    risks = base.regime_risks
    if not risks or axis.reference_context not in risks:
        raise ValueError(f"evaluator antagonism needs a regime risk row for {axis.reference_context!r}")
    ref = risks[axis.reference_context]
    rows = dict(risks)
    rows[axis.adversarial_context] = antagonistic_row(risks.get(axis.adversarial_context, ref), ref, level)
    return replace(base, regime_risks=rows)


def grow_family(base: EnvironmentFamily, axis: GrowthAxis) -> list[EnvironmentFamily]:
    """One family per axis level; a level of 0 reproduces base exactly."""
    return [family_at_level(base, axis, m) for m in axis.levels]


def adversarial_frequency(family: EnvironmentFamily, axis: GrowthAxis, n_draws: int = 100_000,
                          seed: int = 0, env_index: int = 0) -> float:
    """Empirical frequency of the adversarial context over n_draws context draws."""
    env = family.instances[env_index]
    rng = make_rng(seed)
    hits = sum(env.context_at(t, None, rng) == axis.adversarial_context for t in range(n_draws))
    return hits / n_draws


def active_contexts(family: EnvironmentFamily, axis: Optional[GrowthAxis] = None) -> tuple[str, ...]:
    """Contexts with positive probability in some instance; reference first when an axis is given."""
    seen = sorted({c for e in family.instances for c in e.contexts()})
    if axis is None:
        return tuple(seen)
    head = [c for c in (axis.reference_context, axis.adversarial_context) if c in seen]
    return tuple(head + [c for c in seen if c not in head])


def risk_rows(family: EnvironmentFamily, axis: GrowthAxis) -> dict[str, tuple[float, ...]]:
    """Regime risk row per axis context (reference, adversarial); a missing adversarial row copies the reference."""
    risks = family.regime_risks
    if not risks or axis.reference_context not in risks:
        raise ValueError(f"protocol families need a regime risk row for {axis.reference_context!r}")
    ref = risks[axis.reference_context]
    return {axis.reference_context: ref, axis.adversarial_context: risks.get(axis.adversarial_context, ref)}
