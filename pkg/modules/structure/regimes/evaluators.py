"""
Evaluator family L = {l_k}, regime weights on the K-simplex, switching operator
sigma(. | c, s) and the salience-weighted active loss.

Regime indices are 1-based at every public surface.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Optional, Sequence, Union

import numpy as np

from lib.rng import sample_index

SIMPLEX_TOL = 1e-12
DEFAULT_CONTEXT = "*"


def label_of(z: Any) -> str:
    """Lookup key of an observation in evaluator tables."""
    return str(z)


@dataclass(frozen=True)
class RegimeWeights:
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        w = tuple(float(x) for x in self.weights)
        if not w:
            raise ValueError("regime weights need at least one entry")
        if any(x < 0 for x in w):
            raise ValueError(f"regime weights must be nonnegative: {w}")
        if abs(sum(w) - 1.0) > SIMPLEX_TOL:
            raise ValueError(f"regime weights must sum to 1 (got {sum(w)!r})")
        object.__setattr__(self, "weights", w)

    @property
    def K(self) -> int:
        return len(self.weights)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)

    @classmethod
    def one_hot(cls, k: int, K: int) -> "RegimeWeights":
        if not 1 <= k <= K:
            raise ValueError(f"regime {k} outside 1..{K}")
        return cls(tuple(1.0 if i == k - 1 else 0.0 for i in range(K)))

    @classmethod
    def uniform(cls, K: int) -> "RegimeWeights":
        w = [1.0 / K] * K
        w[-1] = 1.0 - sum(w[:-1])
        return cls(tuple(w))

    @classmethod
    def from_array(cls, arr: Sequence[float]) -> "RegimeWeights":
        """Clip round-off negatives and renormalize before validating."""
        a = np.clip(np.asarray(arr, dtype=float), 0.0, None)
        a = a / a.sum()
        return cls(tuple(float(x) for x in a))

    def to_dict(self) -> list:
        return list(self.weights)


@dataclass(frozen=True)
class Evaluator:
    """Loss table l(h, s, z) in [0, 1] keyed by hypothesis then observation label ('*' = any)."""

    name: str
    losses: Mapping[str, Mapping[str, float]] = field(default_factory=dict)
    default: float = 0.0
    fn: Optional[Callable[[str, Any, Any], float]] = None

    def __post_init__(self) -> None:
        values = [self.default] + [v for row in self.losses.values() for v in row.values()]
        bad = [v for v in values if not 0.0 <= float(v) <= 1.0]
        if bad:
            raise ValueError(f"evaluator {self.name!r}: losses outside [0,1]: {bad[:3]}")

    def __call__(self, h: str, s: Any, z: Any) -> float:
        if self.fn is not None:
            return float(self.fn(h, s, z))
        row = self.losses.get(h)
        if row is None:
            return float(self.default)
        key = label_of(z)
        if key in row:
            return float(row[key])
        return float(row.get(DEFAULT_CONTEXT, self.default))

    @classmethod
    def constant_rows(cls, name: str, risks: Mapping[str, float]) -> "Evaluator":
        """Observation-independent evaluator: l(h, s, z) = risks[h]."""
        return cls(name, {h: {DEFAULT_CONTEXT: float(r)} for h, r in risks.items()})

    def to_dict(self) -> dict:
        if self.fn is not None:
            raise ValueError(f"evaluator {self.name!r} is callable-backed and has no declarative form")
        return {
            "name": self.name,
            "default": float(self.default),
            "losses": {h: {z: float(v) for z, v in sorted(row.items())} for h, row in sorted(self.losses.items())},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Evaluator":
        return cls(
            name=str(data["name"]),
            losses={str(h): {str(z): float(v) for z, v in row.items()} for h, row in data.get("losses", {}).items()},
            default=float(data.get("default", 0.0)),
        )


@dataclass(frozen=True)
class EvaluatorFamily:
    evaluators: tuple[Evaluator, ...]
    protected_core: Any = None  # ProtectedCore (core.py)
    mixing: Optional[Mapping[str, RegimeWeights]] = None  # context -> weights; '*' default

    def __post_init__(self) -> None:
        if len(self.evaluators) < 1:
            raise ValueError("evaluator family needs K >= 1")
        for ctx, w in (self.mixing or {}).items():
            if w.K != self.K:
                raise ValueError(f"mixing for context {ctx!r} has {w.K} weights, family has K={self.K}")

    @property
    def K(self) -> int:
        return len(self.evaluators)

    def weights_for(self, context: Any = None) -> RegimeWeights:
        """Active mixture for context: declared mixing, then the '*' rule, then delta_1."""
        mixing = self.mixing or {}
        if context is not None and context in mixing:
            return mixing[context]
        if DEFAULT_CONTEXT in mixing:
            return mixing[DEFAULT_CONTEXT]
        return RegimeWeights.one_hot(1, self.K)

    def component_losses(self, h: str, s: Any, z: Any) -> np.ndarray:
        return np.array([ev(h, s, z) for ev in self.evaluators], dtype=float)

    def with_mixing(self, mixing: Optional[Mapping[str, RegimeWeights]]) -> "EvaluatorFamily":
        return EvaluatorFamily(self.evaluators, self.protected_core, mixing)

    def to_dict(self) -> dict:
        return {
            "evaluators": [ev.to_dict() for ev in self.evaluators],
            "protected_core": self.protected_core.to_dict() if self.protected_core is not None else None,
            "mixing": {c: w.to_dict() for c, w in sorted((self.mixing or {}).items())},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EvaluatorFamily":
        from .core import ProtectedCore

        core = data.get("protected_core")
        mixing = data.get("mixing") or {}
        return cls(
            evaluators=tuple(Evaluator.from_dict(e) for e in data["evaluators"]),
            protected_core=ProtectedCore.from_dict(core) if core else None,
            mixing={str(c): RegimeWeights(tuple(w)) for c, w in mixing.items()} or None,
        )


Salience = Union[None, float, Callable[[Any], float]]


def active_loss(
    fam: EvaluatorFamily,
    w: RegimeWeights,
    h: str,
    s: Any,
    z: Any,
    salience: Salience = None,
) -> float:
    """l_t = sigma_t(z) * sum_k lambda_k l_k(h, s, z); salience defaults to 1."""
    if w.K != fam.K:
        raise ValueError(f"weights have K={w.K}, family has K={fam.K}")
    if salience is None:
        sal = 1.0
    elif callable(salience):
        sal = float(salience(z))
    else:
        sal = float(salience)
    if sal < 0:
        raise ValueError("salience must be nonnegative")
    if sal == 0.0:
        return 0.0
    return sal * float(np.dot(w.as_array(), fam.component_losses(h, s, z)))


@dataclass(frozen=True)
class SwitchingOperator:
    """sigma: (context, state) -> distribution over regimes 1..K."""

    K: int
    rule: Callable[[Any, Any], Sequence[float]]
    name: str = "custom"
    spec: Optional[dict] = None

    def distribution(self, c: Any, s: Any) -> np.ndarray:
        p = np.asarray(self.rule(c, s), dtype=float)
        if p.shape != (self.K,):
            raise ValueError(f"switching operator {self.name!r} returned shape {p.shape}, expected ({self.K},)")
        if np.any(p < 0) or abs(p.sum() - 1.0) > SIMPLEX_TOL:
            raise ValueError(f"switching operator {self.name!r} returned a non-distribution {p.tolist()}")
        return p

    @classmethod
    def dirac(cls, k: int, K: int) -> "SwitchingOperator":
        p = RegimeWeights.one_hot(k, K).weights
        return cls(K, lambda c, s: p, name=f"dirac_{k}", spec={"kind": "dirac", "regime": k, "K": K})

    @classmethod
    def uniform(cls, K: int) -> "SwitchingOperator":
        p = RegimeWeights.uniform(K).weights
        return cls(K, lambda c, s: p, name="uniform", spec={"kind": "uniform", "K": K})

    @classmethod
    def context_table(cls, table: Mapping[str, Sequence[float]], K: int,
                      default: Optional[Sequence[float]] = None) -> "SwitchingOperator":
        rows = {str(c): RegimeWeights(tuple(p)).weights for c, p in table.items()}
        fallback = RegimeWeights(tuple(default)).weights if default is not None else None

        def rule(c, s):
            if c in rows:
                return rows[c]
            if fallback is None:
                raise KeyError(f"switching table has no row for context {c!r}")
            return fallback

        spec = {"kind": "context_table", "K": K, "table": {c: list(p) for c, p in sorted(rows.items())},
                "default": list(fallback) if fallback is not None else None}
        return cls(K, rule, name="context_table", spec=spec)

    def to_dict(self) -> dict:
        if self.spec is None:
            raise ValueError(f"switching operator {self.name!r} has no declarative form")
        return dict(self.spec)

    @classmethod
    def from_dict(cls, data: dict) -> "SwitchingOperator":
        kind = data["kind"]
        if kind == "dirac":
            return cls.dirac(int(data.get("regime", 1)), int(data["K"]))
        if kind == "uniform":
            return cls.uniform(int(data["K"]))
        if kind == "context_table":
            return cls.context_table(data["table"], int(data["K"]), data.get("default"))
        raise ValueError(f"unknown switching operator kind {kind!r}")


def select_regime(op: SwitchingOperator, c: Any, s: Any, rng: np.random.Generator) -> int:
    """k_t ~ sigma(. | c_t, s_t); returns a 1-based regime index."""
    return 1 + sample_index(rng, op.distribution(c, s))
