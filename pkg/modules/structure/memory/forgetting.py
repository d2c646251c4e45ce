"""
Memory library: memory state, update operator U and functional forgetting F.

Forgetting is constrained compression: keep the subset of items minimizing
    Loss(kept) + forget_lambda * bits(kept)
while retaining every protected item. Complexity is the summed per-item code
length, a computable stand-in for description length.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterable, Mapping, Optional, Sequence, Union

from lib.errors import ProtectedItemRemoved
from lib.reports import CertificateReport, zero_violation_radius

log = logging.getLogger("smgi.memory")

UPDATE_RULES = ("noop", "append", "duplicate")
MEMORY_METRICS = ("weighted_symmetric_difference",)
DEFAULT_EXACT_LIMIT = 20
TIE_TOL = 1e-12

LossMap = Callable[[frozenset], float]


@dataclass(frozen=True)
class MemoryItem:
    key: str
    payload: Any
    code_bits: float
    regime_tag: int = 1
    protected: bool = False
    protected_by: Optional[str] = None  # name of the core constraint that needs this item

    def __post_init__(self) -> None:
        if not self.code_bits > 0:
            raise ValueError(f"memory item {self.key!r}: code_bits must be positive")
        if self.protected and not self.protected_by:
            raise ValueError(f"protected memory item {self.key!r} must name its constraint")

    def to_dict(self) -> dict:
        return {
            "key": self.key,
            "payload": self.payload,
            "code_bits": float(self.code_bits),
            "regime_tag": int(self.regime_tag),
            "protected": bool(self.protected),
            "protected_by": self.protected_by,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MemoryItem":
        payload = data.get("payload")
        if isinstance(payload, list):
            payload = tuple(payload)
        return cls(
            key=str(data["key"]),
            payload=payload,
            code_bits=float(data["code_bits"]),
            regime_tag=int(data.get("regime_tag", 1)),
            protected=bool(data.get("protected", False)),
            protected_by=data.get("protected_by"),
        )


@dataclass(frozen=True)
class MemoryState:
    items: tuple[MemoryItem, ...] = ()

    def __post_init__(self) -> None:
        ordered = tuple(sorted(self.items, key=lambda it: it.key))
        keys = [it.key for it in ordered]
        if len(set(keys)) != len(keys):
            raise ValueError("memory keys must be unique")
        object.__setattr__(self, "items", ordered)

    @classmethod
    def empty(cls) -> "MemoryState":
        return cls(())

    @property
    def total_bits(self) -> float:
        return float(sum(it.code_bits for it in self.items))

    @property
    def keys(self) -> tuple[str, ...]:
        return tuple(it.key for it in self.items)

    @property
    def protected_keys(self) -> frozenset:
        return frozenset(it.key for it in self.items if it.protected)

    def get(self, key: str) -> Optional[MemoryItem]:
        for it in self.items:
            if it.key == key:
                return it
        return None

    def with_item(self, item: MemoryItem) -> "MemoryState":
        """Insert item; an existing key is replaced (set semantics on keys)."""
        kept = [it for it in self.items if it.key != item.key]
        return MemoryState(tuple(kept) + (item,))

    def restrict(self, keys: Iterable[str]) -> "MemoryState":
        keep = set(keys)
        return MemoryState(tuple(it for it in self.items if it.key in keep))

    def to_dict(self) -> list:
        return [it.to_dict() for it in self.items]

    @classmethod
    def from_dict(cls, data: Sequence[dict]) -> "MemoryState":
        return cls(tuple(MemoryItem.from_dict(d) for d in data or ()))


@dataclass(frozen=True)
class MemorySpec:
    update_rule: Union[str, Callable] = "noop"
    forget_lambda: float = 0.0
    metric: str = "weighted_symmetric_difference"
    item_bits: float = 1.0
    # (regime, constraint name): appended items seen in that regime are protected
    protect: tuple[tuple[int, str], ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if isinstance(self.update_rule, str) and self.update_rule not in UPDATE_RULES:
            raise ValueError(f"unknown memory update rule {self.update_rule!r}")
        if self.forget_lambda < 0:
            raise ValueError("forget_lambda must be nonnegative")
        if self.metric not in MEMORY_METRICS:
            raise ValueError(f"unknown memory metric {self.metric!r}")
        if not self.item_bits > 0:
            raise ValueError("item_bits must be positive")

    def to_dict(self) -> dict:
        if not isinstance(self.update_rule, str):
            raise ValueError("memory spec with a callable update rule has no declarative form")
        return {
            "update_rule": self.update_rule,
            "forget_lambda": float(self.forget_lambda),
            "metric": self.metric,
            "item_bits": float(self.item_bits),
            "protect": [[int(k), str(name)] for k, name in self.protect],
        }

    @classmethod
    def from_dict(cls, data: Optional[dict]) -> "MemorySpec":
        data = data or {}
        return cls(
            update_rule=data.get("update_rule", "noop"),
            forget_lambda=float(data.get("forget_lambda", 0.0)),
            metric=data.get("metric", "weighted_symmetric_difference"),
            item_bits=float(data.get("item_bits", 1.0)),
            protect=tuple((int(k), str(name)) for k, name in data.get("protect", ())),
        )


def memory_distance(spec: MemorySpec, a: MemoryState, b: MemoryState) -> float:
    """Code-length-weighted symmetric difference of the two item sets."""
    sa, sb = set(a.items), set(b.items)
    return float(sum(it.code_bits for it in sorted(sa ^ sb, key=lambda it: (it.key, str(it.payload)))))


def _apply_rule(spec: MemorySpec, m: MemoryState, z: Any, k: int) -> MemoryState:
    rule = spec.update_rule
    if callable(rule):
        return rule(m, z, k)
    if rule == "noop":
        return m
    if rule == "append":
        key = f"z:{z}"
        protected_by = dict(spec.protect).get(int(k))
        prev = m.get(key)
        if prev is not None and prev.protected:
            protected_by = prev.protected_by
        item = MemoryItem(
            key=key,
            payload=z,
            code_bits=prev.code_bits if prev is not None else spec.item_bits,
            regime_tag=int(k),
            protected=protected_by is not None,
            protected_by=protected_by,
        )
        return m.with_item(item)
    # duplicate: every item gets a primed copy
    copies = tuple(replace(it, key=it.key + "'") for it in m.items if m.get(it.key + "'") is None)
    return MemoryState(m.items + copies)


def update_memory(spec: MemorySpec, m: MemoryState, z: Any, k: int) -> MemoryState:
    """m_{t+1} = U(m_t, z_t, k_t); protected items must survive the update."""
    out = _apply_rule(spec, m, z, k)
    for key in m.protected_keys:
        kept = out.get(key)
        if kept is None or not kept.protected:
            raise ProtectedItemRemoved(f"update rule removed protected item {key!r}")
    return out


def additive_drop_loss(base: float, penalties: Mapping[str, float]) -> LossMap:
    """Loss map: base loss plus the penalty of every item not kept."""
    pen = dict(penalties)

    def loss(kept: frozenset) -> float:
        return float(base + sum(v for key, v in sorted(pen.items()) if key not in kept))

    return loss


def _resolve_loss(loss_given_memory, k: int, c: Any) -> LossMap:
    if callable(loss_given_memory):
        return loss_given_memory
    for key in (c, k, "*"):
        if key is not None and key in loss_given_memory:
            return loss_given_memory[key]
    raise KeyError(f"no loss map declared for context={c!r} regime={k!r}")


def _better(cand: tuple, best: Optional[tuple]) -> bool:
    """cand/best = (objective, bits, keys); lower objective, then fewer bits, then keys."""
    if best is None:
        return True
    if cand[0] < best[0] - TIE_TOL:
        return True
    if abs(cand[0] - best[0]) <= TIE_TOL:
        return (cand[1], cand[2]) < (best[1], best[2])
    return False


def forget_with_report(
    spec: MemorySpec,
    m: MemoryState,
    loss_given_memory,
    k: int = 1,
    c: Any = None,
    exact_limit: int = DEFAULT_EXACT_LIMIT,
) -> tuple[MemoryState, dict]:
    """
    F*(m) = argmin over kept subsets containing all protected items of
    loss(kept) + lambda * bits(kept). Exact enumeration up to exact_limit free
    items, backward-greedy elimination beyond (reported as mode 'greedy').
    """
    loss = _resolve_loss(loss_given_memory, k, c)
    lam = float(spec.forget_lambda)
    protected = [it for it in m.items if it.protected]
    free = [it for it in m.items if not it.protected]
    base_keys = [it.key for it in protected]
    base_bits = sum(it.code_bits for it in protected)

    def score(subset: Sequence[MemoryItem]) -> tuple:
        keys = tuple(sorted(base_keys + [it.key for it in subset]))
        bits = float(base_bits + sum(it.code_bits for it in subset))
        return (float(loss(frozenset(keys))) + lam * bits, bits, keys)

    evaluated = 0
    best = None
    if len(free) <= exact_limit:
        mode = "exact"
        for mask in itertools.product((False, True), repeat=len(free)):
            cand = score([it for it, keep in zip(free, mask) if keep])
            evaluated += 1
            if _better(cand, best):
                best = cand
    else:
        mode = "greedy"
        current = list(free)
        best = score(current)
        evaluated = 1
        while current:
            step_best, step_idx = None, None
            for i in range(len(current)):
                cand = score(current[:i] + current[i + 1:])
                evaluated += 1
                if _better(cand, step_best):
                    step_best, step_idx = cand, i
            if step_best is None or not step_best[0] < best[0] - TIE_TOL:
                break
            best = step_best
            current.pop(step_idx)
        log.info("forget mode=greedy items=%d evaluated=%d objective=%.6g", len(free), evaluated, best[0])

    out = m.restrict(best[2])
    report = {
        "mode": mode,
        "objective": best[0],
        "kept_bits": best[1],
        "evaluated": evaluated,
        "n_items": len(m.items),
    }
    log.debug("forget mode=%s kept=%s objective=%.6g", mode, list(best[2]), best[0])
    return out, report


def forget(spec: MemorySpec, m: MemoryState, loss_given_memory, k: int = 1, c: Any = None,
           exact_limit: int = DEFAULT_EXACT_LIMIT) -> MemoryState:
    """Functional forgetting F(m; k, c); see forget_with_report."""
    out, _ = forget_with_report(spec, m, loss_given_memory, k=k, c=c, exact_limit=exact_limit)
    return out


def check_nonexpansive(
    spec: MemorySpec,
    pairs: Sequence[tuple[MemoryState, MemoryState]],
    z_stream: Sequence[Any],
    k: int = 1,
    operator: Optional[Callable[[MemoryState, Any, int], MemoryState]] = None,
) -> CertificateReport:
    """
    Sampled check that d(U(m1,z,k), U(m2,z,k)) <= d(m1, m2) on every pair and
    observation. operator defaults to update_memory under spec.
    """
    op = operator or (lambda mem, z, kk: update_memory(spec, mem, z, kk))
    zs = list(z_stream) or [None]
    max_ratio = 0.0
    witnesses = []
    n = 0
    for idx, (m1, m2) in enumerate(pairs):
        d0 = memory_distance(spec, m1, m2)
        for z in zs:
            d1 = memory_distance(spec, op(m1, z, k), op(m2, z, k))
            n += 1
            if d0 > 0:
                ratio = d1 / d0
            else:
                ratio = 0.0 if d1 == 0 else math.inf
            max_ratio = max(max_ratio, ratio)
            if d1 > d0 + TIE_TOL and len(witnesses) < 5:
                witnesses.append({"pair": idx, "z": z, "d_before": d0, "d_after": d1})
    passed = not witnesses
    log.debug("nonexpansive pairs=%d samples=%d max_ratio=%.6g pass=%s", len(pairs), n, max_ratio, passed)
    return CertificateReport(
        obligation="memory_nonexpansive",
        passed=passed,
        mode="sampled",
        evidence={
            "max_ratio": max_ratio,
            "sample_count": float(n),
            "confidence_radius": zero_violation_radius(n),
        },
        witnesses=tuple(witnesses),
    )


def memory_snapshot(m: MemoryState) -> list[dict]:
    """JSON export: one record per item (key, code_bits, regime_tag, protected)."""
    return [
        {"key": it.key, "code_bits": it.code_bits, "regime_tag": it.regime_tag, "protected": it.protected}
        for it in m.items
    ]
