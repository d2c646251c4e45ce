"""
States of S_theta and transition kernels T_{theta,tau} : S x Z -> P(S).

Explicit kernels return their successor distribution (so closure and drift can
be checked exactly); sampler-only kernels can only be stepped.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Mapping, Optional, Sequence

import numpy as np

from lib.errors import CounterOverflow, DomainError
from lib.rng import sample_index
from modules.structure.memory import MemoryState

log = logging.getLogger("smgi.dynamics")

KERNEL_KINDS = ("deterministic_map", "finite_stochastic_table", "parameterized_rule")
ROW_TOL = 1e-12
COUNTER_BOUND = 2 ** 63 - 1
ANY_OBSERVATION = "*"


@dataclass(frozen=True)
class State:
    """s = (r, h, pi, m) plus an optional counter used by fixture states."""

    representation_state: Any = 0
    hypothesis_id: str = "h0"
    policy_params: tuple[float, ...] = ()
    memory: MemoryState = field(default_factory=MemoryState.empty)
    counter: Optional[int] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "policy_params", tuple(float(x) for x in self.policy_params))
        if self.counter is not None:
            if self.counter < 0:
                raise ValueError("counter must be nonnegative")
            object.__setattr__(self, "counter", int(self.counter))

    def key(self) -> tuple:
        mem = tuple((it.key, it.code_bits, it.protected) for it in self.memory.items)
        return (str(self.representation_state), self.hypothesis_id, self.policy_params, mem, self.counter)

    def __hash__(self) -> int:
        return hash(self.key())

    @property
    def level(self) -> float:
        """Scalar position of the state: the counter when present, else the representation value."""
        if self.counter is not None:
            return float(self.counter)
        return float(self.representation_state)

    def label(self) -> str:
        if self.counter is not None:
            return str(self.counter)
        return str(self.representation_state)

    @classmethod
    def point(cls, value: Any, hypothesis_id: str = "h0") -> "State":
        return cls(representation_state=value, hypothesis_id=hypothesis_id)

    @classmethod
    def at_counter(cls, n: int, hypothesis_id: str = "h0") -> "State":
        return cls(representation_state="counter", hypothesis_id=hypothesis_id, counter=n)

    def to_dict(self) -> dict:
        return {
            "representation_state": self.representation_state,
            "hypothesis_id": self.hypothesis_id,
            "policy_params": list(self.policy_params),
            "memory": self.memory.to_dict(),
            "counter": self.counter,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "State":
        return cls(
            representation_state=data.get("representation_state", 0),
            hypothesis_id=str(data.get("hypothesis_id", "h0")),
            policy_params=tuple(data.get("policy_params", ())),
            memory=MemoryState.from_dict(data.get("memory") or []),
            counter=data.get("counter"),
        )


def point_states(values: Sequence[Any], hypothesis_id: str = "h0") -> frozenset:
    return frozenset(State.point(v, hypothesis_id) for v in values)


Successors = list[tuple[State, float]]


@dataclass(frozen=True)
class TransitionKernel:
    kind: str
    rule: Optional[Callable[[State, Any], Successors]] = None
    sampler: Optional[Callable[[State, Any, np.random.Generator], State]] = None
    name: str = "kernel"
    spec: Optional[dict] = None

    def __post_init__(self) -> None:
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"kernel kind must be one of {KERNEL_KINDS}")
        if self.rule is None and self.sampler is None:
            raise ValueError(f"kernel {self.name!r} needs a rule or a sampler")

    @property
    def is_explicit(self) -> bool:
        return self.rule is not None

    def successors(self, s: State, z: Any) -> Successors:
        """Successor distribution with duplicates merged; rows validated."""
        if self.rule is None:
            raise ValueError(f"kernel {self.name!r} is sampler-only and has no explicit successors")
        merged: dict[State, float] = {}
        for succ, p in self.rule(s, z):
            if p < 0:
                raise ValueError(f"kernel {self.name!r} produced a negative probability")
            merged[succ] = merged.get(succ, 0.0) + float(p)
        total = sum(merged.values())
        if abs(total - 1.0) > ROW_TOL:
            raise ValueError(f"kernel {self.name!r} row for {s.label()} sums to {total!r}")
        if self.kind == "deterministic_map" and len(merged) != 1:
            raise ValueError(f"deterministic kernel {self.name!r} returned {len(merged)} successors")
        return list(merged.items())

    def to_dict(self) -> dict:
        if self.spec is None:
            raise ValueError(f"kernel {self.name!r} has no declarative form")
        return dict(self.spec)


def step(k: TransitionKernel, s: State, z: Any, rng: np.random.Generator) -> State:
    """Sample s' ~ T(. | s, z). Deterministic kernels consume no randomness."""
    if k.rule is None:
        return k.sampler(s, z, rng)
    succ = k.successors(s, z)
    if len(succ) == 1:
        return succ[0][0]
    return succ[sample_index(rng, [p for _, p in succ])][0]


def identity_kernel() -> TransitionKernel:
    return TransitionKernel("deterministic_map", lambda s, z: [(s, 1.0)], name="identity",
                            spec={"kind": "identity"})


def constant_kernel(value: Any) -> TransitionKernel:
    """T(s, z) = value for every state."""
    target = State.point(value)
    return TransitionKernel("deterministic_map", lambda s, z: [(replace(target, hypothesis_id=s.hypothesis_id,
                                                                        memory=s.memory), 1.0)],
                            name=f"constant_{value}", spec={"kind": "constant", "value": value})


def counter_kernel(bound: int = COUNTER_BOUND) -> TransitionKernel:
    """T(s, z) = s + 1 on a bounded counter."""

    def rule(s: State, z: Any) -> Successors:
        if s.counter is None:
            raise DomainError(f"counter kernel applied to non-counter state {s.label()}")
        if s.counter >= bound:
            raise CounterOverflow(f"counter would exceed its bound {bound}")
        return [(replace(s, counter=s.counter + 1), 1.0)]

    return TransitionKernel("deterministic_map", rule, name="counter", spec={"kind": "counter", "bound": bound})


def table_kernel(table: Mapping[str, Mapping[str, Sequence[tuple[Any, float]]]],
                 name: str = "table") -> TransitionKernel:
    """
    Finite stochastic table on point states.

    Args:
        table: state label -> observation label (or '*') -> [(successor value, probability)].
    """
    rows = {str(s): {str(z): [(v, float(p)) for v, p in row] for z, row in by_z.items()}
            for s, by_z in table.items()}
    for s, by_z in rows.items():
        for z, row in by_z.items():
            if abs(sum(p for _, p in row) - 1.0) > ROW_TOL:
                raise ValueError(f"table row ({s}, {z}) does not sum to 1")

    def rule(s: State, z: Any) -> Successors:
        by_z = rows.get(s.label())
        if by_z is None:
            raise DomainError(f"state {s.label()} is outside the kernel table {name!r}")
        row = by_z.get(str(z), by_z.get(ANY_OBSERVATION))
        if row is None:
            raise DomainError(f"no table row for ({s.label()}, {z!r})")
        return [(replace(s, representation_state=v), p) for v, p in row]

    spec = {"kind": "table", "table": {s: {z: [[v, p] for v, p in row] for z, row in sorted(by_z.items())}
                                       for s, by_z in sorted(rows.items())}}
    return TransitionKernel("finite_stochastic_table", rule, name=name, spec=spec)


def drift_chain_kernel(n_max: int = 10, p_down: float = 0.9) -> TransitionKernel:
    """Down-drift chain on {0..n_max}: s -> s-1 w.p. p_down, stay otherwise; 0 is absorbing."""
    table = {0: {ANY_OBSERVATION: [(0, 1.0)]}}
    for s in range(1, n_max + 1):
        table[s] = {ANY_OBSERVATION: [(s - 1, p_down), (s, 1.0 - p_down)]}
    k = table_kernel(table, name="drift_chain")
    return replace(k, spec={"kind": "drift_chain", "n_max": n_max, "p_down": p_down})


def sampler_kernel(sampler: Callable[[State, Any, np.random.Generator], State],
                   name: str = "sampler") -> TransitionKernel:
    return TransitionKernel("parameterized_rule", sampler=sampler, name=name)


def kernel_from_dict(data: dict) -> TransitionKernel:
    kind = data.get("kind")
    if kind == "identity":
        return identity_kernel()
    if kind == "constant":
        return constant_kernel(data["value"])
    if kind == "counter":
        return counter_kernel(int(data.get("bound", COUNTER_BOUND)))
    if kind == "drift_chain":
        return drift_chain_kernel(int(data.get("n_max", 10)), float(data.get("p_down", 0.9)))
    if kind == "table":
        return table_kernel({s: {z: [tuple(e) for e in row] for z, row in by_z.items()}
                             for s, by_z in data["table"].items()})
    raise ValueError(f"unknown kernel kind {kind!r}")
