"""
Stability (Lyapunov drift) and capacity certificates.

Drift: E[V(s') | s] <= (1 - alpha) V(s) + beta on every probe state, exact for
explicit kernels (enumerating successors and the observation law), Monte-Carlo
with a Hoeffding radius for sampler-only kernels.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Collection, Mapping, Optional, Sequence

import numpy as np

from lib.reports import CertificateReport, hoeffding_radius
from lib.rng import child_seeds, make_rng
from lib.workers import ordered_map
from modules.structure.dynamics import State, TransitionKernel, step
from modules.structure.metamodel import (
    Environment,
    HypothesisClassSpec,
    MetaModel,
    condition_key,
    description_length_bits,
)

log = logging.getLogger("smgi.certificates")

DRIFT_TOL = 1e-9
CAPACITY_KINDS = ("log2_cardinality", "kl_vs_prior", "description_bits")
MAX_WITNESSES = 5


@dataclass(frozen=True)
class LyapunovWitness:
    v: Callable[[State], float]
    alpha: float
    beta: float = 0.0
    v_max: Optional[float] = None
    spec: Optional[dict] = None

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if self.v_max is not None and self.v_max < 0:
            raise ValueError("v_max must be nonnegative")

    def drift_bound(self, s: State) -> float:
        return (1.0 - self.alpha) * self.value(s) + self.beta

    def value(self, s: State) -> float:
        x = float(self.v(s))
        if x < 0:
            raise ValueError(f"Lyapunov witness is negative ({x!r}) at state {s.label()}")
        return x

    @property
    def non_explosion_constant(self) -> float:
        """B with sup_t E[V(s_t)] <= B V(s_0) + B."""
        return non_explosion_constant(self.alpha, self.beta)

    @classmethod
    def zero(cls, alpha: float = 0.5, beta: float = 0.0) -> "LyapunovWitness":
        return cls(lambda s: 0.0, alpha, beta, 0.0, {"kind": "zero", "alpha": alpha, "beta": beta})

    @classmethod
    def level(cls, alpha: float, beta: float = 0.0, v_max: Optional[float] = None) -> "LyapunovWitness":
        """V(s) = scalar level of s (counter or representation value)."""
        return cls(lambda s: s.level, alpha, beta, v_max,
                   {"kind": "level", "alpha": alpha, "beta": beta, "v_max": v_max})

    def to_dict(self) -> dict:
        if self.spec is None:
            raise ValueError("Lyapunov witness has no declarative form")
        return dict(self.spec)

    @classmethod
    def from_dict(cls, data: dict) -> "LyapunovWitness":
        kind = data.get("kind", "level")
        alpha, beta = float(data["alpha"]), float(data.get("beta", 0.0))
        if kind == "zero":
            return cls.zero(alpha, beta)
        if kind == "level":
            v_max = data.get("v_max")
            return cls.level(alpha, beta, float(v_max) if v_max is not None else None)
        raise ValueError(f"unknown Lyapunov witness kind {kind!r}")


def non_explosion_constant(alpha: float, beta: float) -> float:
    return max(1.0, beta / alpha)


def _observation_law(env: Optional[Environment], s: State,
                     observations: Sequence[Any]) -> list[tuple[Any, float]]:
    if env is None:
        return [(z, 1.0 / len(observations)) for z in observations]
    probs = env.distribution(condition_key(s))
    return [(z, float(p)) for z, p in zip(env.support, probs) if p > 0]


def _exact_expectation(w: LyapunovWitness, kernel: TransitionKernel, s: State,
                       law: list[tuple[Any, float]]) -> float:
    total = 0.0
    for z, pz in law:
        for succ, p in kernel.successors(s, z):
            total += pz * p * w.value(succ)
    return total


def _mc_expectation(w: LyapunovWitness, kernel: TransitionKernel, s: State, env: Optional[Environment],
                    observations: Sequence[Any], n_mc: int, seed: int) -> tuple[float, float, float]:
    rng = make_rng(seed)
    vals = np.empty(n_mc)
    for i in range(n_mc):
        z = env.sample(s, rng) if env is not None else observations[int(rng.integers(len(observations)))]
        vals[i] = w.value(step(kernel, s, z, rng))
    return float(vals.mean()), float(vals.min()), float(vals.max())


def check_drift(
    w: LyapunovWitness,
    kernel: TransitionKernel,
    probe_states: Collection[State],
    env: Optional[Environment] = None,
    n_mc: int = 1000,
    seed: int = 0,
    observations: Sequence[Any] = (None,),
    workers: int = 1,
    confidence: float = 0.95,
    s0: Optional[State] = None,
    strict_sampled: bool = False,
) -> CertificateReport:
    """
    (U4) one-step drift on every probe state.

    Args:
        w: Lyapunov witness (V, alpha, beta, v_max).
        kernel: transition kernel; explicit kernels are checked exactly.
        probe_states: non-empty set of states.
        env: environment supplying the observation law; None uses `observations` uniformly.
        n_mc: Monte-Carlo draws per probe for sampler-only kernels.
        seed: base seed; each probe gets its own derived stream.
        workers: parallel probes.
        s0: initial state for `implied_bound`; without it the largest V over the probes is used.
        strict_sampled: sampled verdicts pass only when every probe clears the drift
            bound by its confidence radius (`flags.confident`).

    Returns:
        CertificateReport with obligation 'stability'.
    """
    probes = sorted(set(probe_states), key=lambda x: x.key())
    if not probes:
        raise ValueError("check_drift needs at least one probe state")
    exact = kernel.is_explicit
    seeds = child_seeds(seed, len(probes))

    def evaluate(item):
        s, sd = item
        v_s = w.value(s)
        rhs = w.drift_bound(s)
        if exact:
            return s, v_s, rhs, _exact_expectation(w, kernel, s, _observation_law(env, s, observations)), None
        mean, lo, hi = _mc_expectation(w, kernel, s, env, observations, n_mc, sd)
        return s, v_s, rhs, mean, (lo, hi)

    results = ordered_map(evaluate, list(zip(probes, seeds)), workers)

    witnesses, max_excess, max_upper, fallback, radius = [], -math.inf, -math.inf, False, 0.0
    for s, v_s, rhs, expected, rng_range in results:
        excess = expected - rhs
        max_excess = max(max_excess, excess)
        r = 0.0
        if rng_range is not None:
            if w.v_max is not None:
                r = hoeffding_radius(n_mc, w.v_max, confidence)
            else:
                fallback = True
                r = hoeffding_radius(n_mc, rng_range[1] - rng_range[0], confidence)
            radius = max(radius, r)
        max_upper = max(max_upper, excess + r)
        if excess > DRIFT_TOL and len(witnesses) < MAX_WITNESSES:
            witnesses.append({"state": s.label(), "v": v_s, "expected_v_next": expected, "drift_bound": rhs})
    confident = max_upper <= DRIFT_TOL
    passed = max_excess <= DRIFT_TOL
    if not exact and strict_sampled:
        passed = passed and confident
    v0 = w.value(s0) if s0 is not None else max(r[1] for r in results)
    evidence = {
        "max_excess": max_excess,
        "probes": float(len(probes)),
        "v0": v0,
        "implied_bound": v0 + w.beta / w.alpha,
        "non_explosion_constant": w.non_explosion_constant,
        "alpha": float(w.alpha),
        "beta": float(w.beta),
    }
    flags = {}
    mode = "exhaustive"
    if not exact:
        mode = "sampled"
        evidence["sample_count"] = float(n_mc * len(probes))
        evidence["confidence_radius"] = radius
        evidence["max_excess_upper"] = max_upper
        flags["empirical_range_fallback"] = fallback
        flags["within_radius"] = abs(max_excess) <= radius
        flags["confident"] = confident
        flags["strict"] = strict_sampled
    log.debug("drift kernel=%s mode=%s probes=%d max_excess=%.6g pass=%s",
              kernel.name, mode, len(probes), max_excess, passed)
    v0_note = "implied_bound = V(s0) + beta/alpha" if s0 is not None else "implied_bound = max V(probe) + beta/alpha"
    return CertificateReport(
        obligation="stability",
        passed=passed,
        mode=mode,
        evidence=evidence,
        witnesses=tuple(witnesses),
        flags=flags,
        notes=(f"kernel={kernel.name}", v0_note),
    )


@dataclass(frozen=True)
class CapacityFunctional:
    kind: str = "log2_cardinality"
    bound: float = math.inf

    def __post_init__(self) -> None:
        if self.kind not in CAPACITY_KINDS:
            raise ValueError(f"capacity kind must be one of {CAPACITY_KINDS}")
        if self.bound < 0:
            raise ValueError("capacity bound must be nonnegative")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "bound": float(self.bound)}

    @classmethod
    def from_dict(cls, data: dict) -> "CapacityFunctional":
        bound = data.get("bound")
        return cls(data.get("kind", "log2_cardinality"), math.inf if bound is None else float(bound))


def kl_to_prior(q: Mapping[str, float], prior: Mapping[str, float]) -> float:
    """KL(Q || P) in nats over a finite class; infinite when Q leaves the prior's support."""
    total = 0.0
    for h, qh in q.items():
        if qh <= 0:
            continue
        ph = prior.get(h, 0.0)
        if ph <= 0:
            return math.inf
        total += qh * math.log(qh / ph)
    return total


def capacity_value(c: CapacityFunctional, m: Optional[MetaModel], config: Any) -> float:
    """Evaluate the functional on one admissible configuration."""
    if c.kind == "log2_cardinality":
        hc = config if isinstance(config, HypothesisClassSpec) else getattr(config, "hypothesis_class", None)
        if hc is None:
            raise TypeError("log2_cardinality needs a HypothesisClassSpec or MetaModel configuration")
        return float(hc.complexity_bits)
    if c.kind == "description_bits":
        model = config if isinstance(config, MetaModel) else m
        return float(description_length_bits(model))
    if m is None:
        raise ValueError("kl_vs_prior needs the meta-model's prior")
    return kl_to_prior(config, m.prior.probabilities(m.hypothesis_class))


def check_capacity(c: CapacityFunctional, m: Optional[MetaModel],
                   configurations: Optional[Sequence[Any]] = None) -> CertificateReport:
    """
    (U5) / SMGI (iii): max of the capacity functional over the configurations
    against the declared bound. Without configurations the model itself is the
    single configuration.
    """
    if configurations is None:
        if m is None:
            raise ValueError("check_capacity needs a model or configurations")
        configurations = [m] if c.kind != "kl_vs_prior" else [m.prior.probabilities(m.hypothesis_class)]
    configurations = list(configurations)
    if not configurations:
        raise ValueError("check_capacity needs at least one configuration")
    values = [capacity_value(c, m, cfg) for cfg in configurations]
    achieved = max(values)
    first_bad = next((i for i, v in enumerate(values) if not v <= c.bound), None)
    passed = first_bad is None and math.isfinite(achieved)
    witnesses = () if first_bad is None else ({"index": first_bad, "value": values[first_bad]},)
    log.debug("capacity kind=%s configs=%d achieved=%.6g bound=%.6g pass=%s",
              c.kind, len(values), achieved, c.bound, passed)
    return CertificateReport(
        obligation="capacity",
        passed=passed,
        evidence={"achieved": achieved, "bound": float(c.bound), "configurations": float(len(values))},
        witnesses=witnesses,
        notes=(f"kind={c.kind}",),
    )
