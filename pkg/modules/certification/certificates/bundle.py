"""
The (U1)-(U5) admissibility bundle, the four-obligation verdict vector and the
composite structural-closure check (hypotheses, conclusion, converse).
"""

from __future__ import annotations

import logging
from dataclasses import replace
from typing import Any, Callable, Collection, Mapping, Optional, Sequence, Union

import numpy as np

from lib.errors import EmptyAdmissibleSet
from lib.reports import CertificateReport
from modules.structure.dynamics import State, TransitionKernel, check_closure
from modules.structure.memory import MemoryItem, MemorySpec, MemoryState, check_nonexpansive
from modules.structure.metamodel import (
    MetaModel,
    TransformSpec,
    check_transform_magnitude,
    condition_key,
    env_distance,
)
from modules.structure.regimes import (
    ProtectedCore,
    RegimeWeights,
    active_loss,
    check_evaluative_invariance,
    check_protected_core,
)

from .drift import CapacityFunctional, LyapunovWitness, check_capacity, check_drift

log = logging.getLogger("smgi.certificates")

SHIFT_TOL = 1e-9
DEGENERATE_DISTANCE = 1e-12
VERDICT_KEYS = ("closure", "stability", "capacity", "evaluative_invariance")

KernelFamily = Union[TransitionKernel, Mapping[str, TransitionKernel], Callable[[TransformSpec], TransitionKernel]]


def _expected_loss(m: MetaModel, env, w: RegimeWeights, h: str, s: Optional[State]) -> float:
    probs = env.distribution(condition_key(s))
    return float(sum(p * active_loss(m.evaluators, w, h, s, z) for z, p in zip(env.support, probs) if p > 0))


def check_evaluator_shift(m: MetaModel, t: TransformSpec, lipschitz_ell: float,
                          states: Sequence[Optional[State]] = (None,)) -> CertificateReport:
    """
    (U3): |l_tau - l| / D_E(e, tau(e)) <= lipschitz_ell, where l is the expected
    loss of each hypothesis under one fixed active evaluator (the '*' mixing).
    """
    w = m.evaluators.weights_for(None)
    hyps = list(m.hypothesis_class.members) or sorted({s.hypothesis_id for s in states if s is not None})
    if not hyps:
        hyps = ["h0"]
    max_ratio, max_shift, max_dist = 0.0, 0.0, 0.0
    witnesses = []
    for e in m.environments.instances:
        te = t.apply_env(e)
        d = env_distance(e, te, m.environments.metric_kind)
        max_dist = max(max_dist, d)
        for h in hyps:
            for s in states:
                shift = abs(_expected_loss(m, te, w, h, s) - _expected_loss(m, e, w, h, s))
                max_shift = max(max_shift, shift)
                if d < DEGENERATE_DISTANCE:
                    continue
                ratio = shift / d
                max_ratio = max(max_ratio, ratio)
                if ratio > lipschitz_ell + SHIFT_TOL and len(witnesses) < 5:
                    witnesses.append({"environment": e.name, "hypothesis": h, "ratio": ratio})
    passed = not witnesses and max_shift <= lipschitz_ell * max_dist + SHIFT_TOL
    return CertificateReport(
        obligation="evaluator_shift",
        passed=passed,
        evidence={"max_ratio": max_ratio, "shift_term": max_shift, "max_distance": max_dist,
                  "lipschitz_ell": float(lipschitz_ell)},
        witnesses=tuple(witnesses),
        notes=(f"transform={t.identifier}",),
    )


def _drift_over_family(w: LyapunovWitness, kernel: TransitionKernel, probes: Sequence[State], fam,
                       observations: Optional[Sequence[Any]], **kw) -> CertificateReport:
    """Drift under each instance's observation law; the worst instance is reported."""
    if observations is not None:
        return check_drift(w, kernel, probes, observations=observations, **kw)
    reports = [(e.name, check_drift(w, kernel, probes, env=e, **kw)) for e in fam.instances]
    name, worst = max(reports, key=lambda item: (not item[1].passed, item[1].evidence["max_excess"]))
    evidence = {**worst.evidence, "environments": float(len(reports))}
    return replace(worst, evidence=evidence, notes=worst.notes + (f"environment={name}",))


def check_bundle(
    m: MetaModel,
    t: TransformSpec,
    kernel: TransitionKernel,
    w: LyapunovWitness,
    lipschitz_ell: float,
    capacity: CapacityFunctional,
    s_star: Any,
    probe_states: Optional[Collection[State]] = None,
    configurations: Optional[Sequence[Any]] = None,
    core: Optional[ProtectedCore] = None,
    observations: Optional[Sequence[Any]] = None,
    n_probe: int = 1000,
    n_mc: int = 1000,
    seed: int = 0,
    state_sampler: Optional[Callable] = None,
    workers: int = 1,
) -> CertificateReport:
    """
    Run (U1) closure, (U2) transform magnitude, (U3) evaluator shift,
    (U4) drift and (U5) capacity, plus the protected-core check when a core is
    declared (argument or m.evaluators.protected_core).

    Closure and drift run in the tau-transformed environments: closure over every
    observation an instance can emit from each state, drift under each
    instance's observation law. An explicit `observations` support replaces
    both with that support under a uniform law.

    Returns:
        'bundle' report passing iff every child passes; children in that order.
    """
    if probe_states is None:
        if callable(s_star):
            raise ValueError("a predicate admissible set needs explicit probe_states")
        probe_states = s_star
    probes = list(probe_states)
    fam = t.apply(m.environments)
    u1 = check_closure(kernel, s_star, n_probe=n_probe, seed=seed, observations=observations or (None,),
                       state_sampler=state_sampler, environments=fam if observations is None else None)
    u2 = check_transform_magnitude(t, m.environments)
    u3 = check_evaluator_shift(m, t, lipschitz_ell, probes[:32] or [None])
    u4 = _drift_over_family(w, kernel, probes, fam, observations, n_mc=n_mc, seed=seed, workers=workers)
    u5 = check_capacity(capacity, m, configurations)
    children = [u1, u2, u3, u4, u5]
    core = core if core is not None else m.evaluators.protected_core
    if core is not None and core.constraints:
        children.append(check_evaluative_invariance(core, m.evaluators, [t]))
    passed = all(c.passed for c in children)
    log.info("bundle transform=%s kernel=%s pass=%s failed=%s", t.identifier, kernel.name, passed,
             [c.obligation for c in children if not c.passed])
    return CertificateReport(
        obligation="bundle",
        passed=passed,
        children=tuple(children),
        notes=("U1=closure", "U2=transform_magnitude", "U3=evaluator_shift", "U4=stability", "U5=capacity"),
    )


def verdict_vector(bundle: CertificateReport) -> dict[str, bool]:
    """
    Four-obligation summary: closure = U1 and U2, stability = U4,
    capacity = U5, evaluative invariance = U3 and the protected core.
    """

    def ok(name: str) -> bool:
        c = bundle.child(name)
        return True if c is None else bool(c.passed)

    return {
        "closure": ok("closure") and ok("transform_magnitude"),
        "stability": ok("stability"),
        "capacity": ok("capacity"),
        "evaluative_invariance": ok("evaluator_shift") and ok("evaluative_invariance"),
    }


def first_failing(verdicts: Mapping[str, bool]) -> Optional[str]:
    """First failed obligation in the fixed order closure, stability, capacity, invariance."""
    return next((k for k in VERDICT_KEYS if not verdicts.get(k, True)), None)


def _kernel_for(kernels: KernelFamily, t: TransformSpec) -> TransitionKernel:
    if isinstance(kernels, TransitionKernel):
        return kernels
    if isinstance(kernels, Mapping):
        return kernels[t.identifier]
    return kernels(t)


def _default_memory_pairs(s_star: Collection[State], item_bits: float) -> list[tuple[MemoryState, MemoryState]]:
    by_keys = {s.memory.keys: s.memory for s in s_star}
    mems = [by_keys[k] for k in sorted(by_keys)]
    pairs = [(a, b) for i, a in enumerate(mems) for b in mems[i + 1:]]
    probe = MemoryState((MemoryItem("probe", None, item_bits),))
    pairs.append((MemoryState.empty(), probe))
    return pairs


def _adversarial_vertex(core: ProtectedCore, fam) -> Optional[RegimeWeights]:
    """A simplex vertex whose evaluator breaks the core, if any."""
    for k in range(1, fam.K + 1):
        vertex = RegimeWeights.one_hot(k, fam.K)
        if not check_protected_core(core, fam, weights=vertex).passed:
            return vertex
    return None


def check_theorem_closure(
    m: MetaModel,
    transforms: Sequence[TransformSpec],
    kernels: KernelFamily,
    w: LyapunovWitness,
    capacity: CapacityFunctional,
    core: Optional[ProtectedCore],
    s_star_candidate: Collection[State],
    memory_pairs: Optional[Sequence[tuple[MemoryState, MemoryState]]] = None,
    z_stream: Sequence[Any] = (None, "z"),
    configurations: Optional[Sequence[Any]] = None,
    observations: Optional[Sequence[Any]] = None,
    n_mc: int = 1000,
    seed: int = 0,
) -> CertificateReport:
    """
    Structural closure under task transformation: check hypotheses (capacity,
    non-expansive memory, invariant evaluative core, drift per transform), then
    the conclusion T_tau(S*) within S* for every tau, then the converse
    constructions (expansive memory, core-breaking regime switch).

    Observations default to the tau-transformed environments, as in check_bundle.

    Children order: hypotheses, conclusions (one per transform), converse checks;
    the notes name each child.
    """
    members = frozenset(s_star_candidate)
    if not members:
        raise EmptyAdmissibleSet("structural closure over an empty candidate set is vacuous")
    transforms = list(transforms)
    pairs = list(memory_pairs) if memory_pairs is not None else _default_memory_pairs(members, m.memory.item_bits)

    h_cap = check_capacity(capacity, m, configurations)
    h_mem = check_nonexpansive(m.memory, pairs, z_stream)
    h_inv = check_evaluative_invariance(core, m.evaluators, transforms)
    h_drift = [_drift_over_family(w, _kernel_for(kernels, t), sorted(members, key=lambda s: s.key()),
                                  t.apply(m.environments), observations, n_mc=n_mc, seed=seed)
               for t in transforms]
    hypotheses_ok = h_cap.passed and h_mem.passed and h_inv.passed and all(r.passed for r in h_drift)

    conclusions = [check_closure(_kernel_for(kernels, t), members, observations=observations or (None,), seed=seed,
                                 environments=t.apply(m.environments) if observations is None else None)
                   for t in transforms]
    closure_ok = all(r.passed for r in conclusions)

    converse_mem = check_nonexpansive(replace(m.memory, update_rule="duplicate"), pairs, z_stream)
    converse_core = None
    if core is not None and core.constraints:
        vertex = _adversarial_vertex(core, m.evaluators)
        if vertex is not None:
            flip = TransformSpec("core_flip", {"kind": "identity"}, 0.0, vertex)
            converse_core = check_evaluative_invariance(core, m.evaluators, [flip])
    converse = [converse_mem] + ([converse_core] if converse_core is not None else [])
    converse_demonstrated = any(not r.passed for r in converse)

    children = [h_cap, h_mem, h_inv, *h_drift, *conclusions, *converse]
    notes = ["hypothesis:capacity", "hypothesis:memory_nonexpansive", "hypothesis:evaluative_invariance"]
    notes += [f"hypothesis:drift:{t.identifier}" for t in transforms]
    notes += [f"conclusion:closure:{t.identifier}" for t in transforms]
    notes += ["converse:expansive_memory"] + (["converse:core_flip"] if converse_core is not None else [])
    established = hypotheses_ok and closure_ok
    log.info("theorem-closure transforms=%d hypotheses=%s conclusion=%s converse=%s",
             len(transforms), hypotheses_ok, closure_ok, converse_demonstrated)
    return CertificateReport(
        obligation="theorem_structural_closure",
        passed=established,
        children=tuple(children),
        flags={
            "hypothesis.capacity": h_cap.passed,
            "hypothesis.memory_nonexpansive": h_mem.passed,
            "hypothesis.evaluative_invariance": h_inv.passed,
            "hypothesis.drift": all(r.passed for r in h_drift),
            "conclusion.closure": closure_ok,
            "conclusion_established": established,
            "converse_demonstrated": converse_demonstrated,
        },
        evidence={"transforms": float(len(transforms)), "candidate_states": float(len(members))},
        notes=tuple(notes),
    )
