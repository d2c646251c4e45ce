"""
Closure certificate T_{theta,tau}(S*) within S*.

A finite S* with an explicit kernel over a finite observation support is checked
exhaustively (a proof); a predicate S* or a sampler-only kernel is probed
(evidence, with sample count and confidence radius).
"""

from __future__ import annotations

import logging
from typing import Any, Callable, Collection, Optional, Sequence, Union

import numpy as np

from lib.errors import EmptyAdmissibleSet
from lib.reports import CertificateReport, hoeffding_radius, zero_violation_radius
from lib.rng import make_rng

from .kernels import State, TransitionKernel, step

log = logging.getLogger("smgi.dynamics")

AdmissibleSet = Union[Collection[State], Callable[[State], bool]]
MAX_WITNESSES = 5


def _witness(s: State, z: Any, succ: State) -> dict:
    return {"state": s.label(), "observation": z, "successor": succ.label()}


def _support_at(s: State, observations: Sequence[Any], environments: Any) -> Sequence[Any]:
    if environments is None:
        return observations
    return environments.support_at(s)


def _draw_observation(s: State, observations: Sequence[Any], environments: Any, rng: np.random.Generator) -> Any:
    if environments is None:
        return observations[int(rng.integers(len(observations)))]
    instances = environments.instances
    return instances[int(rng.integers(len(instances)))].sample(s, rng)


def _observation_note(environments: Any) -> str:
    return "observations=declared" if environments is None else "observations=environment support"


def check_closure(
    kernel: TransitionKernel,
    s_star: AdmissibleSet,
    n_probe: int = 1000,
    seed: int = 0,
    observations: Sequence[Any] = (None,),
    state_sampler: Optional[Callable[[np.random.Generator], State]] = None,
    environments: Any = None,
) -> CertificateReport:
    """
    Check that every successor of an admissible state stays admissible.

    Args:
        kernel: transition kernel under test.
        s_star: finite collection of states, or a membership predicate.
        n_probe: (state, observation) probes for the sampled form.
        seed: seed for the sampled form.
        observations: finite observation support; (None,) for kernels that ignore z.
        environments: environment family; when given, each state is checked under
            every observation it can emit in some instance, and `observations` is unused.
        state_sampler: draws probe states for a predicate S*.

    Returns:
        CertificateReport with obligation 'closure'.
    """
    finite = not callable(s_star)
    if finite:
        members = frozenset(s_star)
        if not members:
            raise EmptyAdmissibleSet("closure over an empty admissible set is vacuous")
        contains = members.__contains__
    else:
        contains = s_star

    if finite and kernel.is_explicit:
        witnesses, checked = [], 0
        for s in sorted(members, key=lambda x: x.key()):
            for z in _support_at(s, observations, environments):
                for succ, p in kernel.successors(s, z):
                    checked += 1
                    if p > 0 and not contains(succ):
                        witnesses.append(_witness(s, z, succ))
        passed = not witnesses
        log.debug("closure kernel=%s mode=exhaustive states=%d transitions=%d pass=%s",
                  kernel.name, len(members), checked, passed)
        return CertificateReport(
            obligation="closure",
            passed=passed,
            evidence={"states": float(len(members)), "transitions": float(checked),
                      "violations": float(len(witnesses))},
            witnesses=tuple(witnesses[:MAX_WITNESSES]),
            notes=(f"kernel={kernel.name}", _observation_note(environments)),
        )

    if n_probe < 1:
        raise ValueError("n_probe must be positive")
    rng = make_rng(seed)
    pool = sorted(members, key=lambda x: x.key()) if finite else None
    if pool is None and state_sampler is None:
        raise ValueError("a predicate admissible set needs a state_sampler")
    admissible, violations, witnesses = 0, 0, []
    for _ in range(n_probe):
        s = pool[int(rng.integers(len(pool)))] if pool is not None else state_sampler(rng)
        if not contains(s):
            continue
        admissible += 1
        z = _draw_observation(s, observations, environments, rng)
        succ = step(kernel, s, z, rng)
        if not contains(succ):
            violations += 1
            if len(witnesses) < MAX_WITNESSES:
                witnesses.append(_witness(s, z, succ))
    if admissible == 0:
        raise EmptyAdmissibleSet(f"none of {n_probe} probe states lies in the admissible set")
    rate = violations / admissible
    radius = zero_violation_radius(admissible) if violations == 0 else hoeffding_radius(admissible)
    log.debug("closure kernel=%s mode=sampled drawn=%d admissible=%d violations=%d",
              kernel.name, n_probe, admissible, violations)
    return CertificateReport(
        obligation="closure",
        passed=violations == 0,
        mode="sampled",
        evidence={"sample_count": float(admissible), "probes_drawn": float(n_probe),
                  "confidence_radius": radius, "violations": float(violations), "violation_rate": rate},
        witnesses=tuple(witnesses),
        notes=(f"kernel={kernel.name}", _observation_note(environments)),
    )
