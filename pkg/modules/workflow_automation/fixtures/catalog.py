"""
Canonical fixtures: the four single-obligation counterexamples, the
flipped-ordering risk matrix, the two-regime tool-use instance with a certified
evaluator update, and the K = 1 embedding of a classical learner.

Each entry is a ready-to-run configuration for the bundle checker plus the
verdict vector it is expected to produce.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Mapping, Optional, Sequence, Union

import numpy as np

from lib.errors import ConfigError
from lib.reports import CertificateReport, jsonable
from modules.certification.certificates import (
    VERDICT_KEYS,
    CapacityFunctional,
    LyapunovWitness,
    check_bundle,
    verdict_vector,
)
from modules.structure.dynamics import (
    COUNTER_BOUND,
    State,
    TransitionKernel,
    constant_kernel,
    counter_kernel,
    identity_kernel,
    kernel_from_dict,
    point_states,
)
from modules.structure.memory import MemorySpec
from modules.structure.metamodel import (
    Environment,
    EnvironmentFamily,
    HypothesisClassSpec,
    MetaModel,
    PriorSpec,
    RepresentationSpec,
    TransformSpec,
    identity_transform,
)
from modules.structure.regimes import (
    AuditCase,
    Evaluator,
    EvaluatorFamily,
    OrderingConstraint,
    ProtectedCore,
    RegimeWeights,
    SwitchingOperator,
    ThresholdConstraint,
    WeightConstraint,
)

log = logging.getLogger("smgi.fixtures")

HYPOTHESES = ("h_a", "h_b")
BENIGN, ADVERSARIAL = "benign", "adversarial"
FLIPPED_RISKS = ((0.2, 0.8), (0.8, 0.2))
COUNTER_PROBES = (0, 1, 10, 100, 1_000, 10_000, 100_000, 1_000_000)
CAPACITY_SCHEDULE = tuple(range(1, 51))
CAPACITY_BOUND = 25.0
SAFETY_FLOOR = 0.3
ALL_PASS = {k: True for k in VERDICT_KEYS}


def _expect(**fails: bool) -> dict[str, bool]:
    out = dict(ALL_PASS)
    out.update(fails)
    return out


@dataclass(frozen=True)
class FixtureEntry:
    name: str
    description: str
    model: MetaModel
    transforms: tuple[TransformSpec, ...]
    kernel: TransitionKernel
    witness: LyapunovWitness
    s_star: Any
    probe_states: tuple[State, ...]
    capacity: CapacityFunctional
    expected: Mapping[str, bool]
    configurations: Optional[tuple] = None
    lipschitz_ell: float = 1.0
    state_sampler: Optional[Callable[[np.random.Generator], State]] = None
    extras: Mapping[str, Any] = field(default_factory=dict)

    @property
    def core(self) -> Optional[ProtectedCore]:
        return self.model.evaluators.protected_core


def _environment(contexts: Optional[Mapping[str, float]] = None) -> Environment:
    return Environment("e0", ("z0", "z1"), {"*": (0.5, 0.5)}, context_probs=contexts)


def _model(evaluators: EvaluatorFamily, hypothesis_class: Optional[HypothesisClassSpec] = None,
           environments: Optional[EnvironmentFamily] = None, memory: Optional[MemorySpec] = None) -> MetaModel:
    return MetaModel(
        representation=RepresentationSpec(("z0", "z1"), "reals",
                                          {"kind": "table", "table": {"z0": 0.0, "z1": 1.0}}),
        hypothesis_class=hypothesis_class or HypothesisClassSpec.enumerated(HYPOTHESES),
        prior=PriorSpec(),
        evaluators=evaluators,
        environments=environments or EnvironmentFamily((_environment(),)),
        memory=memory or MemorySpec(),
    )


def _ordering_core(contexts: Sequence[str] = ("*",), rows: Optional[Mapping[str, Sequence[float]]] = None,
                   ) -> ProtectedCore:
    """h_a strictly below h_b in every listed context (or per-context orders from rows)."""
    constraints = []
    for c in contexts:
        row = rows[c] if rows is not None else (0.0, 1.0)
        for i, j in ((0, 1), (1, 0)):
            if row[i] < row[j]:
                constraints.append(OrderingConstraint(f"order_{c}_{HYPOTHESES[i]}<{HYPOTHESES[j]}",
                                                      HYPOTHESES[i], HYPOTHESES[j], c))
    return ProtectedCore(tuple(constraints), tuple(AuditCase(context=c) for c in contexts))


def _single_evaluator_family(core: Optional[ProtectedCore] = None) -> EvaluatorFamily:
    ev = Evaluator.constant_rows("l1", dict(zip(HYPOTHESES, FLIPPED_RISKS[0])))
    return EvaluatorFamily((ev,), core, {"*": RegimeWeights((1.0,))})


def _log2_capacity(bound: float = 4.0) -> CapacityFunctional:
    return CapacityFunctional("log2_cardinality", bound)


def fixture_closure_fail() -> FixtureEntry:
    """S = {0, 1}, T = 1 everywhere, S* = {0}: closure alone fails."""
    core = _ordering_core()
    model = _model(_single_evaluator_family(core))
    return FixtureEntry(
        name="closure_fail",
        description="constant kernel T=1 leaves S*={0}",
        model=model,
        transforms=(identity_transform(),),
        kernel=constant_kernel(1),
        witness=LyapunovWitness.zero(),
        s_star=point_states([0], "h_a"),
        probe_states=tuple(sorted(point_states([0, 1], "h_a"), key=lambda s: s.key())),
        capacity=_log2_capacity(),
        expected=_expect(closure=False),
    )


def _counter_sampler(rng: np.random.Generator) -> State:
    return State.at_counter(int(rng.integers(0, COUNTER_PROBES[-1] + 1)), "h_a")


def _counter_admissible(s: State) -> bool:
    return s.counter is not None and 0 <= s.counter <= COUNTER_BOUND


def fixture_stability_fail() -> FixtureEntry:
    """Counter kernel s -> s + 1 with V(s) = s: S* = all counters is invariant, drift fails."""
    core = _ordering_core()
    return FixtureEntry(
        name="stability_fail",
        description="counter kernel grows without stabilizing",
        model=_model(_single_evaluator_family(core)),
        transforms=(identity_transform(),),
        kernel=counter_kernel(),
        witness=LyapunovWitness.level(alpha=0.1, beta=1.0),
        s_star=_counter_admissible,
        probe_states=tuple(State.at_counter(n, "h_a") for n in COUNTER_PROBES),
        capacity=_log2_capacity(),
        expected=_expect(stability=False),
        state_sampler=_counter_sampler,
    )


def fixture_capacity_fail() -> FixtureEntry:
    """Single-point state space; the class schedule H_n has complexity n bits at step n."""
    core = _ordering_core()
    model = _model(_single_evaluator_family(core), hypothesis_class=HypothesisClassSpec.grid(1.0))
    return FixtureEntry(
        name="capacity_fail",
        description="class schedule with complexity n at step n",
        model=model,
        transforms=(identity_transform(),),
        kernel=identity_kernel(),
        witness=LyapunovWitness.zero(),
        s_star=point_states([0], "h_a"),
        probe_states=tuple(point_states([0], "h_a")),
        capacity=CapacityFunctional("log2_cardinality", CAPACITY_BOUND),
        configurations=tuple(HypothesisClassSpec.grid(float(n)) for n in CAPACITY_SCHEDULE),
        expected=_expect(capacity=False),
    )


def _two_evaluator_family(core: Optional[ProtectedCore], mixing: Mapping[str, RegimeWeights]) -> EvaluatorFamily:
    evs = tuple(Evaluator.constant_rows(f"l{k + 1}", dict(zip(HYPOTHESES, row)))
                for k, row in enumerate(FLIPPED_RISKS))
    return EvaluatorFamily(evs, core, dict(mixing))


def fixture_invariance_fail() -> FixtureEntry:
    """A regime switch to the flipped evaluator breaks the protected ordering h_a < h_b."""
    core = _ordering_core()
    fam = _two_evaluator_family(core, {"*": RegimeWeights((1.0, 0.0))})
    switch = TransformSpec("regime_switch", {"kind": "identity"}, 0.0, RegimeWeights((0.0, 1.0)))
    return FixtureEntry(
        name="invariance_fail",
        description="regime switch flips the protected ordering",
        model=_model(fam),
        transforms=(switch,),
        kernel=identity_kernel(),
        witness=LyapunovWitness.zero(),
        s_star=point_states([0], "h_a"),
        probe_states=tuple(point_states([0], "h_a")),
        capacity=_log2_capacity(),
        expected=_expect(evaluative_invariance=False),
    )


def _contextual_model() -> MetaModel:
    rows = {BENIGN: FLIPPED_RISKS[0], ADVERSARIAL: FLIPPED_RISKS[1]}
    core = _ordering_core((BENIGN, ADVERSARIAL), rows)
    fam = _two_evaluator_family(core, {BENIGN: RegimeWeights((1.0, 0.0)), ADVERSARIAL: RegimeWeights((0.0, 1.0))})
    env = EnvironmentFamily((_environment({BENIGN: 0.5, ADVERSARIAL: 0.5}),), regime_risks=rows)
    return _model(fam, environments=env)


def fixture_strict_inclusion() -> FixtureEntry:
    """K = 2 risk rows ordering (h_a, h_b) oppositely; no single evaluator keeps both orders."""
    model = _contextual_model()
    return FixtureEntry(
        name="strict_inclusion",
        description="flipped orderings across two regimes",
        model=model,
        transforms=(identity_transform(),),
        kernel=identity_kernel(),
        witness=LyapunovWitness.zero(),
        s_star=point_states([0], "h_a"),
        probe_states=tuple(point_states([0], "h_a")),
        capacity=_log2_capacity(),
        expected=dict(ALL_PASS),
        extras={
            "risk_matrix": [list(r) for r in FLIPPED_RISKS],
            "hypotheses": list(HYPOTHESES),
            "grid_per_axis": 100,
            "switching": SwitchingOperator.context_table({BENIGN: (1.0, 0.0), ADVERSARIAL: (0.0, 1.0)}, 2),
        },
    )


def fixture_two_regime_tooluse() -> FixtureEntry:
    """
    Task regime rho_0 and safety regime rho_1 with lambda(rho_1) > lambda(rho_0)
    in the adversarial context. Phi: the refusing hypothesis keeps safety risk
    <= 0.1; admissible updates keep lambda_2 >= 0.3.
    """
    task = Evaluator.constant_rows("task", {"h_comply": 0.1, "h_refuse": 0.6})
    safety = Evaluator.constant_rows("safety", {"h_comply": 0.9, "h_refuse": 0.05})
    core = ProtectedCore(
        (ThresholdConstraint("phi_refuse_safe", "h_refuse", 0.1, evaluator=2),),
        (AuditCase(context=BENIGN), AuditCase(context=ADVERSARIAL)),
    )
    mixing = {BENIGN: RegimeWeights((0.6, 0.4)), ADVERSARIAL: RegimeWeights((0.2, 0.8))}
    fam = EvaluatorFamily((task, safety), core, mixing)
    env = EnvironmentFamily((_environment({BENIGN: 0.7, ADVERSARIAL: 0.3}),))
    model = _model(fam, hypothesis_class=HypothesisClassSpec.enumerated(("h_comply", "h_refuse")),
                   environments=env)
    floor = WeightConstraint.floor(2, SAFETY_FLOOR, 2, name="safety_floor")
    return FixtureEntry(
        name="two_regime_tooluse",
        description="prompt-injection context with a certified evaluator update",
        model=model,
        transforms=(identity_transform(),),
        kernel=identity_kernel(),
        witness=LyapunovWitness.zero(),
        s_star=point_states([0], "h_refuse"),
        probe_states=tuple(point_states([0], "h_refuse")),
        capacity=_log2_capacity(),
        expected=dict(ALL_PASS),
        extras={
            "admissible_set": (floor,),
            "candidates": {"inadmissible": (0.9, 0.1), "admissible": (0.4, 0.6)},
            "expected_projection": {"inadmissible": (0.7, 0.3), "admissible": (0.4, 0.6)},
        },
    )


def fixture_classical_embedding() -> FixtureEntry:
    """K = 1 embedding of a classical learner: delta_1 switching, no-op memory and forgetting."""
    core = _ordering_core()
    return FixtureEntry(
        name="classical_embedding",
        description="single-regime learner embedded with delta_1 switching",
        model=_model(_single_evaluator_family(core), memory=MemorySpec("noop", 0.0)),
        transforms=(identity_transform(),),
        kernel=identity_kernel(),
        witness=LyapunovWitness.zero(),
        s_star=point_states([0], "h_a"),
        probe_states=tuple(point_states([0], "h_a")),
        capacity=_log2_capacity(),
        expected=dict(ALL_PASS),
        extras={"switching": SwitchingOperator.dirac(1, 1)},
    )


MINIMALITY_FIXTURES = ("closure_fail", "stability_fail", "capacity_fail", "invariance_fail")

_BUILDERS: dict[str, Callable[[], FixtureEntry]] = {
    "closure_fail": fixture_closure_fail,
    "stability_fail": fixture_stability_fail,
    "capacity_fail": fixture_capacity_fail,
    "invariance_fail": fixture_invariance_fail,
    "strict_inclusion": fixture_strict_inclusion,
    "two_regime_tooluse": fixture_two_regime_tooluse,
    "classical_embedding": fixture_classical_embedding,
}


def fixture_names() -> tuple[str, ...]:
    return tuple(_BUILDERS)


def default_catalog() -> dict[str, FixtureEntry]:
    return {name: build() for name, build in _BUILDERS.items()}


def get_fixture(name: str) -> FixtureEntry:
    if name not in _BUILDERS:
        raise KeyError(f"unknown fixture {name!r}; known: {', '.join(_BUILDERS)}")
    return _BUILDERS[name]()


def run_fixture(entry: Union[str, FixtureEntry], seed: int = 0, n_probe: int = 1000, n_mc: int = 1000,
                workers: int = 1) -> tuple[dict[str, bool], list[CertificateReport]]:
    """
    Bundle check per declared transform; verdicts are AND-ed across transforms.

    Returns:
        (verdict vector, bundle reports in transform order)
    """
    if isinstance(entry, str):
        entry = get_fixture(entry)
    reports = []
    for t in entry.transforms:
        reports.append(check_bundle(
            entry.model, t, entry.kernel, entry.witness, entry.lipschitz_ell, entry.capacity, entry.s_star,
            probe_states=entry.probe_states, configurations=entry.configurations, core=entry.core,
            n_probe=n_probe, n_mc=n_mc, seed=seed, state_sampler=entry.state_sampler, workers=workers,
        ))
    verdicts = dict(ALL_PASS)
    for rep in reports:
        for k, ok in verdict_vector(rep).items():
            verdicts[k] = verdicts[k] and ok
    log.info("fixture=%s verdicts=%s expected=%s", entry.name, verdicts, dict(entry.expected))
    return verdicts, reports


def export_fixture(entry: Union[str, FixtureEntry], seed: int = 0) -> dict:
    """Standalone run configuration that re-runs the fixture through the CLI."""
    if isinstance(entry, str):
        entry = get_fixture(entry)
    spec = {
        "description": entry.description,
        "model": entry.model.to_dict(),
        "transforms": [t.to_dict() for t in entry.transforms],
        "kernel": entry.kernel.spec,
        "witness": entry.witness.to_dict(),
        "capacity": entry.capacity.to_dict(),
        "expected": dict(entry.expected),
    }
    return {"command": "certify", "seed": int(seed), "fixture": entry.name, "fixture_spec": spec}


_SPEC_FIELDS: dict[str, tuple[str, Callable[[FixtureEntry], Any], Callable[[Any], Any]]] = {
    "model": ("model", lambda e: e.model.to_dict(), MetaModel.from_dict),
    "transforms": ("transforms", lambda e: [t.to_dict() for t in e.transforms],
                   lambda d: tuple(TransformSpec.from_dict(t) for t in d)),
    "kernel": ("kernel", lambda e: e.kernel.to_dict(), kernel_from_dict),
    "witness": ("witness", lambda e: e.witness.to_dict(), LyapunovWitness.from_dict),
    "capacity": ("capacity", lambda e: e.capacity.to_dict(), CapacityFunctional.from_dict),
}


def load_fixture(data: Mapping[str, Any], path: str = "") -> FixtureEntry:
    """
    Resolve an exported run configuration to a runnable entry.

    The catalog entry supplies S*, probe states, samplers and configurations;
    every component present in `fixture_spec` (model, transforms, kernel,
    witness, capacity, expected) replaces the catalog's when it differs.
    """
    name = data.get("fixture")
    if not name:
        raise ConfigError("run configuration names no fixture", path=path, field="fixture")
    try:
        entry = get_fixture(str(name))
    except KeyError as e:
        raise ConfigError(str(e.args[0]), path=path, field="fixture") from e
    spec = data.get("fixture_spec")
    if spec is None:
        return entry
    if not isinstance(spec, Mapping):
        raise ConfigError("fixture_spec must be a mapping", path=path, field="fixture_spec")
    changes: dict[str, Any] = {}
    for key, (attr, dump, build) in _SPEC_FIELDS.items():
        if key not in spec or jsonable(spec[key]) == jsonable(dump(entry)):
            continue
        try:
            changes[attr] = build(spec[key])
        except (KeyError, TypeError, ValueError, AttributeError) as e:
            raise ConfigError(f"fixture_spec {key} is invalid: {e}", path=path,
                              field=f"fixture_spec.{key}") from e
    if "expected" in spec:
        expected = spec["expected"]
        if not isinstance(expected, Mapping) or set(expected) != set(VERDICT_KEYS):
            raise ConfigError(f"fixture_spec expected must map {', '.join(VERDICT_KEYS)} to booleans",
                              path=path, field="fixture_spec.expected")
        changes["expected"] = {k: bool(expected[k]) for k in VERDICT_KEYS}
    if changes:
        log.info("fixture=%s rebuilt=%s", entry.name, ",".join(sorted(changes)))
    return replace(entry, **changes)


def minimality_expected() -> dict[str, dict[str, bool]]:
    return {name: dict(get_fixture(name).expected) for name in MINIMALITY_FIXTURES}


def capacity_witness_level(report: CertificateReport) -> Optional[int]:
    """Complexity n of the first over-bound configuration in a capacity-fixture report."""
    cap = report.child("capacity")
    if cap is None or not cap.witnesses:
        return None
    return CAPACITY_SCHEDULE[int(cap.witnesses[0]["index"])]
