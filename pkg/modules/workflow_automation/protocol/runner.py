"""
Matched-budget growth protocol: an SMGI arm with certified context switching
against a single-evaluator baseline tuned on a grid, both run at every level of
a growth axis with the same seeds and step budget.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional, Sequence, Union

import numpy as np

from lib.reports import CertificateReport, jsonable
from lib.rng import child_seeds
from lib.workers import ordered_map
from modules.certification.bounds import structural_bound
from modules.certification.certificates import (
    VERDICT_KEYS,
    CapacityFunctional,
    LyapunovWitness,
    check_bundle,
    first_failing,
    verdict_vector,
)
from modules.structure.dynamics import (
    State,
    TransitionKernel,
    drift_chain_kernel,
    empirical_risk,
    point_states,
    simulate,
)
from modules.structure.metamodel import (
    Environment,
    EnvironmentFamily,
    HypothesisClassSpec,
    MetaModel,
    PriorSpec,
    RepresentationSpec,
    identity_transform,
)
from modules.structure.regimes import (
    AuditCase,
    Evaluator,
    EvaluatorFamily,
    OrderingConstraint,
    ProtectedCore,
    RegimeWeights,
    cert_update,
    grid_single_evaluators,
)

from .growth import GrowthAxis, active_contexts, family_at_level, risk_rows

log = logging.getLogger("smgi.protocol")

ARMS = ("smgi", "baseline")
CSV_FIELDS = ("level", "arm", "obligation", "pass", "margin")


@dataclass(frozen=True)
class ProtocolBudget:
    n_steps: int = 50
    n_seeds: int = 20

    def __post_init__(self) -> None:
        if self.n_steps < 2:
            raise ValueError("protocol budget needs n_steps >= 2")
        if self.n_seeds < 1:
            raise ValueError("protocol budget needs n_seeds >= 1")

    @property
    def sample_count(self) -> int:
        return self.n_steps * self.n_seeds

    def to_dict(self) -> dict:
        return {"n_steps": self.n_steps, "n_seeds": self.n_seeds}


@dataclass(frozen=True)
class ProtocolConfig:
    """One arm: the model (its environments are the growth base), dynamics and certificates."""

    arm: str
    model: MetaModel
    kernel: TransitionKernel
    witness: LyapunovWitness
    s_star: frozenset
    s0: State
    capacity: CapacityFunctional
    budget: ProtocolBudget = field(default_factory=ProtocolBudget)
    lipschitz_ell: float = 1.0
    loss_lipschitz: float = 0.05
    delta: float = 0.05
    grid_per_axis: int = 21
    divergence: str = "squared_euclidean"

    def __post_init__(self) -> None:
        if self.arm not in ARMS:
            raise ValueError(f"arm must be one of {ARMS}")
        if self.arm == "baseline" and self.model.evaluators.K != 1:
            raise ValueError("the baseline arm is a single-evaluator (K = 1) model")
        if len(self.model.hypothesis_class.members) < 2:
            raise ValueError("the protocol needs an enumerated class with at least two hypotheses")
        if self.s0 not in self.s_star:
            raise ValueError("s0 must lie in the admissible set")
        if self.grid_per_axis < 2:
            raise ValueError("grid_per_axis must be >= 2")


@dataclass
class ArmResult:
    arm: str
    level: float
    verdicts: dict[str, bool]
    first_failed: Optional[str]
    margins: dict[str, float]
    empirical_risk: float
    bound_total: float
    violation_rate: float
    evaluator_weights: dict[str, list[float]]
    bundle: CertificateReport
    runtime_s: float = 0.0

    @property
    def passed(self) -> bool:
        return self.first_failed is None

    def to_dict(self) -> dict:
        return {
            "arm": self.arm,
            "level": self.level,
            "verdicts": dict(self.verdicts),
            "first_failed": self.first_failed,
            "margins": dict(self.margins),
            "empirical_risk": self.empirical_risk,
            "bound_total": self.bound_total,
            "violation_rate": self.violation_rate,
            "evaluator_weights": self.evaluator_weights,
        }


@dataclass
class ProtocolReport:
    axis: GrowthAxis
    budget: ProtocolBudget
    seed: int
    levels: list[dict[str, ArmResult]]
    first_failure: dict[str, Optional[dict]]
    anomalies: list[dict]

    def arm_results(self, arm: str) -> list[ArmResult]:
        return [lv[arm] for lv in self.levels]

    def to_dict(self) -> dict:
        """Deterministic summary; runtimes are left out."""
        return {
            "axis": self.axis.to_dict(),
            "budget": self.budget.to_dict(),
            "seed": self.seed,
            "levels": [{"level": lv["smgi"].level, "arms": {a: lv[a].to_dict() for a in ARMS}}
                       for lv in self.levels],
            "first_failure": self.first_failure,
            "anomalies": self.anomalies,
        }

    def to_json(self) -> str:
        return json.dumps(jsonable(self.to_dict()), sort_keys=True, indent=2, allow_nan=False)

    def csv_rows(self) -> list[dict]:
        rows = []
        for lv in self.levels:
            for arm in ARMS:
                res = lv[arm]
                for ob in VERDICT_KEYS:
                    rows.append({"level": repr(res.level), "arm": arm, "obligation": ob,
                                 "pass": str(res.verdicts[ob]).lower(), "margin": repr(res.margins[ob])})
        return rows

    def write_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=CSV_FIELDS, lineterminator="\n")
            writer.writeheader()
            writer.writerows(self.csv_rows())
        return path

    def write_json(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json() + "\n", encoding="utf-8")
        return path


def derived_core(family: EnvironmentFamily, hypotheses: Sequence[str], axis: GrowthAxis) -> Optional[ProtectedCore]:
    """
    Strict risk orderings of each active context's regime row become ordering
    constraints audited in that context. None when no ordering is strict.
    """
    rows = risk_rows(family, axis)
    constraints, cases = [], []
    for c in active_contexts(family, axis):
        row = rows.get(c)
        if row is None:
            continue
        cases.append(AuditCase(context=c))
        for i, j in ((i, j) for i in range(len(hypotheses)) for j in range(len(hypotheses)) if i != j):
            if row[i] < row[j]:
                constraints.append(OrderingConstraint(f"{c}:{hypotheses[i]}<{hypotheses[j]}",
                                                      hypotheses[i], hypotheses[j], c))
    if not constraints:
        return None
    return ProtectedCore(tuple(constraints), tuple(cases))


def _restrict(core: Optional[ProtectedCore], context: str) -> Optional[ProtectedCore]:
    if core is None:
        return None
    cons = tuple(c for c in core.constraints if c.context == context)
    if not cons:
        return None
    return ProtectedCore(cons, tuple(a for a in core.audit_set if a.context == context))


def smgi_evaluators(family: EnvironmentFamily, hypotheses: Sequence[str], axis: GrowthAxis,
                    core: Optional[ProtectedCore], divergence: str = "squared_euclidean") -> EvaluatorFamily:
    """
    One evaluator per axis context (reference = regime 1). Each context's
    switching row starts at its own regime and is passed through the certified
    update against that context's core constraints.
    """
    rows = risk_rows(family, axis)
    contexts = list(rows)
    evs = tuple(Evaluator.constant_rows(f"l_{c}", dict(zip(hypotheses, rows[c]))) for c in contexts)
    plain = EvaluatorFamily(evs)
    mixing = {}
    for k, c in enumerate(contexts, start=1):
        candidate = RegimeWeights.one_hot(k, len(evs))
        local = _restrict(core, c)
        mixing[c] = candidate if local is None else cert_update(local, plain, candidate, divergence)[0]
    return EvaluatorFamily(evs, core, mixing)


def tuned_baseline(family: EnvironmentFamily, hypotheses: Sequence[str], axis: GrowthAxis,
                   core: Optional[ProtectedCore], per_axis: int = 21) -> EvaluatorFamily:
    """
    Best single evaluator on a per_axis^H grid: the risk vector maximizing the
    smallest ordering gap of the core (the reference row when nothing is protected).
    """
    if core is None:
        best = np.asarray(risk_rows(family, axis)[axis.reference_context], dtype=float)
    else:
        grid = grid_single_evaluators(len(hypotheses), per_axis)
        idx = {h: i for i, h in enumerate(hypotheses)}
        gaps = np.stack([grid[:, idx[c.higher]] - grid[:, idx[c.lower]] for c in core.constraints], axis=1)
        best = grid[int(np.argmax(gaps.min(axis=1)))]
    ev = Evaluator.constant_rows("tuned", {h: float(v) for h, v in zip(hypotheses, best)})
    return EvaluatorFamily((ev,), core, {"*": RegimeWeights((1.0,))})


def _margins(bundle: CertificateReport, lipschitz_ell: float) -> dict[str, float]:
    u1, u4, u5 = bundle.child("closure"), bundle.child("stability"), bundle.child("capacity")
    core = bundle.child("evaluative_invariance")
    if core is not None:
        vals = [v for ch in core.children for k, v in ch.evidence.items() if k.startswith("margin.")]
        inv = float(min(vals)) if vals else 0.0
    else:
        inv = float(lipschitz_ell - bundle.child("evaluator_shift").evidence["max_ratio"])
    return {
        "closure": -float(u1.evidence.get("violations", 0.0)),
        "stability": -float(u4.evidence["max_excess"]),
        "capacity": float(u5.evidence["bound"] - u5.evidence["achieved"]) if math.isfinite(u5.evidence["bound"])
        else 0.0,
        "evaluative_invariance": inv,
    }


def _violated_contexts(core: Optional[ProtectedCore], evals: EvaluatorFamily) -> set[str]:
    if core is None:
        return set()
    return {con.context for con in core.constraints if not core.holds(con, core.margin(con, evals))}


def _run_arm(cfg: ProtocolConfig, family: EnvironmentFamily, core: Optional[ProtectedCore],
             axis: GrowthAxis, level: float, seeds: Sequence[int], seed: int) -> ArmResult:
    t0 = time.perf_counter()
    hyps = cfg.model.hypothesis_class.members
    if cfg.arm == "smgi":
        evals = smgi_evaluators(family, hyps, axis, core, cfg.divergence)
    else:
        evals = tuned_baseline(family, hyps, axis, core, cfg.grid_per_axis)
    model = replace(cfg.model, environments=family, evaluators=evals)
    t = identity_transform()
    bundle = check_bundle(model, t, cfg.kernel, cfg.witness, cfg.lipschitz_ell, cfg.capacity, cfg.s_star,
                          core=core, seed=seed)
    verdicts = verdict_vector(bundle)

    violated = _violated_contexts(core, evals)
    trajs = [simulate(model, t, cfg.kernel, cfg.s0, cfg.budget.n_steps, sd, lyapunov=cfg.witness) for sd in seeds]
    steps = sum(tr.horizon for tr in trajs)
    rate = sum(c in violated for tr in trajs for c in tr.contexts) / steps
    emp = float(np.mean([empirical_risk(tr) for tr in trajs]))
    bound = structural_bound(emp, math.log(len(hyps)), cfg.budget.sample_count, cfg.delta, cfg.loss_lipschitz,
                             cfg.witness.non_explosion_constant, cfg.witness.value(cfg.s0))
    return ArmResult(
        arm=cfg.arm,
        level=level,
        verdicts=verdicts,
        first_failed=first_failing(verdicts),
        margins=_margins(bundle, cfg.lipschitz_ell),
        empirical_risk=emp,
        bound_total=bound.total,
        violation_rate=rate,
        evaluator_weights={c: list(w.weights) for c, w in sorted((evals.mixing or {}).items())},
        bundle=bundle,
        runtime_s=time.perf_counter() - t0,
    )


def _anomalies(results: list[ArmResult]) -> tuple[Optional[dict], list[dict]]:
    first, anomalies = None, []
    for res in results:
        if first is None and not res.passed:
            first = {"level": res.level, "obligation": res.first_failed}
        elif first is not None and res.passed:
            anomalies.append({"arm": res.arm, "level": res.level, "after_failure_at": first["level"]})
            log.warning("protocol arm=%s passes at level=%g after failing at level=%g",
                        res.arm, res.level, first["level"])
    return first, anomalies


def run_protocol(smgi_config: ProtocolConfig, baseline_config: ProtocolConfig, axis: GrowthAxis,
                 budget: Optional[ProtocolBudget] = None, seed: int = 0, workers: int = 1) -> ProtocolReport:
    """
    Run both arms at every growth level with identical seeds and budgets.

    Args:
        smgi_config: arm 'smgi'; its model's environments are the base family.
        baseline_config: arm 'baseline' (K = 1) over the same base family.
        axis: growth axis with strictly increasing levels.
        budget: when given, replaces both arms' budgets.
        seed: base seed; trajectory seeds are derived once and shared by both arms.
        workers: levels run in parallel.

    Returns:
        ProtocolReport with per-level verdicts, the first failure per arm and
        any non-monotone failures recorded as anomalies.
    """
    if smgi_config.arm != "smgi" or baseline_config.arm != "baseline":
        raise ValueError("run_protocol takes an 'smgi' and a 'baseline' configuration")
    if budget is not None:
        smgi_config, baseline_config = replace(smgi_config, budget=budget), replace(baseline_config, budget=budget)
    if smgi_config.budget != baseline_config.budget:
        raise ValueError("arms must share one step budget")
    base = smgi_config.model.environments
    if base.to_dict() != baseline_config.model.environments.to_dict():
        raise ValueError("arms must start from the same environment family")
    if smgi_config.model.hypothesis_class.members != baseline_config.model.hypothesis_class.members:
        raise ValueError("arms must share the hypothesis class")
    seeds = child_seeds(seed, smgi_config.budget.n_seeds)
    hyps = smgi_config.model.hypothesis_class.members

    def run_level(level: float) -> dict[str, ArmResult]:
        family = family_at_level(base, axis, level)
        core = derived_core(family, hyps, axis)
        out = {cfg.arm: _run_arm(cfg, family, core, axis, level, seeds, seed)
               for cfg in (smgi_config, baseline_config)}
        log.info("protocol axis=%s level=%g smgi=%s baseline=%s", axis.kind, level,
                 out["smgi"].first_failed or "pass", out["baseline"].first_failed or "pass")
        return out

    levels = ordered_map(run_level, list(axis.levels), workers)
    first_failure, anomalies = {}, []
    for arm in ARMS:
        first, anom = _anomalies([lv[arm] for lv in levels])
        first_failure[arm] = first
        anomalies.extend(anom)
    return ProtocolReport(axis, smgi_config.budget, int(seed), levels, first_failure, anomalies)


DEFAULT_LEVELS = {
    "regime_switch_frequency": (0.0, 0.1, 0.5, 0.9),
    "evaluator_antagonism": (0.0, 0.25, 0.5, 0.75, 1.0),
}


def default_base_family(kind: str, axis: Optional[GrowthAxis] = None) -> EnvironmentFamily:
    """
    Frequency axis: the adversarial context (reversed risks) starts at probability 0.
    Antagonism axis: both contexts at 1/2 with identical rows at level 0.
    """
    axis = axis or GrowthAxis(kind, DEFAULT_LEVELS[kind])
    ref, adv = axis.reference_context, axis.adversarial_context
    benign_row = (0.2, 0.8)
    if kind == "regime_switch_frequency":
        probs, rows = {ref: 1.0, adv: 0.0}, {ref: benign_row, adv: (0.8, 0.2)}
    else:
        probs, rows = {ref: 0.5, adv: 0.5}, {ref: benign_row, adv: benign_row}
    env = Environment("e0", ("z0", "z1"), {"*": (0.5, 0.5)}, context_probs=probs)
    return EnvironmentFamily((env,), regime_risks=rows)


def default_protocol_configs(kind: str, budget: Optional[ProtocolBudget] = None,
                             levels: Optional[Sequence[float]] = None, n_chain: int = 3,
                             capacity_bits: float = 8.0) -> tuple[ProtocolConfig, ProtocolConfig, GrowthAxis]:
    """Matched SMGI and baseline arms over a down-drift chain on {0..n_chain}."""
    axis = GrowthAxis(kind, tuple(levels) if levels is not None else DEFAULT_LEVELS[kind])
    family = default_base_family(kind, axis)
    hyps = ("h_a", "h_b")
    rows = risk_rows(family, axis)

    def model(evals: EvaluatorFamily) -> MetaModel:
        rep = RepresentationSpec(("z0", "z1"), "reals", {"kind": "table", "table": {"z0": 0.0, "z1": 1.0}})
        return MetaModel(rep, HypothesisClassSpec.enumerated(hyps), PriorSpec(), evals, family)

    smgi_evals = EvaluatorFamily(tuple(Evaluator.constant_rows(f"l_{c}", dict(zip(hyps, r))) for c, r in rows.items()))
    base_evals = EvaluatorFamily((Evaluator.constant_rows("tuned", dict(zip(hyps, rows[axis.reference_context]))),))
    common: dict[str, Any] = dict(
        kernel=drift_chain_kernel(n_chain, 0.9),
        witness=LyapunovWitness.level(alpha=0.09, beta=0.0, v_max=float(n_chain)),
        s_star=point_states(range(n_chain + 1), hyps[0]),
        s0=State.point(n_chain, hyps[0]),
        capacity=CapacityFunctional("log2_cardinality", capacity_bits),
        budget=budget or ProtocolBudget(),
    )
    return (ProtocolConfig("smgi", model(smgi_evals), **common),
            ProtocolConfig("baseline", model(base_evals), **common), axis)
