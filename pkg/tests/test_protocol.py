"""Growth axes and the matched-budget SMGI versus baseline protocol."""

import csv
import json
from dataclasses import replace

import pytest

from lib.errors import ConfigError
from modules.workflow_automation.protocol import (
    CSV_FIELDS,
    DEFAULT_LEVELS,
    GrowthAxis,
    ProtocolBudget,
    active_contexts,
    adversarial_frequency,
    antagonistic_row,
    default_base_family,
    default_protocol_configs,
    derived_core,
    family_at_level,
    grow_family,
    protocol_settings,
    run_protocol,
    smgi_evaluators,
    tuned_baseline,
)

HYPS = ("h_a", "h_b")
SMALL = ProtocolBudget(n_steps=5, n_seeds=2)


def test_growth_axis_validation():
    with pytest.raises(ValueError):
        GrowthAxis("volume", (0.0,))
    with pytest.raises(ValueError):
        GrowthAxis("evaluator_antagonism", (0.5, 0.5))
    with pytest.raises(ValueError):
        GrowthAxis("evaluator_antagonism", (0.0, 1.5))
    with pytest.raises(ValueError):
        GrowthAxis("evaluator_antagonism", (0.0,), "same", "same")
    axis = GrowthAxis("regime_switch_frequency", (0, 0.5))
    assert GrowthAxis.from_dict(axis.to_dict()) == axis


def test_antagonistic_row_interpolates_to_the_reversal():
    ref = (0.2, 0.8)
    assert antagonistic_row(ref, ref, 0.0) == pytest.approx(ref)
    assert antagonistic_row(ref, ref, 1.0) == pytest.approx((0.8, 0.2))
    assert antagonistic_row(ref, ref, 0.5) == pytest.approx((0.5, 0.5))


@pytest.mark.parametrize("kind", sorted(DEFAULT_LEVELS))
def test_level_zero_reproduces_the_base_family(kind):
    axis = GrowthAxis(kind, DEFAULT_LEVELS[kind])
    base = default_base_family(kind, axis)
    assert family_at_level(base, axis, 0.0) is base
    grown = grow_family(base, axis)
    assert len(grown) == len(axis.levels)
    assert grown[0] is base
    with pytest.raises(ValueError):
        family_at_level(base, axis, 1.5)


def test_antagonism_moves_only_the_adversarial_row():
    axis = GrowthAxis("evaluator_antagonism", (0.0, 0.75))
    fam = family_at_level(default_base_family(axis.kind, axis), axis, 0.75)
    assert fam.regime_risks["benign"] == pytest.approx((0.2, 0.8))
    assert fam.regime_risks["adversarial"] == pytest.approx((0.65, 0.35))


def test_frequency_growth_raises_the_adversarial_share():
    axis = GrowthAxis("regime_switch_frequency", (0.0, 0.5))
    base = default_base_family(axis.kind, axis)
    assert active_contexts(base, axis) == ("benign",)
    grown = family_at_level(base, axis, 0.5)
    assert grown.instances[0].context_probs == pytest.approx({"benign": 0.5, "adversarial": 0.5})
    assert active_contexts(grown, axis) == ("benign", "adversarial")
    assert adversarial_frequency(grown, axis, n_draws=20_000, seed=1) == pytest.approx(0.5, abs=0.02)
    assert adversarial_frequency(base, axis, n_draws=1_000, seed=1) == 0.0


def test_derived_core_follows_the_context_orderings():
    axis = GrowthAxis("evaluator_antagonism", (0.0, 1.0))
    base = default_base_family(axis.kind, axis)
    core = derived_core(family_at_level(base, axis, 1.0), HYPS, axis)
    pairs = {(c.context, c.lower, c.higher) for c in core.constraints}
    assert pairs == {("benign", "h_a", "h_b"), ("adversarial", "h_b", "h_a")}
    assert {a.context for a in core.audit_set} == {"benign", "adversarial"}


def test_derived_core_is_empty_when_nothing_is_strict():
    axis = GrowthAxis("evaluator_antagonism", (0.0, 0.5))
    fam = family_at_level(default_base_family(axis.kind, axis), axis, 0.5)
    fam = replace(fam, regime_risks={"benign": (0.5, 0.5), "adversarial": (0.5, 0.5)})
    assert derived_core(fam, HYPS, axis) is None


def test_smgi_evaluators_use_one_regime_per_context():
    axis = GrowthAxis("evaluator_antagonism", (0.0, 1.0))
    fam = family_at_level(default_base_family(axis.kind, axis), axis, 1.0)
    core = derived_core(fam, HYPS, axis)
    evals = smgi_evaluators(fam, HYPS, axis, core)
    assert evals.K == 2
    assert evals.weights_for("benign").weights == pytest.approx((1.0, 0.0))
    assert evals.weights_for("adversarial").weights == pytest.approx((0.0, 1.0))


def test_tuned_baseline_maximizes_the_smallest_gap():
    axis = GrowthAxis("evaluator_antagonism", (0.0,))
    fam = default_base_family(axis.kind, axis)
    evals = tuned_baseline(fam, HYPS, axis, derived_core(fam, HYPS, axis), per_axis=5)
    ev = evals.evaluators[0]
    assert evals.K == 1
    assert ev("h_a", None, "z0") == pytest.approx(0.0)
    assert ev("h_b", None, "z0") == pytest.approx(1.0)


def test_protocol_configs_are_checked():
    smgi, baseline, axis = default_protocol_configs("evaluator_antagonism", SMALL, levels=(0.0,))
    with pytest.raises(ValueError):
        replace(baseline, model=smgi.model)
    with pytest.raises(ValueError):
        run_protocol(baseline, smgi, axis)
    with pytest.raises(ValueError):
        run_protocol(smgi, replace(baseline, budget=ProtocolBudget(6, 2)), axis)
    with pytest.raises(ValueError):
        ProtocolBudget(n_steps=1)


@pytest.fixture(scope="module")
def antagonism_report():
    smgi, baseline, axis = default_protocol_configs("evaluator_antagonism", SMALL, levels=(0.0, 0.5, 0.75, 1.0))
    return run_protocol(smgi, baseline, axis, seed=3)


def test_baseline_fails_once_the_orderings_conflict(antagonism_report):
    rep = antagonism_report
    assert rep.first_failure["smgi"] is None
    assert rep.first_failure["baseline"] == {"level": 0.75, "obligation": "evaluative_invariance"}
    assert rep.anomalies == []
    assert all(r.passed for r in rep.arm_results("smgi"))
    assert [r.passed for r in rep.arm_results("baseline")] == [True, True, False, False]


def test_baseline_violates_the_core_where_smgi_does_not(antagonism_report):
    smgi, baseline = antagonism_report.levels[-1]["smgi"], antagonism_report.levels[-1]["baseline"]
    assert smgi.violation_rate == 0.0
    assert baseline.violation_rate > 0.0
    assert smgi.margins["evaluative_invariance"] > 0 >= baseline.margins["evaluative_invariance"]
    assert smgi.bound_total >= smgi.empirical_risk


def test_frequency_axis_breaks_the_baseline_above_zero():
    smgi, baseline, axis = default_protocol_configs("regime_switch_frequency", SMALL, levels=(0.0, 0.5))
    rep = run_protocol(smgi, baseline, axis, seed=0)
    assert rep.first_failure["smgi"] is None
    assert rep.first_failure["baseline"]["level"] == 0.5


def test_protocol_is_seed_deterministic():
    smgi, baseline, axis = default_protocol_configs("evaluator_antagonism", SMALL, levels=(0.0, 1.0))
    a = run_protocol(smgi, baseline, axis, seed=5).to_json()
    b = run_protocol(smgi, baseline, axis, seed=5, workers=2).to_json()
    assert a == b
    assert "runtime_s" not in a


def test_protocol_csv_and_json(tmp_path, antagonism_report):
    path = antagonism_report.write_csv(tmp_path / "protocol.csv")
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    assert tuple(rows[0]) == CSV_FIELDS
    assert len(rows) == 4 * 2 * 4
    assert {r["pass"] for r in rows} == {"true", "false"}
    data = json.loads(antagonism_report.write_json(tmp_path / "protocol.json").read_text())
    assert [lv["level"] for lv in data["levels"]] == [0.0, 0.5, 0.75, 1.0]


def test_protocol_settings():
    s = protocol_settings({})
    assert s["axis"] == "evaluator_antagonism"
    assert s["levels"] == DEFAULT_LEVELS["evaluator_antagonism"]
    assert (s["n_steps"], s["n_seeds"], s["grid_per_axis"]) == (50, 20, 21)
    assert protocol_settings({"protocol_steps": 1})["n_steps"] == 2
    assert protocol_settings({"protocol_levels": [0, 0.5]})["levels"] == (0.0, 0.5)
    with pytest.raises(ConfigError):
        protocol_settings({"protocol_axis": "volume"})
