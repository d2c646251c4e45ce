"""Bound formulas, program prior and the KL-length identity."""

import csv
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_model
from modules.certification.bounds import (
    azuma_drift_term,
    bound_validity_experiment,
    evaluate_bound,
    kl_length_identity_check,
    pacbayes_basic,
    program_log_normalizer,
    program_prior,
    structural_bound,
    structural_bound_trajectory,
    sweep_bound,
    unified_bound,
    write_rows_csv,
)


def test_pacbayes_basic_reference_value():
    rep = pacbayes_basic(0.1, 2.0, 100, 0.05)
    assert rep.confidence_term == pytest.approx(0.158046, abs=1e-6)
    assert rep.total == pytest.approx(0.258046, abs=1e-6)


def test_pacbayes_confidence_halves_when_n_quadruples():
    small = pacbayes_basic(0.1, 2.0, 100, 0.05).confidence_term
    large = pacbayes_basic(0.1, 2.0, 400, 0.05).confidence_term
    assert large == pytest.approx(small / 2.0)


def test_pacbayes_vanishes_with_many_samples():
    assert pacbayes_basic(0.0, 0.0, 10 ** 6, 0.5).total < 1e-3


@pytest.mark.parametrize("kwargs", [
    {"kl": -1.0}, {"n": 0}, {"delta": 0.0}, {"delta": 1.0},
])
def test_pacbayes_rejects_bad_inputs(kwargs):
    args = {"empirical_risk": 0.1, "kl": 1.0, "n": 10, "delta": 0.05, **kwargs}
    with pytest.raises(ValueError):
        pacbayes_basic(**args)


def test_structural_bound_reference_value():
    rep = structural_bound(0.1, 2.0, 100, 0.05, L=0.5, B=1.0, V0=0.0)
    assert rep.confidence_term == pytest.approx(0.200900, abs=1e-6)
    assert rep.drift_term == pytest.approx(1.0)
    assert rep.total == pytest.approx(1.300900, abs=1e-6)
    assert rep.to_dict()["parameters"]["L"] == 0.5


def test_structural_bound_needs_two_samples():
    with pytest.raises(ValueError):
        structural_bound(0.1, 0.0, 1, 0.05, 0.0, 1.0, 0.0)


def test_trajectory_drift_uses_measured_means():
    rep = structural_bound_trajectory(0.1, 2.0, 100, 0.05, 0.5, [1.0, 3.0], alpha=0.5, beta=1.0, V0=1.0)
    assert rep.drift_term == pytest.approx(2.0)
    assert rep.parameters["B"] == 2.0
    assert rep.parameters["drift_cap"] == pytest.approx(4.0)
    with pytest.raises(ValueError):
        structural_bound_trajectory(0.1, 2.0, 100, 0.05, 0.5, [])


def test_unified_bound_sums_its_terms():
    rep = unified_bound(0.1, 0.2, 2.0, 0.1, 1.0, [0.0])
    assert rep.shift_term == pytest.approx(0.2)
    assert rep.total == pytest.approx(0.5)
    assert unified_bound(0.1, 0.2, 0.0, 0.0, 0.5, [1.0, 3.0]).drift_term == pytest.approx(1.0)


def test_azuma_drift_term():
    assert azuma_drift_term(1.0, 1.0, 100, 0.05) == pytest.approx(0.543241, abs=1e-6)


@settings(max_examples=50, deadline=None)
@given(emp=st.floats(0.0, 1.0), kl=st.floats(0.0, 50.0), n=st.integers(2, 10 ** 5),
       delta=st.floats(0.001, 0.5))
def test_structural_bound_dominates_empirical_risk(emp, kl, n, delta):
    rep = structural_bound(emp, kl, n, delta, 0.0, 1.0, 0.0)
    assert rep.total >= emp
    assert rep.total == pytest.approx(rep.empirical_risk + rep.confidence_term + rep.drift_term)


def test_program_prior_from_bit_lengths():
    assert program_prior([3, 5]) == pytest.approx([0.8, 0.2])
    assert program_log_normalizer([3, 5]) == pytest.approx(math.log(2 ** -3 + 2 ** -5))


def test_program_prior_prefers_shorter_models():
    small, large = make_model(), make_model(hypotheses=("h_a", "h_b", "h_c", "h_d"))
    p = program_prior([small, large])
    assert p[0] > p[1]
    assert p.sum() == pytest.approx(1.0)


def test_kl_length_identity_on_a_point_mass():
    lhs, rhs = kl_length_identity_check([1.0, 0.0], [3, 5])
    assert lhs == pytest.approx(0.223144, abs=1e-6)
    assert rhs == pytest.approx(lhs, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(q=st.lists(st.floats(0.0, 1.0), min_size=2, max_size=6).filter(lambda v: sum(v) > 1e-3),
       bits=st.lists(st.integers(1, 40), min_size=6, max_size=6))
def test_kl_length_identity_holds(q, bits):
    total = sum(q)
    q = [x / total for x in q]
    q[-1] = max(0.0, 1.0 - sum(q[:-1]))
    lhs, rhs = kl_length_identity_check(q, bits[:len(q)])
    assert lhs == pytest.approx(rhs, abs=1e-9)


def test_evaluate_and_sweep(tmp_path):
    rep = evaluate_bound("structural", {"empirical_risk": 0.1, "kl": 2, "n": 100, "delta": 0.05,
                                        "L": 0.5, "B": 1, "V0": 0})
    assert rep.total == pytest.approx(1.3009, abs=1e-4)
    with pytest.raises(ValueError):
        evaluate_bound("structural", {"empirical_risk": 0.1})
    rows = sweep_bound("pacbayes_basic", {"empirical_risk": [0.1], "kl": [2.0], "n": [100, 400], "delta": [0.05]})
    assert [r["n"] for r in rows] == [100, 400]
    assert rows[1]["confidence_term"] == pytest.approx(rows[0]["confidence_term"] / 2.0)
    path = write_rows_csv(rows, tmp_path / "sweep.csv")
    with open(path, newline="", encoding="utf-8") as f:
        assert len(list(csv.DictReader(f))) == 2


def test_bound_covers_true_risk_in_repeated_trials():
    result = bound_validity_experiment([0.2, 0.5, 0.6], n=200, delta=0.05, trials=50, seed=11)
    assert result["coverage"] >= 0.95
    assert result["kl"] == pytest.approx(math.log(3))
