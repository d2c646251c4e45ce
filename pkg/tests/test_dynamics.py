"""Kernels, closure certificate and seeded simulation."""

import csv
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_env, make_model
from lib.errors import CounterOverflow, DomainError, EmptyAdmissibleSet
from lib.rng import make_rng
from modules.structure.dynamics import (
    CSV_COLUMNS,
    State,
    Trajectory,
    constant_kernel,
    check_closure,
    counter_kernel,
    drift_chain_kernel,
    empirical_risk,
    empirical_risk_posterior,
    identity_kernel,
    kernel_from_dict,
    point_states,
    simulate,
    step,
    table_kernel,
    write_trajectory_csv,
)
from modules.structure.memory import MemorySpec
from modules.structure.metamodel import EnvironmentFamily, identity_transform
from modules.structure.regimes import Evaluator, EvaluatorFamily, RegimeWeights, SwitchingOperator


def test_counter_kernel_steps_and_overflows():
    k = counter_kernel(bound=3)
    rng = make_rng(0)
    s = State.at_counter(0)
    seen = [s.counter]
    for _ in range(3):
        s = step(k, s, None, rng)
        seen.append(s.counter)
    assert seen == [0, 1, 2, 3]
    with pytest.raises(CounterOverflow):
        step(k, s, None, rng)
    with pytest.raises(DomainError):
        step(k, State.point(1), None, rng)


def test_table_rows_must_sum_to_one():
    with pytest.raises(ValueError):
        table_kernel({0: {"*": [(0, 0.5), (1, 0.4)]}})


def test_drift_chain_rows_and_absorbing_zero():
    k = drift_chain_kernel(3, 0.9)
    succ = dict((s.label(), p) for s, p in k.successors(State.point(2), None))
    assert succ == pytest.approx({"1": 0.9, "2": 0.1})
    assert [(s.label(), p) for s, p in k.successors(State.point(0), None)] == [("0", 1.0)]


def test_kernel_from_dict_round_trip():
    for k in (identity_kernel(), constant_kernel(1), counter_kernel(7), drift_chain_kernel(4, 0.8)):
        assert kernel_from_dict(k.to_dict()).to_dict() == k.to_dict()
    with pytest.raises(ValueError):
        kernel_from_dict({"kind": "teleport"})


def test_closure_exhaustive_pass_and_fail():
    s_star = point_states([0, 1])
    assert check_closure(identity_kernel(), s_star).passed
    report = check_closure(constant_kernel(2), s_star)
    assert not report.passed and report.mode == "exhaustive"
    assert report.witnesses[0] == {"state": "0", "observation": None, "successor": "2"}


def test_closure_over_empty_set_is_refused():
    with pytest.raises(EmptyAdmissibleSet):
        check_closure(identity_kernel(), frozenset())


def test_closure_sampled_on_a_predicate():
    bounded = lambda s: s.counter is not None and s.counter <= 10  # noqa: E731
    sampler = lambda rng: State.at_counter(int(rng.integers(0, 11)))  # noqa: E731
    report = check_closure(counter_kernel(), bounded, n_probe=500, seed=1, state_sampler=sampler)
    assert not report.passed
    assert report.mode == "sampled"
    assert report.witnesses[0]["state"] == "10"
    assert report.evidence["sample_count"] == 500
    with pytest.raises(ValueError):
        check_closure(counter_kernel(), bounded)


def test_simulation_is_seed_deterministic(model):
    t = identity_transform()
    a = simulate(model, t, identity_kernel(), State.point(0, "h_a"), 20, seed=5)
    b = simulate(model, t, identity_kernel(), State.point(0, "h_a"), 20, seed=5)
    assert a == b
    assert a.horizon == 20 and len(a.states) == 21


def test_simulated_risk_matches_the_evaluator(model):
    traj = simulate(model, identity_transform(), identity_kernel(), State.point(0, "h_a"), 10, seed=0)
    assert empirical_risk(traj) == pytest.approx(0.2)
    assert set(traj.regimes) == {1}


def test_switching_records_sampled_regimes():
    ev1 = Evaluator.constant_rows("l1", {"h_a": 0.0, "h_b": 0.0})
    ev2 = Evaluator.constant_rows("l2", {"h_a": 1.0, "h_b": 1.0})
    m = make_model(EvaluatorFamily((ev1, ev2), None, {"*": RegimeWeights((1.0, 0.0))}))
    traj = simulate(m, identity_transform(), identity_kernel(), State.point(0, "h_a"), 50, seed=2,
                    switching=SwitchingOperator.dirac(2, 2))
    assert set(traj.regimes) == {2}
    assert empirical_risk(traj) == 1.0


def test_contexts_follow_the_schedule():
    env = make_env(context_schedule=("c1", "c2"))
    m = make_model(environments=EnvironmentFamily((env,)))
    traj = simulate(m, identity_transform(), identity_kernel(), State.point(0, "h_a"), 4, seed=0)
    assert traj.contexts == ("c1", "c2", "c1", "c2")


def test_append_memory_grows_along_the_trajectory():
    m = make_model(memory=MemorySpec("append"))
    traj = simulate(m, identity_transform(), identity_kernel(), State.point(0, "h_a"), 6, seed=3)
    assert set(traj.states[-1].memory.keys) == {f"z:{z}" for z in traj.observations}


def test_lyapunov_values_are_recorded(model):
    traj = simulate(model, identity_transform(), counter_kernel(), State.at_counter(0, "h_a"), 5, seed=0,
                    lyapunov=lambda s: s.level)
    assert traj.lyapunov_values == (0.0, 1.0, 2.0, 3.0, 4.0, 5.0)


def test_horizon_must_be_positive(model):
    with pytest.raises(ValueError):
        simulate(model, identity_transform(), identity_kernel(), State.point(0), 0, seed=0)


def _fixed(h, losses):
    states = tuple(State.point(0, h) for _ in range(len(losses) + 1))
    return Trajectory(0, states, tuple([None] * len(losses)), tuple([1] * len(losses)), tuple(losses))


def test_empirical_risk_and_posterior_average():
    ta = _fixed("h_a", [0.1, 0.5])
    tb = _fixed("h_b", [0.0, 0.2])
    assert empirical_risk(ta) == pytest.approx(0.3)
    assert empirical_risk_posterior([ta, tb], {"h_a": 0.0, "h_b": 1.0}) == pytest.approx(0.1)
    assert empirical_risk_posterior([ta, tb], {"h_a": 0.5, "h_b": 0.5}) == pytest.approx(0.2)
    with pytest.raises(ValueError):
        empirical_risk_posterior([ta], {"h_b": 1.0})


def test_trajectory_rejects_losses_outside_unit_interval():
    with pytest.raises(ValueError):
        _fixed("h", [1.5])


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 31 - 1), horizon=st.integers(1, 30))
def test_empirical_risk_lies_in_unit_interval(seed, horizon):
    m = make_model()
    traj = simulate(m, identity_transform(), drift_chain_kernel(5, 0.5), State.point(5, "h_b"), horizon, seed)
    assert 0.0 <= empirical_risk(traj) <= 1.0
    assert all(0 <= s.level <= 5 for s in traj.states)


def test_trajectory_csv_layout(tmp_path, model):
    traj = simulate(model, identity_transform(), identity_kernel(), State.point(0, "h_a"), 3, seed=0)
    path = write_trajectory_csv(traj, tmp_path / "trajectory.csv")
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    assert list(rows[0]) == list(CSV_COLUMNS)
    assert len(rows) == 4
    assert rows[0]["loss"] == "" and float(rows[1]["loss"]) == pytest.approx(0.2)


def test_drift_chain_simulation_descends(model):
    traj = simulate(model, identity_transform(), drift_chain_kernel(10, 0.9), State.point(10, "h_a"), 100, seed=7,
                    lyapunov=lambda s: s.level)
    values = traj.lyapunov_values
    assert values[0] == 10.0
    assert sum(values) / len(values) < 10.0


def test_exhaustive_closure_pass_keeps_simulation_inside(model):
    kernel = drift_chain_kernel(10, 0.9)
    s_star = point_states(range(11), "h_a")
    assert check_closure(kernel, s_star).passed
    traj = simulate(model, identity_transform(), kernel, State.point(10, "h_a"), 2000, seed=11)
    assert all(s in s_star for s in traj.states)


def test_sampled_successor_frequencies_match_the_table():
    kernel = drift_chain_kernel(10, 0.9)
    rng = make_rng(3)
    n = 20_000
    down = sum(step(kernel, State.point(5), None, rng).level == 4 for _ in range(n))
    assert abs(down / n - 0.9) <= 4 * (0.9 * 0.1 / n) ** 0.5


def _escape_on_z1():
    """State 0 stays put except under observation z1, which sends it to 7."""
    return table_kernel({0: {"*": [(0, 1.0)], "z1": [(7, 1.0)]}, 7: {"*": [(7, 1.0)]}})


def test_closure_checks_every_observation_the_environment_emits():
    kernel, s_star = _escape_on_z1(), point_states([0])
    assert check_closure(kernel, s_star).passed
    fam = EnvironmentFamily((make_env(),))
    report = check_closure(kernel, s_star, environments=fam)
    assert not report.passed and report.mode == "exhaustive"
    assert report.witnesses == ({"state": "0", "observation": "z1", "successor": "7"},)
    assert report.evidence["transitions"] == 2


def test_closure_skips_observations_without_mass():
    fam = EnvironmentFamily((make_env(probs=(1.0, 0.0)),))
    assert check_closure(_escape_on_z1(), point_states([0]), environments=fam).passed


def test_closure_sampled_under_the_environment_law():
    fam = EnvironmentFamily((make_env(),))
    admissible = lambda s: s.level == 0  # noqa: E731
    report = check_closure(_escape_on_z1(), admissible, n_probe=200, seed=3,
                           state_sampler=lambda rng: State.point(0), environments=fam)
    assert not report.passed
    assert {w["observation"] for w in report.witnesses} == {"z1"}


def test_sampled_closure_counts_only_admissible_draws():
    only_zero = lambda s: s.level == 0  # noqa: E731
    sampler = lambda rng: State.point(int(rng.integers(0, 100)))  # noqa: E731
    report = check_closure(identity_kernel(), only_zero, n_probe=1000, seed=2, state_sampler=sampler)
    n = report.evidence["sample_count"]
    assert report.passed
    assert report.evidence["probes_drawn"] == 1000
    assert 0 < n < 50
    assert report.evidence["confidence_radius"] == pytest.approx(math.log(20.0) / n)


def test_sampled_closure_with_no_admissible_draw_is_refused():
    with pytest.raises(EmptyAdmissibleSet):
        check_closure(identity_kernel(), lambda s: False, n_probe=50, state_sampler=lambda rng: State.point(1))
