"""Counterexample catalog, suites and run-configuration export."""

import json

import pytest

from lib.errors import ConfigError
from modules.certification.certificates import VERDICT_KEYS
from modules.workflow_automation.fixtures import (
    MINIMALITY_FIXTURES,
    capacity_witness_level,
    export_fixture,
    fixture_names,
    get_fixture,
    load_fixture,
    minimality_expected,
    minimality_suite,
    run_fixture,
    run_suite,
    strict_inclusion_suite,
    tooluse_suite,
    tooluse_update,
)


@pytest.fixture(scope="module")
def minimality():
    return minimality_suite(seed=0, n_probe=200, n_mc=200)


def test_catalog_names():
    assert set(MINIMALITY_FIXTURES) <= set(fixture_names())
    assert {"strict_inclusion", "two_regime_tooluse", "classical_embedding"} <= set(fixture_names())
    with pytest.raises(KeyError):
        get_fixture("nope")


def test_minimality_matrix_has_a_failing_diagonal(minimality):
    assert minimality.matches_expected
    assert not minimality.all_certified
    matrix = minimality.matrix()
    for i, row in enumerate(matrix):
        assert row == [j != i for j in range(len(VERDICT_KEYS))]


def test_each_counterexample_fails_only_its_obligation():
    expected = minimality_expected()
    for name, obligation in zip(MINIMALITY_FIXTURES, VERDICT_KEYS):
        assert [k for k, ok in expected[name].items() if not ok] == [obligation]


def test_capacity_witness_is_the_first_over_bound_level():
    _, reports = run_fixture("capacity_fail")
    assert capacity_witness_level(reports[0]) == 26


def test_capacity_witness_absent_when_capacity_holds():
    _, reports = run_fixture("classical_embedding")
    assert capacity_witness_level(reports[0]) is None


def test_classical_embedding_certifies():
    verdicts, _ = run_fixture("classical_embedding", seed=3)
    assert all(verdicts.values())


def test_strict_inclusion_has_no_single_evaluator():
    result = strict_inclusion_suite(seed=0, per_axis=20)
    assert result.matches_expected
    assert result.all_certified
    assert result.checks == {"no_single_evaluator": True, "impossibility_flagged": True}
    assert result.extra["grid_matches"] == 0


def test_tooluse_projections():
    updates = tooluse_update()
    assert updates["inadmissible"][0].weights == pytest.approx((0.7, 0.3), abs=1e-6)
    assert updates["admissible"][0].weights == pytest.approx((0.4, 0.6), abs=1e-6)
    result = tooluse_suite()
    assert result.matches_expected
    assert all(result.checks[f"{kind}.{name}"] for kind in ("projection", "admissible")
               for name in ("inadmissible", "admissible"))


def test_suite_result_serializes(minimality):
    data = json.loads(json.dumps(minimality.to_dict()))
    assert data["columns"] == list(VERDICT_KEYS)
    assert data["matches_expected"] is True


def test_unknown_suite_is_rejected():
    with pytest.raises(ValueError):
        run_suite("everything")


def test_export_and_load_round_trip():
    exported = json.loads(json.dumps(export_fixture("invariance_fail", seed=9)))
    assert exported["command"] == "certify" and exported["seed"] == 9
    entry = load_fixture(exported)
    assert entry.name == "invariance_fail"
    verdicts, _ = run_fixture(entry, seed=exported["seed"])
    assert verdicts == dict(entry.expected)


@pytest.mark.parametrize("data", [
    {},
    {"fixture": "nope"},
    {"fixture": "closure_fail", "fixture_spec": {"model": {"changed": True}}},
])
def test_load_fixture_rejects_bad_configurations(data):
    with pytest.raises(ConfigError):
        load_fixture(data, path="run.json")


def _exported(name):
    return json.loads(json.dumps(export_fixture(name, seed=3)))


def test_unedited_export_resolves_to_the_catalog_entry():
    entry = load_fixture(_exported("closure_fail"))
    assert entry.kernel.name == "constant_1"
    assert dict(entry.expected) == dict(get_fixture("closure_fail").expected)


def test_edited_kernel_is_rebuilt_and_changes_the_verdict():
    data = _exported("closure_fail")
    data["fixture_spec"]["kernel"] = {"kind": "identity"}
    data["fixture_spec"]["expected"]["closure"] = True
    entry = load_fixture(data)
    assert entry.kernel.name == "identity"
    verdicts, _ = run_fixture(entry, seed=3, n_probe=200, n_mc=200)
    assert verdicts["closure"] is True
    assert verdicts == dict(entry.expected)


def test_edited_witness_and_capacity_are_rebuilt():
    data = _exported("closure_fail")
    data["fixture_spec"]["witness"] = {"kind": "level", "alpha": 0.25, "beta": 2.0}
    data["fixture_spec"]["capacity"] = {"kind": "log2_cardinality", "bound": 0.0}
    entry = load_fixture(data)
    assert entry.witness.alpha == 0.25 and entry.witness.beta == 2.0
    assert entry.capacity.bound == 0.0
    verdicts, _ = run_fixture(entry, seed=3, n_probe=200, n_mc=200)
    assert verdicts["capacity"] is False


@pytest.mark.parametrize("key, value", [
    ("kernel", {"kind": "mystery"}),
    ("witness", {"kind": "level"}),
    ("transforms", [{"identifier": "t", "action": {"kind": "warp"}}]),
    ("expected", {"closure": True}),
])
def test_malformed_fixture_spec_components_are_rejected(key, value):
    data = _exported("closure_fail")
    data["fixture_spec"][key] = value
    with pytest.raises(ConfigError) as err:
        load_fixture(data, path="run.json")
    assert err.value.field == f"fixture_spec.{key}"
