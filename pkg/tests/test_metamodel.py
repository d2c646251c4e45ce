"""Environments, transform magnitude, representation Lipschitz estimate and the canonical encoding."""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_env, make_model, ordering_core
from lib.errors import ConfigError, DegenerateTransform, DomainMismatch
from modules.structure.metamodel import (
    Environment,
    EnvironmentFamily,
    HypothesisClassSpec,
    PriorSpec,
    RepresentationSpec,
    TransformSpec,
    check_representation_lipschitz,
    check_transform_magnitude,
    decode_value,
    description_length_bits,
    deserialize_metamodel,
    encode_value,
    env_distance,
    estimate_representation_lipschitz,
    identity_transform,
    load_metamodel,
    serialize_metamodel,
)
from modules.structure.regimes import Evaluator, EvaluatorFamily, RegimeWeights


def test_total_variation_between_two_laws():
    a = make_env((0.9, 0.1), name="a")
    b = make_env((0.5, 0.5), name="b")
    assert env_distance(a, b) == pytest.approx(0.4)
    assert env_distance(a, a) == 0.0


def test_wasserstein_on_declared_positions():
    a = make_env((1.0, 0.0), name="a", positions=(0.0, 3.0))
    b = make_env((0.0, 1.0), name="b", positions=(0.0, 3.0))
    assert env_distance(a, b, "wasserstein1_on_ordered_support") == pytest.approx(3.0)


def test_wasserstein_needs_an_order():
    a = make_env((1.0, 0.0), support=("x", "y"), name="a")
    b = make_env((1.0, 0.0), support=("p", "q"), name="b")
    with pytest.raises(DomainMismatch):
        env_distance(a, b, "wasserstein1_on_ordered_support")


def test_environment_rejects_non_distribution():
    with pytest.raises(ValueError):
        make_env((0.7, 0.7))
    with pytest.raises(ValueError):
        Environment("e", (), {"*": ()})


@settings(max_examples=50, deadline=None)
@given(p=st.floats(0.0, 1.0), q=st.floats(0.0, 1.0))
def test_total_variation_is_a_bounded_symmetric_metric(p, q):
    a = make_env((p, 1.0 - p), name="a")
    b = make_env((q, 1.0 - q), name="b")
    d = env_distance(a, b)
    assert 0.0 <= d <= 1.0 + 1e-12
    assert d == pytest.approx(env_distance(b, a))
    assert d == pytest.approx(abs(p - q))


@pytest.mark.parametrize("epsilon, passed", [(0.3, False), (0.5, True)])
def test_replace_transform_magnitude(epsilon, passed):
    fam = EnvironmentFamily((make_env((0.9, 0.1)),))
    t = TransformSpec("flip", {"kind": "replace", "conditionals": {"*": (0.5, 0.5)}}, epsilon)
    report = check_transform_magnitude(t, fam)
    assert report.passed is passed
    assert report.evidence["achieved"] == pytest.approx(0.4)
    assert bool(report.witnesses) is not passed


def test_identity_transform_has_zero_magnitude():
    fam = EnvironmentFamily((make_env((0.9, 0.1)),))
    report = check_transform_magnitude(identity_transform(), fam)
    assert report.passed
    assert report.evidence["achieved"] == 0.0


def test_mix_transform_moves_by_its_weight():
    fam = EnvironmentFamily((make_env((1.0, 0.0)),))
    t = TransformSpec("mix", {"kind": "mix", "target": (0.0, 1.0), "weight": 0.25}, 0.25)
    report = check_transform_magnitude(t, fam)
    assert report.passed
    assert report.evidence["achieved"] == pytest.approx(0.25)


def _numeric_family():
    env = Environment("e0", (0.0, 1.0, 2.0), {"*": (0.2, 0.5, 0.3)})
    return EnvironmentFamily((env,), "wasserstein1_on_ordered_support")


def test_lipschitz_estimate_of_a_scale_map():
    fam = _numeric_family()
    shift = TransformSpec("shift", {"kind": "shift", "delta": 0.5}, 0.5)
    r = RepresentationSpec(map_spec={"kind": "scale", "factor": 2.0})
    assert estimate_representation_lipschitz(r, fam, shift, 200, 3) == pytest.approx(2.0)


def test_lipschitz_estimate_of_a_constant_map_is_zero():
    fam = _numeric_family()
    shift = TransformSpec("shift", {"kind": "shift", "delta": 0.5}, 0.5)
    r = RepresentationSpec(map_spec={"kind": "constant", "value": 4.0})
    assert estimate_representation_lipschitz(r, fam, shift, 50, 0) == 0.0


def test_lipschitz_under_identity_transform_is_degenerate():
    r = RepresentationSpec(map_spec={"kind": "identity"})
    with pytest.raises(DegenerateTransform):
        estimate_representation_lipschitz(r, _numeric_family(), identity_transform(), 10, 0)


def test_lipschitz_check_against_declared_bound():
    fam = _numeric_family()
    shift = TransformSpec("shift", {"kind": "shift", "delta": 0.5}, 0.5)
    tight = RepresentationSpec(map_spec={"kind": "scale", "factor": 2.0}, local_lipschitz_bound=1.0)
    loose = RepresentationSpec(map_spec={"kind": "scale", "factor": 2.0}, local_lipschitz_bound=3.0)
    failed = check_representation_lipschitz(tight, fam, shift, 100, 1)
    assert not failed.passed and failed.mode == "sampled"
    assert check_representation_lipschitz(loose, fam, shift, 100, 1).passed


def test_table_representation_must_be_total():
    with pytest.raises(ValueError):
        RepresentationSpec(("a", "b"), map_spec={"kind": "table", "table": {"a": 0.0}})


def test_hypothesis_class_complexity():
    assert HypothesisClassSpec.enumerated(["a", "b", "c", "d"]).complexity_bits == 2.0
    grid = HypothesisClassSpec.grid(3)
    assert grid.cardinality == 8 and grid.resolves("anything")
    with pytest.raises(ValueError):
        HypothesisClassSpec.enumerated(["a", "a"])


def test_weighted_prior_must_be_a_distribution():
    with pytest.raises(ValueError):
        PriorSpec("weights", {"a": 0.6, "b": 0.6})


def test_model_rejects_unknown_hypothesis():
    ev = Evaluator.constant_rows("l1", {"h_z": 0.5})
    with pytest.raises(ValueError):
        make_model(EvaluatorFamily((ev,), None, {"*": RegimeWeights((1.0,))}))


def test_serialization_round_trip_is_canonical():
    core = ordering_core()
    ev = Evaluator.constant_rows("l1", {"h_a": 0.2, "h_b": 0.8})
    m = make_model(EvaluatorFamily((ev,), core, {"*": RegimeWeights((1.0,))}))
    data = serialize_metamodel(m)
    again = deserialize_metamodel(data)
    assert serialize_metamodel(again) == data
    assert description_length_bits(m) == 8 * len(data)


def test_description_length_grows_with_the_model():
    small = make_model()
    large = make_model(hypotheses=("h_a", "h_b", "h_c", "h_d"))
    assert description_length_bits(large) > description_length_bits(small)


def test_encoding_rejects_trailing_bytes():
    raw = encode_value({"a": [1, 2.5, None, True]})
    assert decode_value(raw) == {"a": [1, 2.5, None, True]}
    with pytest.raises(ValueError):
        decode_value(raw + b"N")


def test_load_metamodel_from_file(tmp_path, model):
    path = tmp_path / "model.json"
    path.write_text(json.dumps(model.to_dict()), encoding="utf-8")
    assert serialize_metamodel(load_metamodel(path)) == serialize_metamodel(model)


def test_load_metamodel_errors_are_config_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_metamodel(bad)
    with pytest.raises(ConfigError) as exc:
        load_metamodel({"evaluators": {"evaluators": []}})
    assert "hypothesis_class" in str(exc.value)
