"""Shared builders for the test suite; the repository root goes on sys.path like smgi.py does."""

import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from modules.structure.metamodel import (  # noqa: E402
    Environment,
    EnvironmentFamily,
    HypothesisClassSpec,
    MetaModel,
    PriorSpec,
    RepresentationSpec,
)
from modules.structure.memory import MemorySpec  # noqa: E402
from modules.structure.regimes import (  # noqa: E402
    AuditCase,
    Evaluator,
    EvaluatorFamily,
    OrderingConstraint,
    ProtectedCore,
    RegimeWeights,
)

HYPS = ("h_a", "h_b")


def make_env(probs=(0.5, 0.5), support=("z0", "z1"), name="e0", **kw) -> Environment:
    return Environment(name, tuple(support), {"*": tuple(probs)}, **kw)


def make_model(evaluators=None, hypotheses=HYPS, environments=None, memory=None, core=None) -> MetaModel:
    """Two-hypothesis model over {z0, z1}; default evaluator prefers h_a (0.2 < 0.8)."""
    if evaluators is None:
        ev = Evaluator.constant_rows("l1", dict(zip(hypotheses, (0.2, 0.8, 0.5, 0.5)[:len(hypotheses)])))
        evaluators = EvaluatorFamily((ev,), core, {"*": RegimeWeights((1.0,))})
    env_fam = environments or EnvironmentFamily((make_env(),))
    input_space = env_fam.instances[0].support
    return MetaModel(
        representation=RepresentationSpec(input_space, "reals",
                                          {"kind": "table", "table": {str(z): float(i)
                                                                      for i, z in enumerate(input_space)}}),
        hypothesis_class=HypothesisClassSpec.enumerated(hypotheses),
        prior=PriorSpec(),
        evaluators=evaluators,
        environments=env_fam,
        memory=memory or MemorySpec(),
    )


def ordering_core(context="*") -> ProtectedCore:
    return ProtectedCore((OrderingConstraint("a_below_b", "h_a", "h_b", context),), (AuditCase(context=context),))


@pytest.fixture
def model():
    return make_model()


@pytest.fixture
def cored_model():
    core = ordering_core()
    ev = Evaluator.constant_rows("l1", {"h_a": 0.2, "h_b": 0.8})
    return make_model(EvaluatorFamily((ev,), core, {"*": RegimeWeights((1.0,))}))


@pytest.fixture
def out_dir(tmp_path):
    d = tmp_path / "run"
    d.mkdir()
    return d
