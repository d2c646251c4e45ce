"""Memory update, forgetting as constrained compression, non-expansiveness."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lib.errors import ProtectedItemRemoved
from modules.structure.memory import (
    MemoryItem,
    MemorySpec,
    MemoryState,
    additive_drop_loss,
    check_nonexpansive,
    forget,
    forget_with_report,
    memory_distance,
    memory_snapshot,
    update_memory,
)


def _item(key, bits=1.0, **kw):
    return MemoryItem(key, key, bits, **kw)


def test_memory_state_orders_items_and_counts_bits():
    m = MemoryState((_item("b", 2.0), _item("a", 1.5)))
    assert m.keys == ("a", "b")
    assert m.total_bits == 3.5
    assert m.restrict(["b"]).keys == ("b",)
    with pytest.raises(ValueError):
        MemoryState((_item("a"), _item("a")))


def test_protected_item_must_name_its_constraint():
    with pytest.raises(ValueError):
        MemoryItem("a", None, 1.0, protected=True)
    with pytest.raises(ValueError):
        MemoryItem("a", None, 0.0)


def test_append_rule_tags_regime_and_protects():
    spec = MemorySpec("append", protect=((2, "keep_regime_two"),))
    m = update_memory(spec, MemoryState.empty(), "z1", 1)
    m = update_memory(spec, m, "z2", 2)
    assert m.keys == ("z:z1", "z:z2")
    assert not m.get("z:z1").protected
    assert m.get("z:z2").protected_by == "keep_regime_two"
    assert m.get("z:z2").regime_tag == 2


def test_update_rule_may_not_drop_protected_items():
    protected = _item("p", protected=True, protected_by="c1")
    spec = MemorySpec(lambda m, z, k: MemoryState.empty())
    with pytest.raises(ProtectedItemRemoved):
        update_memory(spec, MemoryState((protected,)), "z", 1)


def test_forget_minimizes_loss_plus_weighted_bits():
    spec = MemorySpec(forget_lambda=0.25)
    m = MemoryState((_item("a"), _item("b")))
    loss = additive_drop_loss(0.3, {"a": 0.5, "b": 0.1})
    out, report = forget_with_report(spec, m, loss)
    assert out.keys == ("a",)
    assert report["mode"] == "exact"
    assert report["objective"] == pytest.approx(0.65)
    assert report["evaluated"] == 4


def test_forget_keeps_protected_items():
    spec = MemorySpec(forget_lambda=10.0)
    m = MemoryState((_item("a"), _item("p", protected=True, protected_by="c1")))
    out = forget(spec, m, additive_drop_loss(0.0, {}))
    assert out.keys == ("p",)


def test_forget_resolves_loss_by_context_then_regime():
    spec = MemorySpec(forget_lambda=0.1)
    m = MemoryState((_item("a"),))
    maps = {"ctx": additive_drop_loss(0.0, {"a": 1.0}), "*": additive_drop_loss(0.0, {})}
    assert forget(spec, m, maps, c="ctx").keys == ("a",)
    assert forget(spec, m, maps, c="other").keys == ()
    with pytest.raises(KeyError):
        forget(spec, m, {2: maps["*"]}, k=1)


def test_greedy_forgetting_beyond_the_exact_limit():
    spec = MemorySpec(forget_lambda=0.1)
    m = MemoryState(tuple(_item(f"i{n}") for n in range(6)))
    loss = additive_drop_loss(0.0, {"i0": 1.0, "i1": 1.0})
    out, report = forget_with_report(spec, m, loss, exact_limit=3)
    assert report["mode"] == "greedy"
    assert out.keys == ("i0", "i1")


@settings(max_examples=30, deadline=None)
@given(penalties=st.lists(st.floats(0.0, 1.0), min_size=1, max_size=6), lam=st.floats(0.0, 1.0))
def test_forget_never_beats_the_exhaustive_optimum(penalties, lam):
    spec = MemorySpec(forget_lambda=lam)
    m = MemoryState(tuple(_item(f"i{n}") for n in range(len(penalties))))
    pen = {f"i{n}": p for n, p in enumerate(penalties)}
    _, report = forget_with_report(spec, m, additive_drop_loss(0.0, pen))
    # additive losses separate per item: keep exactly those whose penalty exceeds lam * bits
    optimum = sum(min(p, lam) for p in penalties)
    assert report["objective"] == pytest.approx(optimum, abs=1e-9)


def test_memory_distance_is_weighted_symmetric_difference():
    spec = MemorySpec()
    a = MemoryState((_item("x", 2.0), _item("y")))
    b = MemoryState((_item("y"), _item("z", 0.5)))
    assert memory_distance(spec, a, b) == pytest.approx(2.5)
    assert memory_distance(spec, a, a) == 0.0


def test_append_is_nonexpansive():
    spec = MemorySpec("append")
    pairs = [(MemoryState((_item("a"),)), MemoryState.empty())]
    report = check_nonexpansive(spec, pairs, ["z1", "z2"])
    assert report.passed
    assert report.evidence["max_ratio"] == pytest.approx(1.0)


def test_duplicate_rule_expands_distances():
    spec = MemorySpec("duplicate")
    pairs = [(MemoryState((_item("a"),)), MemoryState.empty())]
    report = check_nonexpansive(spec, pairs, [None])
    assert not report.passed
    assert report.evidence["max_ratio"] == pytest.approx(2.0)
    assert report.witnesses[0]["d_after"] == pytest.approx(2.0)


def _three_items(protect_a=False):
    a = MemoryItem("a", "za", 2.0, protected=protect_a, protected_by="c1" if protect_a else None)
    return MemoryState((a, _item("b", 3.0), _item("c", 1.0)))


def test_forget_worked_instance():
    spec = MemorySpec(forget_lambda=0.1)
    loss = additive_drop_loss(0.2, {"a": 0.4, "b": 0.1, "c": 0.05})
    out, report = forget_with_report(spec, _three_items(), loss)
    assert out.keys == ("a",)
    assert report["objective"] == pytest.approx(0.55)
    assert report["evaluated"] == 8


def test_forget_without_pressure_keeps_everything():
    spec = MemorySpec(forget_lambda=0.0)
    loss = additive_drop_loss(0.2, {"a": 0.4, "b": 0.1, "c": 0.05})
    assert forget(spec, _three_items(), loss).keys == ("a", "b", "c")


def test_kept_bits_shrink_as_lambda_grows():
    loss = additive_drop_loss(0.2, {"a": 0.4, "b": 0.1, "c": 0.05})
    kept = [forget(MemorySpec(forget_lambda=lam), _three_items(True), loss).total_bits
            for lam in (0.0, 0.02, 0.05, 0.1, 0.5, 5.0)]
    assert all(x >= y for x, y in zip(kept, kept[1:]))
    assert kept[-1] == 2.0


def test_forgetting_with_a_fixed_loss_map_is_nonexpansive():
    spec = MemorySpec(forget_lambda=0.1)
    loss = additive_drop_loss(0.2, {"a": 0.4, "b": 0.1, "c": 0.05})
    full = _three_items()
    subsets = [full.restrict(keys) for keys in ((), ("a",), ("b", "c"), ("a", "b", "c"), ("c",))]
    pairs = [(x, y) for x in subsets for y in subsets]
    report = check_nonexpansive(spec, pairs, [None], operator=lambda mem, z, k: forget(spec, mem, loss))
    assert report.passed
    assert report.evidence["max_ratio"] <= 1.0


def test_memory_snapshot_records():
    snap = memory_snapshot(_three_items(True))
    assert snap[0] == {"key": "a", "code_bits": 2.0, "regime_tag": 1, "protected": True}
    assert [r["key"] for r in snap] == ["a", "b", "c"]
