import math

import pytest
from hypothesis import given

from sk_adapt.families import make_bernoulli_eps
from sk_adapt.model import (
    STOP,
    DiscreteDist,
    InsertNode,
    Instance,
    Item,
    TreePolicy,
    Variant,
    classify_small_large,
    derive_stats,
    greedy_order,
    make_instance,
)

from conftest import instances


def test_build_merges_and_sorts():
    d = DiscreteDist.build([(5, 0.25), (1, 0.25), (5, 0.25), (0, 0.0), (3, 0.25)], 10)
    assert d.sizes == (1, 3, 5)
    assert d.probs == (0.25, 0.25, 0.5)


def test_build_collapses_overflow_atoms():
    d = DiscreteDist.build([(11, 0.3), (25, 0.2), (4, 0.5)], 10)
    assert d.sizes == (4, 20)
    assert d.probs[1] == pytest.approx(0.5)


def test_build_renormalises_small_drift_only():
    d = DiscreteDist.build([(0, 0.5), (1, 0.5 + 5e-10)], 1)
    assert math.fsum(d.probs) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        DiscreteDist.build([(0, 0.5), (1, 0.6)], 1)


@pytest.mark.parametrize("atoms", [[(-1, 1.0)], [(0.5, 1.0)], [(0, float("nan"))], []])
def test_build_rejects_bad_atoms(atoms):
    with pytest.raises(ValueError):
        DiscreteDist.build(atoms, 4)


def test_stats_of_unit_item():
    st = derive_stats(make_instance([1.0], [[(10, 1.0)]], 10))[0]
    assert (st.effective_value, st.mean_truncated_size, st.density) == (1.0, 1.0, 1.0)


def test_stats_of_bernoulli_item():
    st = derive_stats(make_bernoulli_eps(0.01, 1))[0]
    assert st.effective_value == pytest.approx(0.01)
    assert st.mean_truncated_size == pytest.approx(0.01)


def test_stats_of_item_that_never_fits():
    st = derive_stats(make_instance([2.0], [[(20, 1.0)]], 10))[0]
    assert st.effective_value == 0.0
    assert st.mean_truncated_size == 1.0


def test_small_large_boundary_is_inclusive():
    inst = make_instance([1, 1], [[(1, 1.0)], [(1, 1.0)]], 10)
    assert classify_small_large(inst, 0.1) == ([0, 1], [])
    assert classify_small_large(make_bernoulli_eps(0.05, 3), 0.05) == ([0, 1, 2], [])


def test_small_large_mixed():
    inst = make_instance([1, 1], [[(1, 1.0)], [(10, 1.0)]], 20)
    assert classify_small_large(inst, 0.1) == ([0], [1])


def test_greedy_order_by_density():
    # densities 3, 1, 2
    inst = make_instance([0.3, 0.1, 0.2], [[(1, 1.0)]] * 3, 10)
    assert greedy_order(inst) == [0, 2, 1]


def test_greedy_order_ties_and_zero_mass():
    inst = make_instance([1, 1, 1], [[(2, 1.0)]] * 3, 10)
    assert greedy_order(inst) == [0, 1, 2]
    inst = make_instance([1, 0.5, 0.0], [[(2, 1.0)], [(0, 1.0)], [(1, 1.0)]], 10)
    assert greedy_order(inst) == [1, 0, 2]


def test_tree_validation_and_json_roundtrip():
    leaf = InsertNode((1,))
    root = InsertNode((0,), ((0, 4, leaf), (5, 10, STOP)))
    tree = TreePolicy(root, 10)
    assert tree.max_queries() == 1
    again = TreePolicy.from_json(tree.to_json(), 10)
    assert again.to_json() == tree.to_json()
    with pytest.raises(ValueError):
        TreePolicy(InsertNode((0,), ((0, 4, leaf), (6, 10, STOP))), 10)


def test_tree_budget_enforced():
    root = InsertNode((0,), ((0, 4, InsertNode((1,))), (5, 10, STOP)))
    with pytest.raises(ValueError):
        TreePolicy(root, 10, budget=0)


@given(instances())
def test_canonical_distributions(inst):
    for it in inst.items:
        d = it.dist
        assert math.fsum(d.probs) == pytest.approx(1.0, abs=1e-12)
        assert all(p > 0 for p in d.probs)
        assert list(d.sizes) == sorted(set(d.sizes))
        assert sum(s > inst.scale for s in d.sizes) <= 1


@given(instances())
def test_json_roundtrip(inst):
    again = Instance.from_json(inst.to_json())
    assert again.to_json() == inst.to_json()


def test_variant_parsing():
    inst = Instance((Item(1.0, DiscreteDist.point(1, 2)),), 2, "nonrisky")
    assert inst.variant is Variant.NONRISKY
