import pytest
from hypothesis import given

from sk_adapt.evalexact import (
    SumDist,
    convolve_block,
    enumerate_adaptive,
    enumerate_nonadaptive,
    eval_nonadaptive,
    eval_procedural,
    eval_tree,
    optimal_adaptive,
    optimal_k_semi_adaptive,
    optimal_nonadaptive,
)
from sk_adapt.families import make_h2_risky, make_noisy_lb
from sk_adapt.model import (
    STOP,
    InsertNode,
    NonAdaptivePlan,
    SizeLimitError,
    TreePolicy,
    Variant,
    make_instance,
)
from sk_adapt.policies import semi_adaptive_greedy

from conftest import instances


def _coin_pair():
    return make_instance([1, 1], [[(0, 0.5), (1, 0.5)]] * 2, 1)


def test_empty_block_is_point_mass():
    assert convolve_block(_coin_pair(), ()).as_dict() == {0: 1.0}


def test_two_coins_by_hand():
    assert convolve_block(_coin_pair(), (0, 1)).as_dict() == {0: 0.25, 1: 0.5, "overflow": 0.25}


def test_deterministic_sum():
    inst = make_instance([1, 1], [[(3, 1.0)], [(4, 1.0)]], 10)
    assert convolve_block(inst, (0, 1)).as_dict() == {7: 1.0}


def test_point_beyond_capacity():
    assert SumDist.point(5, 4).overflow == 1.0


def test_noisy_pair_plan():
    inst = make_noisy_lb(2)
    assert eval_nonadaptive(inst, (1, 0)).expected_value == pytest.approx(1.0)


def test_nonrisky_order_matters():
    inst = make_instance([1, 2], [[(66, 1.0)], [(66, 1.0)]], 100, Variant.NONRISKY)
    assert eval_nonadaptive(inst, (1, 0)).expected_value == 2
    assert eval_nonadaptive(inst, (0, 1)).expected_value == 1


def test_empty_plan_and_stop_tree():
    inst = _coin_pair()
    assert eval_nonadaptive(inst, ()).expected_value == 0.0
    assert eval_tree(inst, TreePolicy(STOP, 1)).expected_value == 0.0


def test_single_insert_tree_matches_plan():
    inst = make_instance([2.0], [[(0, 0.3), (3, 0.7)]], 2)
    tree = TreePolicy(InsertNode((0,)), 2)
    assert eval_tree(inst, tree).expected_value == pytest.approx(eval_nonadaptive(inst, (0,)).expected_value)


def test_noisy_pair_tree():
    inst = make_noisy_lb(2)
    small = 1
    # insert item 1; go on with item 0 only if it came out small
    root = InsertNode((1,), ((0, inst.scale - small - 1, STOP), (inst.scale - small, inst.scale, InsertNode((0,)))))
    assert eval_tree(inst, TreePolicy(root, inst.scale)).expected_value == pytest.approx(1.5)


def test_noisy_pair_oracles():
    inst = make_noisy_lb(2)
    assert optimal_adaptive(inst)[0] == pytest.approx(1.5)
    assert optimal_nonadaptive(inst)[0] == pytest.approx(1.0)
    assert optimal_k_semi_adaptive(inst, 1)[0] == pytest.approx(1.5)


def test_certain_fit_takes_everything():
    inst = make_instance([1, 2, 3], [[(1, 1.0)]] * 3, 10)
    value, plan = optimal_nonadaptive(inst)
    assert value == 6 and sorted(plan.items) == [0, 1, 2]
    assert optimal_adaptive(make_instance([4.0], [[(0, 0.5), (3, 0.5)]], 3))[0] == 4.0


def test_three_coins_against_enumeration():
    inst = make_instance([1, 1, 1], [[(0, 0.5), (1, 0.5)]] * 3, 1)
    assert optimal_adaptive(inst)[0] == pytest.approx(enumerate_adaptive(inst))


def test_h2_pair_nonadaptive_value():
    inst = make_h2_risky((0.5, 0.5))
    assert optimal_nonadaptive(inst)[0] == pytest.approx(1.0)


def test_size_limits():
    big = make_instance([1] * 16, [[(1, 1.0)]] * 16, 100)
    with pytest.raises(SizeLimitError):
        optimal_adaptive(big)
    with pytest.raises(SizeLimitError):
        optimal_k_semi_adaptive(big, 1)


def test_ignoring_observations_matches_plan():
    inst = make_instance([1, 2, 3], [[(0, 0.5), (4, 0.5)], [(2, 0.5), (5, 0.5)], [(3, 1.0)]], 8)
    a = eval_procedural(inst, NonAdaptivePlan((2, 0, 1))).expected_value
    assert a == pytest.approx(eval_nonadaptive(inst, (2, 0, 1)).expected_value)


def test_semi_adaptive_chain_closed_form():
    # six unit items of size 0.1; blocks take 3 then 2 items
    inst = make_instance([1.0] * 6, [[(1, 1.0)]] * 6, 10)
    res = eval_procedural(inst, semi_adaptive_greedy(inst, 1))
    assert res.expected_value == 5.0
    assert res.queries_used == 1


def test_tree_argmax_reproduces_value():
    inst = make_instance([1, 2, 3], [[(0, 0.5), (4, 0.5)], [(2, 0.5), (5, 0.5)], [(3, 0.4), (9, 0.6)]], 8)
    value, tree = optimal_adaptive(inst)
    assert eval_tree(inst, tree).expected_value == pytest.approx(value)


@given(instances())
def test_adaptive_oracle_matches_enumeration(inst):
    value, tree = optimal_adaptive(inst)
    assert value == pytest.approx(enumerate_adaptive(inst), abs=1e-9)
    assert eval_tree(inst, tree).expected_value == pytest.approx(value, abs=1e-9)


@given(instances())
def test_nonadaptive_oracle_matches_enumeration(inst):
    value, plan = optimal_nonadaptive(inst)
    assert value == pytest.approx(enumerate_nonadaptive(inst), abs=1e-9)
    assert eval_nonadaptive(inst, plan).expected_value == pytest.approx(value, abs=1e-9)


@given(instances())
def test_semi_adaptive_boundaries_and_monotonicity(inst):
    na = optimal_nonadaptive(inst)[0]
    ad = optimal_adaptive(inst)[0]
    vals = [optimal_k_semi_adaptive(inst, k) for k in range(inst.n + 1)]
    assert vals[0][0] == pytest.approx(na, abs=1e-9)
    assert vals[-1][0] == pytest.approx(ad, abs=1e-9)
    for (a, _), (b, _) in zip(vals, vals[1:]):
        assert b >= a - 1e-9
    for k, (v, tree) in enumerate(vals):
        res = eval_tree(inst, tree)
        assert res.expected_value == pytest.approx(v, abs=1e-9)
        assert res.queries_used <= k


@given(instances(variant=Variant.RISKY))
def test_risky_order_invariance(inst):
    ids = list(range(inst.n))
    a = eval_nonadaptive(inst, ids).expected_value
    b = eval_nonadaptive(inst, ids[::-1]).expected_value
    assert a == pytest.approx(b, abs=1e-12)
