import math

import pytest
from hypothesis import given

from sk_adapt.evalexact import eval_nonadaptive, eval_procedural, optimal_adaptive
from sk_adapt.families import random_corpus
from sk_adapt.lpbound import phi
from sk_adapt.model import Variant, classify_small_large, make_instance
from sk_adapt.montecarlo import McConfig, simulate
from sk_adapt.policies import (
    AlphaVector,
    f_alpha,
    hybrid_depth,
    large_item_hybrid,
    maximize_o5,
    non_adaptive_greedy,
    o5_value,
    one_semi_adaptive_greedy,
    optimal_alpha,
    partition_combine,
    semi_adaptive_greedy,
    zeta_bounds,
)

from conftest import instances


def test_greedy0_hand_trace():
    inst = make_instance([0.1] * 10, [[(1, 1.0)]] * 10, 10)
    plan, tr = non_adaptive_greedy(inst)
    assert tr.block == (0, 1, 2, 3, 4)
    assert (tr.alpha, tr.beta, tr.gamma) == pytest.approx((0.5, 0.6, 0.1))
    assert tr.options == pytest.approx((0.25, 0.25, 0.1, 0.24))
    assert tr.chosen == 1 and plan.items == tr.block
    assert eval_nonadaptive(inst, plan).expected_value == pytest.approx(0.5)


def test_greedy0_single_heavy_item():
    inst = make_instance([1.0], [[(6, 1.0)]], 10)
    plan, tr = non_adaptive_greedy(inst)
    assert tr.block == () and tr.alpha == 0 and tr.gamma == pytest.approx(1.0)
    assert tr.chosen == 3 and plan.items == (0,)


def test_semi1_deterministic_block():
    # block of mass 0.4 that always fits, so p = 0 and the fallback t is 1 - 2 alpha
    inst = make_instance([0.4, 0.5], [[(4, 1.0)], [(5, 1.0)]], 10)
    pol, tr = one_semi_adaptive_greedy(inst)
    assert tr.p == 0.0
    assert tr.options[0] == pytest.approx(tr.alpha)
    assert tr.t_fallback == pytest.approx(1 - 2 * tr.alpha)
    assert eval_procedural(inst, pol).queries_used <= 1


def test_semi1_conditional_branch_cross_checked_by_simulation():
    for inst in random_corpus(200, 12, seed=5, atoms=4):
        pol, tr = one_semi_adaptive_greedy(inst)
        if tr.chosen == 5:
            break
    else:
        pytest.fail("no instance triggered the conditional insert")
    exact = eval_procedural(inst, pol)
    assert exact.queries_used == 1
    mc = simulate(inst, pol, McConfig(20000, 9))
    assert abs(mc.mean - exact.expected_value) <= 4 * mc.std_error + 1e-12


def test_alpha_vectors():
    assert optimal_alpha(0).values == (0.5,)
    assert optimal_alpha(1).values == pytest.approx((1 / 3, 1 / 3))
    assert f_alpha((0.5,)) == pytest.approx(0.25)
    assert f_alpha((1 / 3, 1 / 3)) == pytest.approx(8 / 27)
    assert f_alpha(optimal_alpha(1000)) == pytest.approx(math.exp(-1), abs=1e-3)
    assert f_alpha((0.7, 0.6)) == pytest.approx(0.3 * 0.4)
    with pytest.raises(ValueError):
        AlphaVector((0.0,))


def test_o5_and_zeta():
    z, fixed = zeta_bounds(0.3, 0.6, 0.0, 0.0)
    assert z == fixed == pytest.approx(0.4)
    best, t, _, _ = maximize_o5(0.3, 0.6, 0.1, 0.05)
    assert best >= o5_value(0.3, 0.6, 0.1, 0.05, 0.9) - 1e-12
    assert 0 < t <= 1


def test_semi_adaptive_small_item_guarantees():
    corpus = random_corpus(6, 80, seed=41, n_min=40, mode="small", eps=0.05, scale=100, atoms=3)
    for inst in corpus:
        ph = phi(inst, 1.0).value
        for k, factor in ((0, 0.25), (1, 8 / 27)):
            res = eval_procedural(inst, semi_adaptive_greedy(inst, k))
            assert res.expected_value >= (factor - (k + 1) * 0.05) * ph - 1e-9
            assert res.queries_used <= k


def test_semi_adaptive_rejects_wrong_alpha_length():
    inst = make_instance([1.0], [[(1, 1.0)]], 10)
    with pytest.raises(ValueError):
        semi_adaptive_greedy(inst, 2, alpha=(0.3, 0.3))


def test_hybrid_depth_formula():
    assert hybrid_depth(0.5) == 7


def test_hybrid_without_truncation_is_optimal():
    inst = make_instance([1, 2, 3], [[(2, 0.5), (6, 0.5)], [(3, 0.5), (5, 0.5)], [(4, 0.3), (9, 0.7)]], 8)
    pol = large_item_hybrid(inst, 0.2)
    assert pol.depth >= inst.n
    assert eval_procedural(inst, pol).expected_value == pytest.approx(optimal_adaptive(inst)[0])


def test_hybrid_refuses_small_items():
    inst = make_instance([1, 1], [[(1, 1.0)], [(5, 1.0)]], 10)
    with pytest.raises(ValueError):
        large_item_hybrid(inst, 0.2)


def test_partition_all_small():
    inst = make_instance([1.0] * 5, [[(1, 1.0)]] * 5, 20)
    choice = partition_combine(inst, 0.1)
    assert choice.chosen == "small" and choice.large_value is None
    assert choice.policy.ids == (0, 1, 2, 3, 4)


def test_partition_picks_better_side():
    for inst in random_corpus(15, 8, seed=17, atoms=3):
        choice = partition_combine(inst, 0.1)
        got = eval_procedural(inst, choice.policy).expected_value
        vals = [v for v in (choice.small_value, choice.large_value) if v is not None]
        assert got == pytest.approx(max(vals), abs=1e-9)
        small, large = classify_small_large(inst, 0.1)
        bound = 0.0
        for ids, v in ((small, choice.small_value), (large, choice.large_value)):
            if ids:
                sub_adapt = optimal_adaptive(inst.subset(ids))[0]
                bound += sub_adapt / v if v > 0 else (0.0 if sub_adapt == 0 else math.inf)
        assert got * bound >= optimal_adaptive(inst)[0] - 1e-9


@given(instances())
def test_greedy0_certificate(inst):
    plan, _ = non_adaptive_greedy(inst)
    value = eval_nonadaptive(inst, plan).expected_value
    assert value >= (math.sqrt(5) - 2) * phi(inst, 1.0).value - 1e-9


@given(instances())
def test_semi1_certificate(inst):
    pol, _ = one_semi_adaptive_greedy(inst)
    res = eval_procedural(inst, pol)
    assert res.expected_value >= 0.24215 * phi(inst, 1.0).value - 1e-9
    assert res.queries_used <= 1


@given(instances(variant=Variant.NONRISKY))
def test_semi_adaptive_never_exceeds_query_budget(inst):
    for k in range(3):
        assert eval_procedural(inst, semi_adaptive_greedy(inst, k)).queries_used <= k
