import math

import pytest

from sk_adapt.evalexact import eval_tree, optimal_adaptive, optimal_nonadaptive
from sk_adapt.families import (
    H2NonRisky,
    H2Risky,
    NoisyLB,
    RandomSpec,
    build_family,
    compound_reduce,
    h2_risky_values,
    make_bernoulli_eps,
    make_h2_nonrisky,
    make_h2_risky,
    make_noisy_lb,
    make_random,
    noisy_lb_values,
    predictions,
    worst_case_h2_nonrisky,
    worst_case_h2_risky,
)
from sk_adapt.gaps import h2_nonrisky_gap, h2_risky_gap
from sk_adapt.model import TreePolicy, Variant, derive_stats, make_instance


def test_bernoulli_pair():
    inst = make_bernoulli_eps(0.5, 2)
    assert inst.n == 2
    assert inst.items[0].dist.atoms == [(0, 0.5), (inst.scale, 0.5)]


def test_bernoulli_nonrisky_adaptive_value():
    # keep inserting until the second unit-size draw: 2 - eps in expectation
    inst = make_bernoulli_eps(0.25, 12, "nonrisky")
    exact = optimal_adaptive(inst)[0]
    # twelve items truncate the negative binomial; the infinite-supply value is 1.75
    tail = sum(math.comb(12, j) * 0.25**j * 0.75 ** (12 - j) for j in (0, 1))
    assert exact <= 1.75 + 1e-12
    assert exact >= 1.75 - 3 * tail


def test_h2_risky_pair():
    vals = h2_risky_values((0.5, 0.5))
    assert vals == pytest.approx([1.0, 0.0])
    inst = make_h2_risky((0.5, 0.5))
    gap = optimal_adaptive(inst)[0] / optimal_nonadaptive(inst)[0]
    assert gap == pytest.approx(1.5)


def test_h2_risky_single_outcome():
    inst = make_h2_risky((1.0,))
    assert optimal_adaptive(inst)[0] == pytest.approx(optimal_nonadaptive(inst)[0])
    assert h2_risky_gap((1.0,)) == 1.0


def test_h2_risky_worst_case_limit():
    assert h2_risky_gap(worst_case_h2_risky(2000)) == pytest.approx(1 + math.log(2), abs=1e-3)


@pytest.mark.parametrize("n", [2, 4, 6])
def test_h2_nonrisky_formula_matches_oracles(n):
    p = worst_case_h2_nonrisky(n)
    inst = make_h2_nonrisky(p, a=1e9)
    gap = optimal_adaptive(inst)[0] / optimal_nonadaptive(inst)[0]
    assert gap == pytest.approx(h2_nonrisky_gap(p), abs=10 * n / 1e9 + 1e-9)


def test_h2_nonrisky_with_outside_mass():
    spec = H2NonRisky((0.5, 0.3, 0.2), p0=0.2, a=1e9)
    inst = build_family(spec)
    gap = optimal_adaptive(inst)[0] / optimal_nonadaptive(inst)[0]
    assert gap == pytest.approx(predictions(spec)["gap"], abs=1e-7)


def test_noisy_chain_values_and_gaps():
    vals, V, G = noisy_lb_values(4)
    assert [float(g) for g in G] == [1, 1.5, 1.75, 1.875]
    inst = make_noisy_lb(2)
    assert optimal_adaptive(inst)[0] == pytest.approx(1.5)
    assert optimal_nonadaptive(inst)[0] == pytest.approx(1.0)
    inst = make_noisy_lb(3)
    assert optimal_adaptive(inst)[0] / optimal_nonadaptive(inst)[0] == pytest.approx(1.75, abs=1e-2)


def test_noisy_chain_ten_levels():
    inst = make_noisy_lb(10)
    _, V, G = noisy_lb_values(9)
    alg = optimal_nonadaptive(inst)[0]
    assert alg <= float(V[-1] / G[-1]) * (1 + 1e-2)
    assert optimal_adaptive(inst)[0] / alg >= 1.99 * (1 - 1e-3)


def test_noisy_chain_prediction_sidecar():
    pred = predictions(NoisyLB(5))
    assert pred["gap"] == pytest.approx(1.9375)


def test_random_is_seeded():
    spec = RandomSpec(n=6, seed=42)
    assert make_random(spec).to_json() == make_random(spec).to_json()


def test_random_small_mode_respects_threshold():
    inst = make_random(RandomSpec(n=30, seed=3, mode="small", eps=0.02))
    assert max(s.mean_truncated_size for s in derive_stats(inst)) <= 0.02


def test_random_single_atom_is_deterministic():
    inst = make_random(RandomSpec(n=10, seed=3, atoms=1))
    assert all(len(it.dist.sizes) == 1 for it in inst.items)


def test_random_variant():
    assert make_random(RandomSpec(n=3, variant="nonrisky")).variant is Variant.NONRISKY


def test_reduce_plan_tree_gives_single_item():
    inst = make_instance([1, 2], [[(2, 1.0)], [(3, 1.0)]], 10)
    from sk_adapt.model import InsertNode

    tree = TreePolicy(InsertNode((0, 1)), 10)
    red = compound_reduce(inst, tree)
    assert red.instance.n == 1
    assert red.instance.items[0].dist.atoms == [(5, 1.0)]
    assert optimal_nonadaptive(red.instance)[0] == optimal_nonadaptive(inst)[0]


def test_reduce_noisy_pair():
    inst = make_noisy_lb(2)
    value, tree = optimal_adaptive(inst)
    red = compound_reduce(inst, tree)
    assert eval_tree(red.instance, red.tree).expected_value == pytest.approx(value)
    assert optimal_adaptive(red.instance)[0] >= value - 1e-9
    assert optimal_nonadaptive(red.instance)[0] <= optimal_nonadaptive(inst)[0] + 1e-9


def test_reduce_refuses_nonrisky():
    inst = make_instance([1], [[(1, 1.0)]], 4, Variant.NONRISKY)
    with pytest.raises(ValueError):
        compound_reduce(inst, TreePolicy(optimal_adaptive(inst)[1].root, 4))


def test_bad_probability_vector():
    with pytest.raises(ValueError):
        make_h2_risky((0.5, 0.6))
    with pytest.raises(ValueError):
        predictions(H2Risky((0.3, 0.7)))
