import math

import pytest
from hypothesis import given

from sk_adapt.families import make_noisy_lb, worst_case_h2_nonrisky
from sk_adapt.gaps import (
    certify_T,
    certify_Tprime,
    bernoulli_chain_mdp,
    h2_nonrisky_gap,
    h2_risky_gap,
    measure_gaps,
    nonrisky_recursion,
    phi_ratio_probe,
    risky_closed_form,
    risky_recursion,
    t_objective,
    tprime_value,
)
from sk_adapt.model import make_instance

from conftest import instances


def test_noisy_pair_gap_split():
    rep = measure_gaps(make_noisy_lb(2), 1)
    assert rep.gap_full == pytest.approx(1.5)
    assert rep.gap_0k == pytest.approx(1.5)
    assert rep.gap_kn == pytest.approx(1.0)


def test_single_item_gaps_are_one():
    rep = measure_gaps(make_instance([1.0], [[(0, 0.5), (3, 0.5)]], 4), 1)
    assert rep.gap_full == rep.gap_0k == rep.gap_kn == 1.0


@given(instances())
def test_gap_product(inst):
    for k in (1, 2):
        assert measure_gaps(inst, k).product_slack >= -1e-9


def test_closed_form_gaps():
    assert h2_risky_gap((0.5, 0.5)) == 1.5
    assert h2_risky_gap((1.0,)) == 1.0
    assert h2_nonrisky_gap((0.5, 0.5)) == 1.25
    assert h2_nonrisky_gap((1.0,)) == 1.0
    assert h2_nonrisky_gap(worst_case_h2_nonrisky(20000)) == pytest.approx(1 + math.exp(-1), abs=1e-3)


def test_recursions():
    assert risky_recursion(3) == [1, 1.5, 1.75]
    assert all(x == risky_closed_form(j) for j, x in enumerate(risky_recursion(50), start=1))
    assert risky_recursion(60)[-1] == pytest.approx(2.0, abs=1e-12)
    assert nonrisky_recursion(3) == [1, 1.25, 1.390625]
    seq = nonrisky_recursion(2000)
    assert all(b > a for a, b in zip(seq, seq[1:])) and max(seq) < 2


def test_certify_T():
    res = certify_T(200)
    assert res.min_found == pytest.approx(math.sqrt(5) - 2, abs=1e-3)
    assert res.argmin["alpha"] == pytest.approx((3 - math.sqrt(5)) / 2, abs=1e-2)
    assert res.min_found <= res.grid_min


def test_T_with_gamma_zero():
    # with gamma = 0, (beta - gamma)(1 - alpha) >= 1/4 and equality needs alpha = beta = 1/2
    vals = [t_objective(a, b, 0.0) for a in (0.0, 0.25, 0.5) for b in (0.5, 0.75, 1.0)]
    assert min(vals) == pytest.approx(0.25)


def test_certify_Tprime():
    res = certify_Tprime(40)
    assert 0.2421 <= res.min_found <= 0.25 + 1e-9
    fixed = certify_Tprime(40, fixed_t=True)
    assert fixed.min_found >= 0.2421


def test_tprime_at_quarter_point():
    assert tprime_value(0.0, 0.5, 0.25, 0.0) == pytest.approx(0.25)


def test_example1_threshold():
    for eps in (0.01, 0.02, 0.05):
        res = bernoulli_chain_mdp(eps)
        assert math.ceil((1 - eps) / eps) - 1 <= res.threshold <= math.floor(1 / eps) + 1


def test_example1_estimates():
    res = bernoulli_chain_mdp(0.01)
    assert res.value_estimate == pytest.approx(1 + math.exp(-1), abs=0.03)
    assert res.overflow_prob == pytest.approx(math.exp(-1), abs=0.02)
    # the threshold rule run on an endless supply of items
    k, q = res.threshold, 0.99
    assert res.chain_value == pytest.approx(q ** (k - 1) * (1e-4 * k * (k - 1) + 0.01 * (k - 1) + 1))


def test_example1_rejects_bad_input():
    with pytest.raises(ValueError):
        bernoulli_chain_mdp(0.5)
    with pytest.raises(ValueError):
        bernoulli_chain_mdp(0.01, horizon=10)


def test_phi_ratio_probe():
    assert phi_ratio_probe(make_instance([1.0], [[(2, 1.0)]], 4)) == pytest.approx(1.0)


@given(instances())
def test_phi_ratio_probe_at_most_two(inst):
    assert phi_ratio_probe(inst) <= 2 + 1e-9
