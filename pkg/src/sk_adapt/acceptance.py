"""Acceptance checks, one function per criterion.

Each check returns a ``CriterionResult``; ``run_all`` drives them and is what
``sk-adapt reproduce`` and ``tests/test_acceptance.py`` call. ``quick`` shrinks
corpora and sample counts; thresholds never change.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import permutations

from .evalexact import (
    enumerate_adaptive,
    enumerate_nonadaptive,
    eval_nonadaptive,
    eval_procedural,
    eval_tree,
    optimal_adaptive,
    optimal_k_semi_adaptive,
    optimal_nonadaptive,
)
from .families import (
    compound_reduce,
    make_bernoulli_eps,
    make_h2_nonrisky,
    make_h2_risky,
    make_noisy_lb,
    predictions,
    H2NonRisky,
    H2Risky,
    random_corpus,
    worst_case_h2_nonrisky,
    worst_case_h2_risky,
)
from .gaps import (
    certify_T,
    certify_Tprime,
    bernoulli_chain_mdp,
    measure_gaps,
    nonrisky_recursion,
    risky_closed_form,
    risky_recursion,
    tprime_value,
)
from .lpbound import greedy_block_certificate, phi
from .model import Variant, greedy_order
from .montecarlo import McConfig, simulate, simulate_always_insert
from .policies import (
    CountThresholdPolicy,
    non_adaptive_greedy,
    one_semi_adaptive_greedy,
    semi_adaptive_greedy,
)

GOLDEN = (1 + math.sqrt(5)) / 2
GREEDY0_CONST = math.sqrt(5) - 2
SEMI1_CONST = 0.24215
GREEDY0_GAP = 2 * GOLDEN**3
SEMI1_GAP = 8.26
TOL = 1e-9


@dataclass
class CriterionResult:
    cid: int
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0


def _ratio(num: float, den: float) -> float:
    if den > 0:
        return num / den
    return 1.0 if num <= 0 else math.inf


# --- shared corpora and oracle cache ------------------------------------------


@lru_cache(maxsize=None)
def certificate_corpus(quick: bool):
    half = 100 if quick else 500
    return tuple(random_corpus(half, 30, seed=7, atoms=4)
                 + random_corpus(half, 30, seed=8, atoms=4, variant="nonrisky"))


@lru_cache(maxsize=None)
def small_n_corpus(quick: bool):
    half = 50 if quick else 150
    return tuple(random_corpus(half, 10, seed=11, atoms=4)
                 + random_corpus(half, 10, seed=12, atoms=4, variant="nonrisky"))


@lru_cache(maxsize=None)
def small_item_corpus(quick: bool):
    half = 20 if quick else 150
    fine = random_corpus(half, 120, seed=3, n_min=40, mode="small", eps=0.01, scale=400, atoms=3)
    coarse = random_corpus(half, 50, seed=4, n_min=10, mode="small", eps=0.05, scale=100, atoms=3)
    return tuple((inst, 0.01) for inst in fine) + tuple((inst, 0.05) for inst in coarse)


@lru_cache(maxsize=None)
def tiny_corpus(quick: bool):
    half = 40 if quick else 100
    return tuple(random_corpus(half, 6, seed=21, atoms=3)
                 + random_corpus(half, 6, seed=22, atoms=3, variant="nonrisky"))


@lru_cache(maxsize=None)
def h2_small_instances():
    risky = tuple((n, make_h2_risky(worst_case_h2_risky(n))) for n in range(2, 11))
    nonrisky = tuple((n, make_h2_nonrisky(worst_case_h2_nonrisky(n), a=1e9)) for n in range(2, 9))
    return risky, nonrisky


_ADAPT: dict[int, tuple[object, float]] = {}


def adapt_value(instance) -> float:
    hit = _ADAPT.get(id(instance))
    if hit is None or hit[0] is not instance:
        hit = (instance, optimal_adaptive(instance)[0])
        _ADAPT[id(instance)] = hit
    return hit[1]


def _greedy0_value(inst) -> float:
    plan, _ = non_adaptive_greedy(inst)
    return eval_nonadaptive(inst, plan).expected_value


def _semi1_value(inst) -> float:
    pol, _ = one_semi_adaptive_greedy(inst)
    return eval_procedural(inst, pol).expected_value


# --- criteria -----------------------------------------------------------------


def crit_greedy0_certificate(quick: bool) -> CriterionResult:
    worst, fails = math.inf, 0
    for inst in certificate_corpus(quick):
        ph = phi(inst, 1.0).value
        v = _greedy0_value(inst)
        fails += v < GREEDY0_CONST * ph - TOL
        if ph > 0:
            worst = min(worst, v / ph)
    n = len(certificate_corpus(quick))
    return CriterionResult(1, "non-adaptive greedy value >= (sqrt5-2) phi(1)", fails == 0,
                           {"instances": n, "violations": fails, "worst_ratio": worst,
                            "bound": GREEDY0_CONST})


def crit_greedy0_gap(quick: bool) -> CriterionResult:
    worst = 0.0
    for inst in small_n_corpus(quick):
        worst = max(worst, _ratio(adapt_value(inst), _greedy0_value(inst)))
    return CriterionResult(2, "ADAPT / non-adaptive greedy <= 2 golden^3", worst <= GREEDY0_GAP + 1e-6,
                           {"instances": len(small_n_corpus(quick)), "worst_gap": worst,
                            "bound": GREEDY0_GAP})


def crit_semi1_certificate(quick: bool) -> CriterionResult:
    worst, fails = math.inf, 0
    for inst in certificate_corpus(quick):
        ph = phi(inst, 1.0).value
        v = _semi1_value(inst)
        fails += v < SEMI1_CONST * ph - TOL
        if ph > 0:
            worst = min(worst, v / ph)
    worst_gap = 0.0
    for inst in small_n_corpus(quick):
        worst_gap = max(worst_gap, _ratio(adapt_value(inst), _semi1_value(inst)))
    ok = fails == 0 and worst_gap <= SEMI1_GAP + 1e-6
    return CriterionResult(3, "1-semi-adaptive greedy value >= 0.24215 phi(1), gap <= 8.26", ok,
                           {"violations": fails, "worst_ratio": worst, "worst_gap": worst_gap})


def crit_semik_certificate(quick: bool) -> CriterionResult:
    worst_slack = [math.inf] * 4
    worst_gap = [0.0] * 4
    fails = 0
    query_fails = 0
    for inst, eps in small_item_corpus(quick):
        ph = phi(inst, 1.0).value
        for k in range(4):
            res = eval_procedural(inst, semi_adaptive_greedy(inst, k))
            factor = ((k + 1) / (k + 2)) ** (k + 2) - (k + 1) * eps
            slack = res.expected_value - factor * ph
            fails += slack < -TOL
            query_fails += res.queries_used > k
            worst_slack[k] = min(worst_slack[k], slack)
            worst_gap[k] = max(worst_gap[k], _ratio(2 * ph, res.expected_value))
    return CriterionResult(4, "k-semi-adaptive greedy value >= (((k+1)/(k+2))^(k+2) - (k+1)eps) phi(1)",
                           fails == 0 and query_fails == 0,
                           {"instances": len(small_item_corpus(quick)), "violations": fails,
                            "query_violations": query_fails, "worst_slack": worst_slack,
                            "worst_2phi_over_value": worst_gap})


def crit_constants(quick: bool) -> CriterionResult:
    t = certify_T(200 if quick else 400)
    tp = certify_Tprime(40 if quick else 100)
    witness = tprime_value(0.0, 0.5, 0.0, 0.0)
    checks = {
        "T_in_range": 0.2350 <= t.min_found <= 0.2372,
        "T_argmin_alpha": abs(t.argmin["alpha"] - 0.381966) <= 0.01,
        "Tprime_in_range": 0.2421 <= tp.min_found <= 0.2501,
        "witness_is_quarter": abs(witness - 0.25) <= 1e-12,
    }
    return CriterionResult(5, "grid certification of T and T'", all(checks.values()),
                           {"T": t.min_found, "T_argmin": t.argmin, "Tprime": tp.min_found,
                            "Tprime_argmin": tp.argmin,
                            "witness_alpha0_p0_beta05_gamma0": witness, "checks": checks})


def _risky_options(inst) -> list[float]:
    n = inst.n - 1
    opts = [eval_nonadaptive(inst, [1]).expected_value]
    opts += [eval_nonadaptive(inst, [0, i]).expected_value for i in range(1, n + 1)]
    return opts


def crit_h2_risky(quick: bool) -> CriterionResult:
    target = 1 + math.log(2)
    big_p = worst_case_h2_risky(2000)
    closed = predictions(H2Risky(big_p))["gap"]
    big = make_h2_risky(big_p)
    opts = _risky_options(big)
    spread = max(opts) - min(opts)
    exact_err = 0.0
    risky, _ = h2_small_instances()
    for n, inst in risky:
        opt_na, _ = optimal_nonadaptive(inst)
        gap = adapt_value(inst) / opt_na
        exact_err = max(exact_err, abs(gap - predictions(H2Risky(worst_case_h2_risky(n)))["gap"]))
        o = _risky_options(inst)
        spread = max(spread, max(o) - min(o))
    ok = abs(closed - target) <= 1e-3 and exact_err <= 1e-6 and spread <= 1e-9
    return CriterionResult(6, "H2 risky gap -> 1 + ln 2", ok,
                           {"closed_form_n2000": closed, "target": target,
                            "max_exact_vs_closed": exact_err, "option_spread": spread})


def crit_h2_nonrisky(quick: bool) -> CriterionResult:
    target = 1 + math.exp(-1)
    closed = predictions(H2NonRisky(worst_case_h2_nonrisky(2000)))["gap"]
    worst_excess = -math.inf
    errs = {}
    _, nonrisky = h2_small_instances()
    for n, inst in nonrisky:
        opt_na, _ = optimal_nonadaptive(inst)
        gap = adapt_value(inst) / opt_na
        err = abs(gap - predictions(H2NonRisky(worst_case_h2_nonrisky(n)))["gap"])
        errs[n] = err
        worst_excess = max(worst_excess, err - (1e-4 + 10 * n / 1e9))
    ok = abs(closed - target) <= 2e-3 and worst_excess <= 0
    return CriterionResult(7, "H2 nonrisky gap -> 1 + 1/e", ok,
                           {"closed_form_n2000": closed, "target": target, "exact_errors": errs})


def crit_noisy_lb(quick: bool) -> CriterionResult:
    gaps, worst = {}, 0.0
    for k in range(2, 9):
        inst = make_noisy_lb(k, 1e-3)
        opt_na, _ = optimal_nonadaptive(inst)
        g = adapt_value(inst) / opt_na
        gaps[k] = g
        worst = max(worst, abs(g - (2 - 2.0 ** (1 - k))))
    seq = risky_recursion(60)
    rec_err = max(abs(x - risky_closed_form(j)) for j, x in enumerate(seq, start=1))
    return CriterionResult(8, "noisy chain gap 2 - 2^(1-k)", worst <= 1e-2 and rec_err <= 1e-12,
                           {"gaps": gaps, "max_error": worst, "recursion_error": rec_err})


def crit_nonrisky_recursion(quick: bool) -> CriterionResult:
    seq = nonrisky_recursion(200)
    mono = all(b >= a for a, b in zip(seq, seq[1:]))
    ok = mono and max(seq) <= 2 and seq[-1] >= 1.99
    return CriterionResult(9, "1 + G^2/4 recursion stays below 2", ok,
                           {"monotone": mono, "max": max(seq), "last": seq[-1]})


def crit_bernoulli_chain(quick: bool, workers: int = 1) -> CriterionResult:
    eps = 0.01
    samples = 50_000 if quick else 200_000
    ex = bernoulli_chain_mdp(eps)
    risky = make_bernoulli_eps(eps, 600, "risky")
    pol = CountThresholdPolicy(tuple(greedy_order(risky)), ex.threshold)
    mc = simulate(risky, pol, McConfig(samples, 20240601), workers)
    # enough items that running out before the second unit-size draw is negligible
    nonrisky = make_bernoulli_eps(eps, 3000, "nonrisky")
    always = simulate_always_insert(nonrisky, McConfig(samples, 20240602), workers)
    checks = {
        "threshold": 98 <= ex.threshold <= 101,
        "threshold_mean": abs(mc.mean - 1.3679) <= 0.03,
        "threshold_overflow": abs(mc.overflow_freq - 0.3679) <= 0.02,
        "always_insert_mean": abs(always.mean - 1.99) <= 0.03,
        "always_insert_overflow": always.overflow_freq == 1.0,
    }
    return CriterionResult(10, "Bernoulli chain threshold rule and always-insert", all(checks.values()),
                           {"threshold": ex.threshold, "mdp_estimate": ex.value_estimate,
                            "chain_value": ex.chain_value, "chain_overflow": ex.chain_overflow,
                            "mc_threshold": mc.__dict__, "mc_always": always.__dict__,
                            "checks": checks})


def crit_gap_product(quick: bool) -> CriterionResult:
    worst = math.inf
    for inst in tiny_corpus(quick):
        for k in (1, 2):
            rep = measure_gaps(inst, k)
            worst = min(worst, rep.product_slack)
    return CriterionResult(11, "full gap <= 0-k gap * k-n gap", worst >= -TOL,
                           {"instances": len(tiny_corpus(quick)), "min_slack": worst})


def _lp_corpus(quick: bool):
    risky, nonrisky = h2_small_instances()
    out = list(small_n_corpus(quick)) + list(tiny_corpus(quick))
    out += [inst for _, inst in risky] + [inst for _, inst in nonrisky]
    out += [make_noisy_lb(k, 1e-3) for k in range(2, 9)]
    return out


def crit_lp_bound(quick: bool) -> CriterionResult:
    worst, cert_fails, count = -math.inf, 0, 0
    for inst in _lp_corpus(quick):
        a = adapt_value(inst)
        worst = max(worst, a - 2 * phi(inst, 1.0).value)
        for t in (0.5, 1.0, 2.0):
            for j in range(1, inst.n + 1):
                cert_fails += not greedy_block_certificate(inst, j, t)[2]
        count += 1
    return CriterionResult(12, "ADAPT <= 2 phi(1) and greedy prefix bound", worst <= TOL and cert_fails == 0,
                           {"instances": count, "max_adapt_minus_2phi": worst,
                            "prefix_failures": cert_fails})


def crit_properties(quick: bool) -> CriterionResult:
    corpus = random_corpus(30 if quick else 80, 4, seed=31, atoms=3)
    corpus += random_corpus(30 if quick else 80, 4, seed=32, atoms=3, variant="nonrisky")
    eq_err, order_err, mono_fail, red_fail = 0.0, 0.0, 0, 0
    for inst in corpus:
        a, tree = optimal_adaptive(inst)
        na, _ = optimal_nonadaptive(inst)
        eq_err = max(eq_err, abs(a - enumerate_adaptive(inst)), abs(na - enumerate_nonadaptive(inst)))
        prev = na
        for k in range(1, inst.n + 1):
            ak, _ = optimal_k_semi_adaptive(inst, k)
            mono_fail += ak < prev - TOL
            prev = ak
        mono_fail += a < prev - TOL
        if inst.variant is Variant.RISKY:
            vals = {round(eval_nonadaptive(inst, p).expected_value, 12)
                    for p in permutations(range(inst.n))}
            order_err = max(order_err, max(vals) - min(vals))
            red = compound_reduce(inst, tree)
            tree_value = eval_tree(inst, tree).expected_value
            a_red, _ = optimal_adaptive(red.instance)
            na_red, _ = optimal_nonadaptive(red.instance)
            red_fail += a_red < tree_value - TOL
            red_fail += na_red > na + TOL
    ok = eq_err <= 1e-9 and order_err <= 1e-9 and mono_fail == 0 and red_fail == 0
    return CriterionResult(13, "property suites", ok,
                           {"instances": len(corpus), "oracle_vs_enumeration": eq_err,
                            "risky_order_spread": order_err, "monotonicity_failures": mono_fail,
                            "reduction_failures": red_fail})


CRITERIA = {
    1: crit_greedy0_certificate,
    2: crit_greedy0_gap,
    3: crit_semi1_certificate,
    4: crit_semik_certificate,
    5: crit_constants,
    6: crit_h2_risky,
    7: crit_h2_nonrisky,
    8: crit_noisy_lb,
    9: crit_nonrisky_recursion,
    10: crit_bernoulli_chain,
    11: crit_gap_product,
    12: crit_lp_bound,
    13: crit_properties,
}

TIME_LIMITS = {1: 60.0, 2: 120.0, 5: 180.0, 10: 60.0}


def run_criterion(cid: int, quick: bool = False, workers: int = 1) -> CriterionResult:
    fn = CRITERIA[cid]
    start = time.perf_counter()
    res = fn(quick, workers) if cid == 10 else fn(quick)
    res.seconds = time.perf_counter() - start
    limit = TIME_LIMITS.get(cid)
    if limit is not None and not quick:
        res.detail["time_limit"] = limit
        if res.seconds >= limit:
            res.passed = False
    return res


def run_all(quick: bool = False, workers: int = 1, only=None) -> list[CriterionResult]:
    ids = sorted(CRITERIA) if only is None else sorted(only)
    return [run_criterion(cid, quick, workers) for cid in ids]
