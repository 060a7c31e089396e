"""Gap measurement, closed-form gap formulas, recursions and min-max certificates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .evalexact import optimal_adaptive, optimal_k_semi_adaptive, optimal_nonadaptive
from .lpbound import phi
from .model import Instance
from .policies import nonadaptive_options, maximize_o5, o5_value


@dataclass(frozen=True)
class GapReport:
    adapt_value: float
    alg_value: float
    gap_full: float
    a_k_value: float | None = None
    gap_0k: float | None = None
    gap_kn: float | None = None
    product_slack: float | None = None
    k: int | None = None


def _ratio(num: float, den: float) -> float:
    if den > 0:
        return num / den
    return 1.0 if num <= 0 else math.inf


def measure_gaps(instance: Instance, k: int | None = None) -> GapReport:
    adapt, _ = optimal_adaptive(instance)
    alg, _ = optimal_nonadaptive(instance)
    full = _ratio(adapt, alg)
    if k is None:
        return GapReport(adapt, alg, full)
    ak, _ = optimal_k_semi_adaptive(instance, k)
    g0k, gkn = _ratio(ak, alg), _ratio(adapt, ak)
    return GapReport(adapt, alg, full, ak, g0k, gkn, g0k * gkn - full, k)


def _partial_ratio_sum(p) -> float:
    p = [float(x) for x in p]
    if any(x < 0 for x in p) or abs(math.fsum(p) - 1) > 1e-9:
        raise ValueError("p must be a probability vector")
    acc = p[0]
    terms = []
    for x in p[1:]:
        acc += x
        terms.append(x / acc)
    return math.fsum(terms)


def h2_risky_gap(p) -> float:
    return 1.0 + _partial_ratio_sum(p)


def h2_nonrisky_gap(p) -> float:
    return 1.0 + float(p[0]) * _partial_ratio_sum(p)


def risky_recursion(k: int) -> list[float]:
    if k < 1:
        raise ValueError("k must be >= 1")
    seq = [1.0]
    for _ in range(k - 1):
        seq.append(seq[-1] / 2 + 1)
    return seq


def risky_closed_form(j: int) -> float:
    return 2.0 - 2.0 ** (1 - j)


def nonrisky_recursion(k: int) -> list[float]:
    if k < 1:
        raise ValueError("k must be >= 1")
    seq = [1.0]
    for _ in range(k - 1):
        seq.append(1 + seq[-1] ** 2 / 4)
    return seq


@dataclass(frozen=True)
class CertResult:
    min_found: float
    argmin: dict
    grid_min: float


def _refine(fun, x0, bounds):
    res = minimize(fun, x0, method="Nelder-Mead", bounds=bounds,
                   options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000})
    return float(res.fun), res.x


def t_objective(alpha, beta, gamma):
    return max(nonadaptive_options(alpha, beta, gamma))


def certify_T(grid_resolution: int = 200) -> CertResult:
    if grid_resolution < 50:
        raise ValueError("grid resolution must be at least 50")
    g = grid_resolution + 1
    al = np.linspace(0.0, 0.5, g)
    be = np.linspace(0.5, 1.0, g)
    ga = np.linspace(0.0, 1.0, g)
    B, Gm = np.meshgrid(be, ga, indexing="ij")
    best, arg = math.inf, None
    o4 = B * (1 - B)
    for a in al:
        o = np.maximum.reduce([np.full_like(B, a * (1 - a)), (B - Gm) * (1 - a), Gm, o4])
        j = int(np.argmin(o))
        if o.flat[j] < best:
            best = float(o.flat[j])
            arg = (a, float(B.flat[j]), float(Gm.flat[j]))
    grid_min = best
    val, x = _refine(lambda v: t_objective(*v), np.array(arg), [(0, 0.5), (0.5, 1), (0, 1)])
    if val < best:
        best, arg = val, tuple(float(c) for c in x)
    return CertResult(best, {"alpha": arg[0], "beta": arg[1], "gamma": arg[2]}, grid_min)


def tprime_value(alpha, beta, gamma, p, fixed_t: bool = False) -> float:
    """max of the five options at one point, with o5 maximised over t (or at the fixed t)."""
    opts = [alpha * (1 - p), (beta - gamma) * (1 - p), gamma, beta * (1 - beta)]
    if p < 1:
        if fixed_t:
            t = 1 - 2 * (alpha - p) / (1 - p)
            opts.append(float(o5_value(alpha, beta, gamma, p, max(t, 1e-12))))
        else:
            opts.append(maximize_o5(alpha, beta, gamma, p)[0])
    return max(opts)


def certify_Tprime(grid_resolution: int = 100, fixed_t: bool = False, t_points: int = 48,
                   refine_starts: int = 8) -> CertResult:
    if grid_resolution < 10:
        raise ValueError("grid resolution must be at least 10")
    g = grid_resolution + 1
    ps = np.linspace(0.0, 0.5, g)
    ss = np.linspace(0.0, 1.0, g)
    be = np.linspace(0.5, 1.0, g)
    ga = np.linspace(0.0, 0.25, g)
    S, B, Gm = np.meshgrid(ss, be, ga, indexing="ij")
    tt = np.linspace(0.0, 1.0, t_points)
    best = 0.25 + 1e-9  # the witness at alpha = p = 0, beta = 0.5, gamma = 0.25
    cands = []
    for p in ps:
        A = p + S * (0.5 - p)
        base = np.maximum.reduce([A * (1 - p), (B - Gm) * (1 - p), Gm, B * (1 - B)])
        live = base < best
        if not live.any():
            continue
        a, b, c, lb = A[live], B[live], Gm[live], base[live]
        fixed = 1 - 2 * (a - p) / (1 - p)
        with np.errstate(divide="ignore", invalid="ignore"):
            zeta = np.where(c > 0, np.minimum(b * (b - a) / c, fixed), fixed)
        zeta = np.clip(zeta, 1e-12, 1.0)
        o5 = o5_value(a, b, c, p, np.clip(fixed, 1e-12, 1.0))
        if not fixed_t:
            for u in tt:
                t = zeta + u * (1 - zeta)
                o5 = np.maximum(o5, o5_value(a, b, c, p, t))
        tot = np.maximum(lb, o5)
        j = int(np.argmin(tot))
        cands.append((float(tot[j]), float(a[j]), float(b[j]), float(c[j]), float(p)))
        best = min(best, float(tot[j]))
    cands.sort()
    grid_min = cands[0][0] if cands else best

    def obj(v):
        p, s, b, c = v
        a = p + s * (0.5 - p)
        return tprime_value(a, b, c, p, fixed_t)

    result, arg = math.inf, None
    for val, a, b, c, p in cands[:refine_starts]:
        s = (a - p) / (0.5 - p) if p < 0.5 else 0.0
        precise = obj((p, s, b, c))
        if precise < result:
            result, arg = precise, (a, b, c, p)
        rv, x = _refine(obj, np.array([p, s, b, c]), [(0, 0.5), (0, 1), (0.5, 1), (0, 0.25)])
        if rv < result:
            p2, s2, b2, c2 = (float(z) for z in x)
            result, arg = rv, (p2 + s2 * (0.5 - p2), b2, c2, p2)
    if arg is None:
        result, arg = 0.25, (0.0, 0.5, 0.25, 0.0)
    return CertResult(result, {"alpha": arg[0], "beta": arg[1], "gamma": arg[2], "p": arg[3]}, grid_min)


@dataclass(frozen=True)
class BernoulliChainResult:
    threshold: int
    value_estimate: float
    overflow_prob: float
    chain_value: float
    chain_overflow: float


def bernoulli_chain_mdp(eps: float, horizon: int | None = None) -> BernoulliChainResult:
    """Backward induction for V(i) = max(i, (1 - eps) V(i + 1)) with V(horizon) = horizon.

    ``value_estimate`` and ``overflow_prob`` are the step-count estimates
    eps * (1/eps + k (1-eps)^k) and that minus one. ``chain_value`` and
    ``chain_overflow`` are the exact value and overflow probability of the same
    threshold rule with unlimited items, where an overflow forfeits everything.
    """
    if not 0 < eps <= 0.1:
        raise ValueError("eps must lie in (0, 0.1]")
    horizon = horizon or math.ceil(20 / eps)
    if horizon < 4 / eps:
        raise ValueError("horizon must be at least 4/eps")
    q = 1.0 - eps
    V = float(horizon)
    k = horizon
    for i in range(horizon - 1, 0, -1):
        cont = q * V
        if i >= cont:
            V = float(i)
            k = i
        else:
            V = cont
    estimate = eps * (1 / eps + k * q**k)
    head = q ** (k - 1)
    chain_value = head * (eps * eps * k * (k - 1) + eps * (k - 1) + 1)
    chain_overflow = (1 - head) - eps * (k - 1) * head
    return BernoulliChainResult(k, estimate, estimate - 1, chain_value, chain_overflow)


def phi_ratio_probe(instance: Instance) -> float:
    adapt, _ = optimal_adaptive(instance)
    return _ratio(adapt, phi(instance, 1.0).value)
