"""Instance constructors: identical Bernoulli items, two-stage worst cases,
the noisy lower-bound chain, seeded random instances and compound reduction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .evalexact import convolve_block
from .model import (
    STOP,
    DiscreteDist,
    InsertNode,
    Instance,
    Item,
    Stop,
    TreePolicy,
    Variant,
)

PROB_SUM_TOL = 1e-9


@dataclass(frozen=True)
class BernoulliEps:
    eps: float
    n: int
    variant: str = "risky"


@dataclass(frozen=True)
class H2Risky:
    p: tuple[float, ...]
    eps_sep: float | None = None


@dataclass(frozen=True)
class H2NonRisky:
    p: tuple[float, ...]
    p0: float = 0.0
    a: float = 1e9
    eps_sep: float | None = None


@dataclass(frozen=True)
class NoisyLB:
    k: int
    eps_base: float = 1e-3


@dataclass(frozen=True)
class RandomSpec:
    n: int
    atoms: int = 4
    seed: int = 0
    scale: int = 20
    value_range: tuple[float, float] = (0.0, 1.0)
    max_size: float = 1.5  # largest atom as a fraction of capacity
    variant: str = "risky"
    mode: str = "any"  # any | small | large
    eps: float = 0.05


def _grid_count(x: float, what: str) -> int:
    r = round(x)
    if r < 1 or abs(x - r) > 1e-9 * max(1.0, abs(x)):
        raise ValueError(f"{what}: 1/eps = {x} is not a positive integer grid count")
    return int(r)


def make_bernoulli_eps(eps: float, n: int, variant: str = "risky") -> Instance:
    scale = _grid_count(1.0 / eps, "make_bernoulli_eps")
    dist = DiscreteDist.build([(0, 1.0 - eps), (scale, eps)], scale)
    return Instance(tuple(Item(eps, dist) for _ in range(n)), scale, Variant(variant))


def _check_prob_vector(p) -> list[float]:
    p = [float(x) for x in p]
    if not p or any(x < 0 for x in p):
        raise ValueError("probabilities must be nonnegative and nonempty")
    if abs(math.fsum(p) - 1.0) > PROB_SUM_TOL:
        raise ValueError("probability vector must sum to 1")
    return p


def _ladder(n: int, eps_sep: float | None) -> tuple[int, int]:
    """Return (scale, half) with one grid unit equal to eps_sep."""
    eps_sep = 1.0 / (4 * n) if eps_sep is None else eps_sep
    if n * eps_sep >= 0.5:
        raise ValueError("eps_sep too coarse: need n * eps_sep < 0.5")
    half = _grid_count(0.5 / eps_sep, "size ladder")
    return 2 * half, half


def h2_risky_values(p) -> list[float]:
    p = _check_prob_vector(p)
    if p[0] < 0.5:
        raise ValueError("need p_1 >= 0.5 for nonnegative values")
    v1 = p[0] / (1 - p[0]) if p[0] < 1 else 1.0
    out, acc = [], 0.0
    for x in p:
        acc += x
        out.append(p[0] * (1 + v1) / acc - 1)
    out[0] = v1
    return out


def make_h2_risky(p, eps_sep: float | None = None) -> Instance:
    p = _check_prob_vector(p)
    n = len(p)
    vals = h2_risky_values(p)
    scale, half = _ladder(n, eps_sep)
    # item 0 lands at half - (n - i) w.p. p_i, so item i fits after it exactly when the
    # outcome index is <= i
    first = DiscreteDist.build([(half - (n - i), p[i - 1]) for i in range(1, n + 1)], scale)
    items = [Item(1.0, first)]
    for i in range(1, n + 1):
        items.append(Item(max(vals[i - 1], 0.0), DiscreteDist.point(half + (n - i), scale)))
    return Instance(tuple(items), scale, Variant.RISKY)


def h2_nonrisky_effective(p, p0: float = 0.0) -> list[float]:
    p = _check_prob_vector(p)
    q = 1.0 - p0
    w1 = q / (1 - q * p[0])
    out, acc = [], 0.0
    for x in p:
        acc += x
        out.append(p[0] * w1 / acc)
    out[0] = w1
    return out


def make_h2_nonrisky(p, p0: float = 0.0, a: float = 1e9, eps_sep: float | None = None) -> Instance:
    p = _check_prob_vector(p)
    if not 0 <= p0 < 1:
        raise ValueError("p0 must lie in [0, 1)")
    n = len(p)
    q = 1.0 - p0
    w = h2_nonrisky_effective(p, p0)
    scale, half = _ladder(n, eps_sep)
    atoms = [(half - (n - i), q * p[i - 1]) for i in range(1, n + 1)]
    if p0 > 0:
        atoms.append((2 * scale, p0))
    items = [Item(1.0, DiscreteDist.build(atoms, scale))]
    for i in range(1, n + 1):
        dist = DiscreteDist.build([(half + (n - i), 1.0 / a), (2 * scale, 1.0 - 1.0 / a)], scale)
        items.append(Item(a * w[i - 1], dist))
    return Instance(tuple(items), scale, Variant.NONRISKY)


def noisy_lb_values(k: int) -> tuple[list[Fraction], list[Fraction], list[Fraction]]:
    """Exact (values, V, G) sequences of the noisy chain."""
    vals, V, G = [Fraction(1)], [Fraction(1)], [Fraction(1)]
    for _ in range(2, k + 1):
        w = V[-1] / G[-1]
        vals.append(w)
        V.append(w + V[-1] / 2)
        G.append(G[-1] / 2 + 1)
    return vals, V, G


def make_noisy_lb(k: int, eps_base: float = 1e-3) -> Instance:
    if k < 1:
        raise ValueError("k must be at least 1")
    base = _grid_count(1.0 / eps_base, "make_noisy_lb")
    if base < 2:
        raise ValueError("grid resolution insufficient: eps_base must be at most 1/2")
    scale = base**k
    vals, _, _ = noisy_lb_values(k)
    items = [Item(float(vals[0]), DiscreteDist.point(scale - base ** (k - 1), scale))]
    for j in range(2, k + 1):
        small = base ** (k - j)
        items.append(Item(float(vals[j - 1]), DiscreteDist.build([(small, 0.5), (scale - small, 0.5)], scale)))
    return Instance(tuple(items), scale, Variant.RISKY)


def make_random(spec: RandomSpec) -> Instance:
    rng = np.random.default_rng(spec.seed)
    scale = spec.scale
    if spec.mode == "small":
        scale = max(scale, math.ceil(4 / spec.eps))
    lo_v, hi_v = spec.value_range
    items = []
    for _ in range(spec.n):
        k = 1 if spec.atoms == 1 else int(rng.integers(1, spec.atoms + 1))
        if spec.mode == "small":
            top = max(1, int(2 * spec.eps * scale))
            pool = np.arange(0, top + 1)
        elif spec.mode == "large":
            low = int(math.floor(spec.eps * scale)) + 1
            pool = np.arange(low, max(low + 1, int(spec.max_size * scale)) + 1)
        else:
            pool = np.arange(0, int(spec.max_size * scale) + 1)
        sizes = rng.choice(pool, size=min(k, len(pool)), replace=False)
        probs = rng.dirichlet(np.ones(len(sizes)))
        atoms = [(int(s), float(q)) for s, q in zip(sizes, probs)]
        if spec.mode == "small":
            mean = sum(min(s, scale) * q for s, q in atoms) / scale
            if mean > spec.eps:
                keep = spec.eps / mean * (1 - 1e-12)
                atoms = [(s, q * keep) for s, q in atoms] + [(0, 1.0 - keep)]
        value = float(rng.uniform(lo_v, hi_v))
        items.append(Item(value, DiscreteDist.build(atoms, scale)))
    return Instance(tuple(items), scale, Variant(spec.variant))


def random_corpus(count: int, n_max: int, seed: int, n_min: int = 1, **kw) -> list[Instance]:
    ss = np.random.SeedSequence(seed)
    out = []
    for child in ss.spawn(count):
        sub_seed = int(child.generate_state(1)[0])
        n = int(np.random.default_rng(sub_seed).integers(n_min, n_max + 1))
        out.append(make_random(RandomSpec(n=n, seed=sub_seed, **kw)))
    return out


# --- predictions -------------------------------------------------------------


def h2_nonrisky_gap_with_overflow(p, p0: float = 0.0) -> float:
    p = _check_prob_vector(p)
    q = 1.0 - p0
    acc = p[0]
    terms = []
    for x in p[1:]:
        acc += x
        terms.append(x / acc)
    return 1.0 + q * p[0] * math.fsum(terms)


def predictions(spec) -> dict:
    from .gaps import h2_risky_gap, risky_recursion

    if isinstance(spec, BernoulliEps):
        if spec.variant == "nonrisky":
            return {"adapt_value": 2 - spec.eps, "overflow_prob": 1.0}
        return {"phi1": 1.0}
    if isinstance(spec, H2Risky):
        vals = h2_risky_values(spec.p)
        adapt = 1.0 + math.fsum(pi * vi for pi, vi in zip(spec.p, vals))
        return {"gap": h2_risky_gap(spec.p), "alg_value": vals[0], "adapt_value": adapt,
                "option_values": [vals[0]] * (len(spec.p) + 1)}
    if isinstance(spec, H2NonRisky):
        w = h2_nonrisky_effective(spec.p, spec.p0)
        q = 1.0 - spec.p0
        adapt = q * (1.0 + math.fsum(pi * wi for pi, wi in zip(spec.p, w)))
        return {"gap": h2_nonrisky_gap_with_overflow(spec.p, spec.p0), "alg_value": w[0],
                "adapt_value": adapt, "distortion_budget": 10 * len(spec.p) / spec.a}
    if isinstance(spec, NoisyLB):
        _, V, G = noisy_lb_values(spec.k)
        return {"gap": risky_recursion(spec.k)[-1], "adapt_value": float(V[-1]),
                "alg_value": float(V[-1] / G[-1])}
    return {}


def build_family(spec) -> Instance:
    if isinstance(spec, BernoulliEps):
        return make_bernoulli_eps(spec.eps, spec.n, spec.variant)
    if isinstance(spec, H2Risky):
        return make_h2_risky(spec.p, spec.eps_sep)
    if isinstance(spec, H2NonRisky):
        return make_h2_nonrisky(spec.p, spec.p0, spec.a, spec.eps_sep)
    if isinstance(spec, NoisyLB):
        return make_noisy_lb(spec.k, spec.eps_base)
    if isinstance(spec, RandomSpec):
        return make_random(spec)
    raise TypeError(f"unknown family spec {spec!r}")


def worst_case_h2_risky(n: int) -> tuple[float, ...]:
    if n == 1:
        return (1.0,)
    return (0.5,) + (0.5 / (n - 1),) * (n - 1)


def worst_case_h2_nonrisky(n: int) -> tuple[float, ...]:
    if n == 1:
        return (1.0,)
    p1 = math.exp(-1)
    return (p1,) + ((1 - p1) / (n - 1),) * (n - 1)


# --- compound reduction --------------------------------------------------------


@dataclass
class CompoundReduction:
    instance: Instance
    segments: list[tuple[int, ...]]
    paths: list[frozenset]
    tree: TreePolicy = field(repr=False)


def compound_reduce(instance: Instance, tree: TreePolicy) -> CompoundReduction:
    """Collapse every observation-free stretch of ``tree`` into one compound item."""
    if instance.variant is not Variant.RISKY:
        raise ValueError("compound reduction is defined for the risky variant")
    scale = instance.scale
    segments: list[tuple[int, ...]] = []
    seen: dict[int, tuple[int, object]] = {}
    paths: list[frozenset] = []

    def chain(node):
        block = []
        while isinstance(node, InsertNode):
            block.extend(node.block)
            if node.observes(scale) or not node.children:
                break
            node = node.children[0][2]
        return tuple(block), node

    def visit(node, path: tuple):
        if isinstance(node, Stop):
            paths.append(frozenset(path))
            return STOP
        if id(node) in seen:
            rid, built = seen[id(node)]
            _walk_paths(built, path)
            return built
        block, last = chain(node)
        if not block:
            paths.append(frozenset(path))
            return STOP
        rid = len(segments)
        segments.append(block)
        here = path + (rid,)
        kids = ()
        if isinstance(last, InsertNode) and last.observes(scale):
            kids = tuple((lo, hi, visit(c, here)) for lo, hi, c in last.children)
        else:
            paths.append(frozenset(here))
        built = InsertNode((rid,), kids)
        seen[id(node)] = (rid, built)
        return built

    def _walk_paths(built, path):
        if isinstance(built, Stop):
            paths.append(frozenset(path))
            return
        here = path + built.block
        if not built.children:
            paths.append(frozenset(here))
        for _, _, c in built.children:
            _walk_paths(c, here)

    root = visit(tree.root, ())
    items = []
    for seg in segments:
        sd = convolve_block(instance, seg)
        atoms = [(int(s), float(p)) for s, p in zip(sd.support, sd.probs)]
        if sd.overflow > 0:
            atoms.append((2 * scale, sd.overflow))
        items.append(Item(math.fsum(instance.items[i].value for i in seg), DiscreteDist.build(atoms, scale)))
    uniq = tuple(sorted(set(paths), key=sorted))
    new = Instance(tuple(items), scale, Variant.RISKY, uniq)
    return CompoundReduction(new, segments, list(uniq), TreePolicy(root, scale))
