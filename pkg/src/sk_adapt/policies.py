"""Greedy non-adaptive and semi-adaptive policies, plus the large-item hybrid."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from .evalexact import BranchExplosionError, convolve_block, eval_procedural, optimal_adaptive
from .lpbound import phi_from_stats
from .model import (
    Instance,
    NonAdaptivePlan,
    Policy,
    Stop,
    TreePolicy,
    classify_small_large,
    derive_stats,
    greedy_order,
)

FILL_TOL = 1e-12
T_GRID = 64


@dataclass(frozen=True)
class NonAdaptiveTrace:
    alpha: float
    beta: float
    gamma: float
    options: tuple[float, ...]
    chosen: int  # 1..4, or 0 when no split item exists / phi(1) = 0
    block: tuple[int, ...] = ()
    split_item: int | None = None


@dataclass(frozen=True)
class OneSemiTrace:
    alpha: float
    beta: float
    gamma: float
    p: float
    zeta: float
    t_star: float
    options: tuple[float, ...]
    chosen: int
    t_fallback: float = float("nan")
    block: tuple[int, ...] = ()
    split_item: int | None = None


@dataclass(frozen=True)
class AlphaVector:
    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(a) for a in self.values)
        if not vals or any(not 0 < a < 1 for a in vals):
            raise ValueError("every alpha must lie in (0, 1)")
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)


def optimal_alpha(k: int) -> AlphaVector:
    if k < 0:
        raise ValueError("k must be nonnegative")
    return AlphaVector((1.0 / (k + 2),) * (k + 1))


def f_alpha(alpha) -> float:
    vals = list(alpha)
    return min(1.0, math.fsum(vals)) * math.prod(1.0 - a for a in vals)


def nonadaptive_options(alpha, beta, gamma):
    return (alpha * (1 - alpha), (beta - gamma) * (1 - alpha), gamma, beta * (1 - beta))


def o5_value(alpha, beta, gamma, p, t):
    """Conditional-insert objective; broadcasts over numpy inputs."""
    alpha, beta, gamma, p, t = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (alpha, beta, gamma, p, t)))
    with np.errstate(divide="ignore", invalid="ignore"):
        # at t = 1 the ratio (alpha - p) / (1 - t) is 0/0 when alpha == p; read it as 0
        h = np.where(t < 1, 1 - p - (alpha - p) / (1 - t), np.where(alpha - p <= 0, 1 - p, 0.0))
        h = np.maximum(h, 0.0)
        h = np.where(np.isnan(h), 0.0, h)
        gain = gamma - beta * (beta - alpha) / t
        extra = np.where(h > 0, h * gain, 0.0)
    out = (1 - p) * (beta - gamma) + extra
    return out if out.ndim else float(out)


def zeta_bounds(alpha, beta, gamma, p):
    fixed = 1 - 2 * (alpha - p) / (1 - p)
    if gamma > 0:
        return min(beta * (beta - alpha) / gamma, fixed), fixed
    return fixed, fixed


def maximize_o5(alpha, beta, gamma, p) -> tuple[float, float, float, float]:
    """Return (best o5, t_star, zeta, fallback t) over t in [zeta, 1]."""
    zeta, fixed = zeta_bounds(alpha, beta, gamma, p)
    lo = min(max(zeta, 1e-12), 1.0)
    grid = np.linspace(lo, 1.0, T_GRID)
    vals = o5_value(alpha, beta, gamma, p, grid)
    j = int(np.argmax(vals))
    best_t, best = float(grid[j]), float(vals[j])
    a, b = grid[max(j - 1, 0)], grid[min(j + 1, T_GRID - 1)]
    if b > a:
        res = minimize_scalar(lambda t: -o5_value(alpha, beta, gamma, p, t), bounds=(a, b),
                              method="bounded", options={"xatol": 1e-12})
        if -res.fun > best:
            best, best_t = float(-res.fun), float(res.x)
    fixed_t = min(max(fixed, lo), 1.0)
    fixed_val = float(o5_value(alpha, beta, gamma, p, fixed_t))
    if fixed_val > best:
        best, best_t = fixed_val, fixed_t
    return best, best_t, zeta, fixed


@dataclass(frozen=True)
class _Split:
    block: tuple[int, ...]
    split_item: int | None
    alpha: float
    beta: float
    gamma: float
    phi1: float


def _greedy_split(instance: Instance) -> _Split:
    stats = derive_stats(instance)
    order = greedy_order(instance, stats)
    phi1 = phi_from_stats(stats, order, 1.0).value
    block = []
    mass = 0.0
    pos = 0
    while pos < len(order) and mass + stats[order[pos]].mean_truncated_size <= 0.5 + FILL_TOL:
        mass += stats[order[pos]].mean_truncated_size
        block.append(order[pos])
        pos += 1
    if pos == len(order):
        return _Split(tuple(block), None, mass, mass, 0.0, phi1)
    ell = order[pos]
    beta = mass + stats[ell].mean_truncated_size
    gamma = stats[ell].effective_value / phi1 if phi1 > 0 else 0.0
    return _Split(tuple(block), ell, mass, beta, gamma, phi1)


def non_adaptive_greedy(instance: Instance) -> tuple[NonAdaptivePlan, NonAdaptiveTrace]:
    if instance.n < 1:
        raise ValueError("instance has no items")
    sp = _greedy_split(instance)
    if sp.phi1 <= 0:
        return NonAdaptivePlan(()), NonAdaptiveTrace(0.0, 0.0, 0.0, (0.0,) * 4, 0)
    if sp.split_item is None:
        return NonAdaptivePlan(sp.block), NonAdaptiveTrace(sp.alpha, sp.beta, 0.0, (0.0,) * 4, 0, sp.block)
    opts = nonadaptive_options(sp.alpha, sp.beta, sp.gamma)
    chosen = int(np.argmax(opts)) + 1
    plan = {1: sp.block, 2: sp.block, 3: (sp.split_item,), 4: sp.block + (sp.split_item,)}[chosen]
    trace = NonAdaptiveTrace(sp.alpha, sp.beta, sp.gamma, tuple(opts), chosen, sp.block, sp.split_item)
    return NonAdaptivePlan(plan), trace


@dataclass(frozen=True)
class ConditionalInsertPolicy(Policy):
    """Insert ``first``, observe, then insert ``then`` iff the remaining room is >= threshold."""

    first: tuple[int, ...]
    then: int
    threshold: float  # fraction of capacity
    scale: int
    name = "conditional"

    def next_block(self, state, used):
        if state == 0:
            return self.first, 1
        room = self.scale - used
        if room >= self.threshold * self.scale - 1e-9 * self.scale:
            return (self.then,), None
        return (), None


def one_semi_adaptive_greedy(instance: Instance) -> tuple[Policy, OneSemiTrace]:
    if instance.n < 1:
        raise ValueError("instance has no items")
    sp = _greedy_split(instance)
    if sp.phi1 <= 0:
        return NonAdaptivePlan(()), OneSemiTrace(0, 0, 0, 0, 1, 1, (0.0,) * 5, 0)
    if sp.split_item is None:
        return NonAdaptivePlan(sp.block), OneSemiTrace(sp.alpha, sp.beta, 0, 0, 1, 1, (0.0,) * 5, 0,
                                                    block=sp.block)
    a, b, g = sp.alpha, sp.beta, sp.gamma
    p = convolve_block(instance, sp.block).overflow
    opts = [a * (1 - p), (b - g) * (1 - p), g, b * (1 - b)]
    if p < 1:
        o5, t_star, zeta, fixed = maximize_o5(a, b, g, p)
    else:
        o5, t_star, zeta, fixed = -math.inf, 1.0, 1.0, 1.0
    opts.append(o5)
    chosen = int(np.argmax(opts)) + 1
    ell = sp.split_item
    if chosen == 5:
        pol: Policy = ConditionalInsertPolicy(sp.block, ell, t_star, instance.scale)
    else:
        pol = NonAdaptivePlan({1: sp.block, 2: sp.block, 3: (ell,), 4: sp.block + (ell,)}[chosen])
    trace = OneSemiTrace(a, b, g, p, zeta, t_star, tuple(opts), chosen, fixed, sp.block, ell)
    return pol, trace


@dataclass(frozen=True)
class SemiAdaptiveGreedyPolicy(Policy):
    """Fill k+1 blocks in greedy order; block i gets mass <= alpha_i * (remaining room)."""

    order: tuple[int, ...]
    masses: tuple[float, ...]  # indexed by item id
    alphas: tuple[float, ...]
    scale: int
    name = "semik"

    def initial_state(self):
        return (0, 0)

    def next_block(self, state, used):
        stage, pos = state
        limit = self.alphas[stage] * (1 - used / self.scale)
        block = []
        mass = 0.0
        while pos < len(self.order) and mass + self.masses[self.order[pos]] <= limit + FILL_TOL:
            mass += self.masses[self.order[pos]]
            block.append(self.order[pos])
            pos += 1
        nxt = (stage + 1, pos) if stage + 1 < len(self.alphas) else None
        return tuple(block), nxt


def semi_adaptive_greedy(instance: Instance, k: int, alpha=None) -> SemiAdaptiveGreedyPolicy:
    alpha = optimal_alpha(k) if alpha is None else AlphaVector(tuple(alpha))
    if len(alpha) != k + 1:
        raise ValueError("alpha must have k + 1 entries")
    stats = derive_stats(instance)
    order = greedy_order(instance, stats)
    return SemiAdaptiveGreedyPolicy(tuple(order), tuple(s.mean_truncated_size for s in stats),
                                    tuple(alpha), instance.scale)


@dataclass(frozen=True)
class CountThresholdPolicy(Policy):
    """Insert items one at a time in ``order``; once the knapsack is non-empty,
    keep going only while fewer than ``threshold`` items are in."""

    order: tuple[int, ...]
    threshold: int
    name = "count-threshold"

    def next_block(self, count, used):
        if count >= len(self.order):
            return (), None
        if used > 0 and count >= self.threshold:
            return (), None
        return (self.order[count],), count + 1

    def keep_going(self, count: int, used: np.ndarray) -> np.ndarray:
        return (used == 0) | (count < self.threshold)


@dataclass(frozen=True, eq=False)
class HybridPolicy(Policy):
    """Follow a decision tree for ``depth`` insertions, then run the greedy
    non-adaptive rule on whatever is left."""

    instance: Instance
    tree: TreePolicy
    depth: int
    fallback_constant: float = 8.5
    name = "hybrid"

    def initial_state(self):
        return ("node", self.tree.root, frozenset())

    def _fallback(self, done: frozenset, used: int):
        room = self.instance.scale - used
        rest = [i for i in range(self.instance.n) if i not in done]
        if room <= 0 or not rest:
            return (), None
        sub = self.instance.subset(rest).with_scale(room)
        plan, _ = non_adaptive_greedy(sub)
        return tuple(rest[j] for j in plan.items), None

    def next_block(self, state, used):
        tag, node, done = state
        if tag == "sel":
            node = node.child_for(self.tree.scale - used)
        if isinstance(node, Stop):
            return (), None
        if len(done) + len(node.block) > self.depth:
            return self._fallback(done, used)
        done2 = done | frozenset(node.block)
        if not node.children:
            return node.block, None
        return node.block, ("sel", node, done2)


def large_item_hybrid(instance: Instance, eps: float, tree: TreePolicy | None = None) -> HybridPolicy:
    stats = derive_stats(instance)
    if any(s.mean_truncated_size < eps for s in stats):
        raise ValueError("instance contains small items")
    if tree is None:
        _, tree = optimal_adaptive(instance)
    return HybridPolicy(instance, tree, hybrid_depth(eps))


def hybrid_depth(eps: float) -> int:
    m = math.ceil(1.0 / eps)
    return math.ceil(5 * m * math.log(m))


@dataclass(frozen=True, eq=False)
class RemappedPolicy(Policy):
    """Run a policy built for a sub-instance on the parent instance."""

    inner: Policy
    ids: tuple[int, ...]
    name = "remapped"

    def initial_state(self):
        return self.inner.initial_state()

    def next_block(self, state, used):
        block, nxt = self.inner.next_block(state, used)
        return tuple(self.ids[i] for i in block), nxt


@dataclass(frozen=True)
class PartitionChoice:
    policy: Policy
    small_value: float | None
    large_value: float | None
    chosen: str


def _default_small(sub: Instance) -> Policy:
    return semi_adaptive_greedy(sub, 1)


def _value_of(sub: Instance, pol: Policy) -> float:
    try:
        return eval_procedural(sub, pol).expected_value
    except BranchExplosionError:
        from .montecarlo import McConfig

        return eval_procedural(sub, pol, mode="mc", mc_config=McConfig(samples=20000)).mean


def partition_combine(instance: Instance, eps: float,
                      small_policy_maker: Callable[[Instance], Policy] | None = None,
                      large_policy_maker: Callable[[Instance], Policy] | None = None) -> PartitionChoice:
    small_policy_maker = small_policy_maker or _default_small
    large_policy_maker = large_policy_maker or (lambda sub: large_item_hybrid(sub, eps))
    small, large = classify_small_large(instance, eps)
    cands = {}
    for tag, ids, maker in (("small", small, small_policy_maker), ("large", large, large_policy_maker)):
        if not ids:
            continue
        sub = instance.subset(ids)
        pol = maker(sub)
        cands[tag] = (RemappedPolicy(pol, tuple(ids)), _value_of(sub, pol))
    if not cands:
        raise ValueError("instance has no items")
    tag = max(cands, key=lambda t: (cands[t][1], t == "small"))
    return PartitionChoice(cands[tag][0], cands.get("small", (None, None))[1],
                           cands.get("large", (None, None))[1], tag)
