"""Exact evaluation of policies and exact optimal-policy oracles for small instances."""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .model import (
    STOP,
    DiscreteDist,
    InsertNode,
    Instance,
    NonAdaptivePlan,
    Policy,
    SizeLimitError,
    TreePolicy,
    Variant,
    greedy_order,
)

ADAPT_LIMIT = 15
NONADAPT_LIMIT = {Variant.RISKY: 15, Variant.NONRISKY: 12}
SEMI_LIMIT = 8
NODE_BUDGET = 2_000_000
TABLE_BUDGET = 40_000_000
DRIFT_TOL = 1e-9


class BranchExplosionError(SizeLimitError):
    pass


def _int_dtype(scale: int):
    return np.int64 if 3 * scale < 2**62 else object


@dataclass(frozen=True)
class SumDist:
    """Distribution of a total size; all mass above ``scale`` sits in ``overflow``."""

    support: np.ndarray
    probs: np.ndarray
    overflow: float
    scale: int

    @classmethod
    def point(cls, x: int, scale: int) -> "SumDist":
        dt = _int_dtype(scale)
        if x > scale:
            return cls(np.zeros(0, dtype=dt), np.zeros(0), 1.0, scale)
        return cls(np.array([x], dtype=dt), np.ones(1), 0.0, scale)

    def convolve(self, dist: DiscreteDist) -> "SumDist":
        dt = self.support.dtype
        sizes = np.array(dist.sizes, dtype=dt)
        probs = np.array(dist.probs)
        tot = (self.support[:, None] + sizes[None, :]).ravel()
        w = (self.probs[:, None] * probs[None, :]).ravel()
        keep = tot <= self.scale
        spill = math.fsum(w[~keep]) if not keep.all() else 0.0
        uniq, inv = np.unique(tot[keep], return_inverse=True)
        agg = np.bincount(inv.ravel(), weights=w[keep], minlength=len(uniq)) if len(uniq) else np.zeros(0)
        return SumDist(uniq.astype(dt), agg, self.overflow + spill, self.scale)

    def cdf(self, room: int) -> float:
        if room < 0:
            return 0.0
        k = int(np.searchsorted(self.support, room, side="right"))
        return math.fsum(self.probs[:k])

    def as_dict(self) -> dict:
        out = {int(s): float(p) for s, p in zip(self.support, self.probs)}
        if self.overflow > 0:
            out["overflow"] = float(self.overflow)
        return out

    def total_mass(self) -> float:
        return math.fsum(self.probs) + self.overflow


def convolve_block(instance: Instance, block) -> SumDist:
    acc = SumDist.point(0, instance.scale)
    for i in block:
        acc = acc.convolve(instance.items[i].dist)
    drift = abs(acc.total_mass() - 1.0)
    if drift > DRIFT_TOL:
        raise ArithmeticError(f"probability drift {drift} after convolution")
    return acc


@dataclass(frozen=True)
class EvalResult:
    expected_value: float
    overflow_prob: float
    queries_used: int
    states: int = 0


def _check_ids(instance: Instance, ids) -> None:
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate item ids")
    for i in ids:
        if not 0 <= i < instance.n:
            raise ValueError(f"item id {i} out of range")


def eval_nonadaptive(instance: Instance, plan) -> EvalResult:
    ids = tuple(plan.items if isinstance(plan, NonAdaptivePlan) else plan)
    _check_ids(instance, ids)
    vals = instance.values
    acc = SumDist.point(0, instance.scale)
    terms = []
    for i in ids:
        acc = acc.convolve(instance.items[i].dist)
        if instance.variant is Variant.NONRISKY:
            terms.append(vals[i] * acc.cdf(instance.scale))
    fit = 1.0 - acc.overflow
    if instance.variant is Variant.RISKY:
        value = math.fsum(vals[i] for i in ids) * fit
    else:
        value = math.fsum(terms)
    return EvalResult(value, acc.overflow if ids else 0.0, 0)


class _Runner:
    """Exact expectation of any ``Policy`` by branching over observed capacity."""

    def __init__(self, instance: Instance, policy: Policy, node_budget: int):
        self.inst = instance
        self.policy = policy
        self.vals = instance.values
        self.risky = instance.variant is Variant.RISKY
        self.budget = node_budget
        self.memo: dict = {}
        self.sums: dict = {(): SumDist.point(0, instance.scale)}
        self.mask_sums: dict = {}

    def block_sum(self, block: tuple) -> SumDist:
        hit = self.sums.get(block)
        if hit is None:
            hit = self.block_sum(block[:-1]).convolve(self.inst.items[block[-1]].dist)
            self.sums[block] = hit
        return hit

    def mask_value(self, mask: int) -> float:
        hit = self.mask_sums.get(mask)
        if hit is None:
            hit = math.fsum(v for i, v in enumerate(self.vals) if mask >> i & 1)
            self.mask_sums[mask] = hit
        return hit

    def run(self, state, used: int, mask: int):
        key = (state, used, mask)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        if len(self.memo) >= self.budget:
            raise BranchExplosionError(
                f"exact evaluation exceeded {self.budget} states; use Monte Carlo instead"
            )
        block, nxt = self.policy.next_block(state, used)
        block = tuple(block)
        for i in block:
            if not 0 <= i < self.inst.n or mask >> i & 1:
                raise ValueError(f"policy inserts item {i} twice or out of range")
        if len(set(block)) != len(block):
            raise ValueError("policy block repeats an item")
        if not block:
            if nxt is None:
                res = (self.mask_value(mask) if self.risky else 0.0, 0.0, 0)
            else:
                res = self.run(nxt, used, mask)
            self.memo[key] = res
            return res

        room = self.inst.scale - used
        total = self.block_sum(block)
        new_mask = mask
        for i in block:
            new_mask |= 1 << i
        gained = []
        if not self.risky:
            for j in range(len(block)):
                gained.append(self.vals[block[j]] * self.block_sum(block[: j + 1]).cdf(room))
        cont_vals, cont_ovf = [], []
        segs = 1
        k = int(np.searchsorted(total.support, room, side="right"))
        fit_mass = math.fsum(total.probs[:k])
        if nxt is None:
            # nothing left to decide: every fitting outcome ends here
            if self.risky:
                cont_vals.append(fit_mass * self.mask_value(new_mask))
        else:
            for x, p in zip(total.support[:k], total.probs[:k]):
                cv, co, cs = self.run(nxt, used + int(x), new_mask)
                cont_vals.append(p * cv)
                cont_ovf.append(p * co)
                segs = max(segs, 1 + cs)
        value = math.fsum(gained) + math.fsum(cont_vals)
        ovf = max(0.0, 1.0 - fit_mass) + math.fsum(cont_ovf)
        res = (value, min(1.0, ovf), segs)
        self.memo[key] = res
        return res


def _evaluate(instance: Instance, policy: Policy, node_budget: int = NODE_BUDGET) -> EvalResult:
    runner = _Runner(instance, policy, node_budget)
    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 50_000))
    try:
        value, ovf, segs = runner.run(policy.initial_state(), 0, 0)
    finally:
        sys.setrecursionlimit(old)
    return EvalResult(value, ovf, max(0, segs - 1), len(runner.memo))


def eval_tree(instance: Instance, tree: TreePolicy) -> EvalResult:
    if tree.scale != instance.scale:
        raise ValueError("tree was built for a different capacity scale")
    return _evaluate(instance, tree)


def eval_procedural(instance: Instance, policy: Policy, mode: str = "exact",
                    node_budget: int = NODE_BUDGET, mc_config=None):
    if mode == "exact":
        return _evaluate(instance, policy, node_budget)
    if mode == "mc":
        from .montecarlo import McConfig, simulate

        return simulate(instance, policy, mc_config or McConfig())
    raise ValueError(f"unknown evaluation mode {mode!r}")


# --- oracles ----------------------------------------------------------------


class _UsedGrid:
    """Reachable used-capacity values and the transitions between them."""

    def __init__(self, instance: Instance):
        sc = instance.scale
        reach = {0}
        for it in instance.items:
            fresh = {u + s for u in reach for s in it.dist.sizes if u + s <= sc}
            reach |= fresh
            if len(reach) > 200_000:
                raise SizeLimitError("too many reachable capacity states")
        self.used = sorted(reach)
        self.index = {u: k for k, u in enumerate(self.used)}
        self.m = len(self.used)
        self.scale = sc
        # nxt[i][a][k]: index of used[k] + size_a, or -1 on overflow / unreachable
        self.nxt = []
        self.prev = []
        for it in instance.items:
            rows_n, rows_p = [], []
            for s in it.dist.sizes:
                rows_n.append(np.array([self.index.get(u + s, -1) if u + s <= sc else -1 for u in self.used]))
                rows_p.append(np.array([self.index.get(u - s, -1) for u in self.used]))
            self.nxt.append(rows_n)
            self.prev.append(rows_p)

    def add_table(self) -> np.ndarray:
        tab = np.full((self.m, self.m), -1, dtype=np.int64)
        for a, u in enumerate(self.used):
            for b, x in enumerate(self.used):
                if u + x <= self.scale:
                    tab[a, b] = self.index.get(u + x, -1)
        return tab


def _gather(arr: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """arr[..., idx] with -1 entries mapped to 0."""
    ok = idx >= 0
    return np.where(ok, arr[..., np.where(ok, idx, 0)], 0.0)


def _mask_values(vals, n) -> np.ndarray:
    out = np.zeros(1 << n)
    masks = np.arange(1 << n)
    for i, v in enumerate(vals):
        out += ((masks >> i) & 1) * v
    return out


def _allowed_masks(instance: Instance) -> np.ndarray | None:
    if instance.allowed is None:
        return None
    n = instance.n
    ok = np.zeros(1 << n, dtype=bool)
    for path in instance.allowed:
        pm = 0
        for i in path:
            pm |= 1 << i
        sub = pm
        while True:
            ok[sub] = True
            if sub == 0:
                break
            sub = (sub - 1) & pm
    return ok


def _intervals(children: list[tuple[int, object]], scale: int):
    """Turn (room, node) pairs for reachable rooms into a partition of [0, scale]."""
    children = sorted(children, key=lambda c: c[0])
    out = []
    lo = 0
    for j, (room, node) in enumerate(children):
        hi = scale if j == len(children) - 1 else room
        out.append((lo, hi, node))
        lo = hi + 1
    return tuple(out)


def optimal_adaptive(instance: Instance, limit: int = ADAPT_LIMIT) -> tuple[float, TreePolicy]:
    n = instance.n
    if n > limit:
        raise SizeLimitError(f"optimal_adaptive supports n <= {limit}, got {n}")
    grid = _UsedGrid(instance)
    m = grid.m
    if (1 << n) * m > TABLE_BUDGET:
        raise SizeLimitError("state table too large for the exact adaptive oracle")
    vals = instance.values
    risky = instance.variant is Variant.RISKY
    full = (1 << n) - 1
    vmask = _mask_values(vals, n)
    total = float(vmask[full])
    allowed = _allowed_masks(instance)

    # V[R, k]: best expected (final value if risky, future value otherwise) with
    # remaining set R and used capacity grid.used[k]
    V = np.zeros((1 << n, m))
    choice = np.full((1 << n, m), -1, dtype=np.int16)
    masks = np.arange(1 << n)
    pop = np.array([bin(x).count("1") for x in range(1 << n)])
    V[0] = total if risky else 0.0
    for layer in range(1, n + 1):
        rs = masks[pop == layer]
        best = np.repeat((total - vmask[rs])[:, None] if risky else np.zeros((len(rs), 1)), m, axis=1)
        arg = np.full((len(rs), m), -1, dtype=np.int16)
        for i in range(n):
            has = (rs >> i) & 1 == 1
            if allowed is not None:
                # inserted set after adding i must be permitted
                has &= allowed[(full ^ rs) | (1 << i)]
            if not has.any():
                continue
            sub = V[rs[has] ^ (1 << i)]
            acc = np.zeros((int(has.sum()), m))
            for a, p in enumerate(instance.items[i].dist.probs):
                nx = grid.nxt[i][a]
                ok = nx >= 0
                acc += p * np.where(ok, sub[:, np.where(ok, nx, 0)] + (0.0 if risky else vals[i]), 0.0)
            cur = best[has]
            better = acc > cur
            cur[better] = acc[better]
            best[has] = cur
            a2 = arg[has]
            a2[better] = i
            arg[has] = a2
        V[rs] = best
        choice[rs] = arg

    start = grid.index[0]
    value = float(V[full, start])
    memo = {}

    def build(R, k):
        key = (R, k)
        if key in memo:
            return memo[key]
        i = int(choice[R, k])
        if i < 0:
            node = STOP
        else:
            kids = []
            for a, p in enumerate(instance.items[i].dist.probs):
                nx = int(grid.nxt[i][a][k])
                if nx >= 0 and p > 0:
                    kids.append((grid.scale - grid.used[nx], build(R ^ (1 << i), nx)))
            node = InsertNode((i,), _intervals(kids, grid.scale) if kids else ())
        memo[key] = node
        return node

    return value, TreePolicy(build(full, start), instance.scale)


def _block_dists(instance: Instance, grid: _UsedGrid) -> np.ndarray:
    """D[B, k] = Pr(S(B) = used[k]) restricted to fitting outcomes."""
    n = instance.n
    D = np.zeros((1 << n, grid.m))
    D[0, grid.index[0]] = 1.0
    for i in range(n - 1, -1, -1):
        hi = 1 << (n - i - 1)
        bs = (np.arange(hi) << (i + 1)) | (1 << i)
        base = D[bs ^ (1 << i)]
        acc = np.zeros_like(base)
        for a, p in enumerate(instance.items[i].dist.probs):
            acc += p * _gather(base, grid.prev[i][a])
        D[bs] = acc
    return D


def optimal_nonadaptive(instance: Instance, limit: int | None = None) -> tuple[float, NonAdaptivePlan]:
    n = instance.n
    lim = NONADAPT_LIMIT[instance.variant] if limit is None else limit
    if n > lim:
        raise SizeLimitError(f"optimal_nonadaptive supports n <= {lim} for {instance.variant.value}, got {n}")
    grid = _UsedGrid(instance)
    if (1 << n) * grid.m > TABLE_BUDGET:
        raise SizeLimitError("distribution table too large")
    D = _block_dists(instance, grid)
    fit = D.sum(axis=1)
    vals = instance.values
    allowed = _allowed_masks(instance)
    if instance.variant is Variant.RISKY:
        score = _mask_values(vals, n) * fit
        if allowed is not None:
            score = np.where(allowed, score, -np.inf)
        b = int(np.argmax(score))
        return float(score[b]), NonAdaptivePlan(tuple(i for i in range(n) if b >> i & 1))
    best = np.full(1 << n, -np.inf)
    last = np.full(1 << n, -1)
    best[0] = 0.0
    pop = np.array([bin(x).count("1") for x in range(1 << n)])
    masks = np.arange(1 << n)
    for layer in range(1, n + 1):
        bs = masks[pop == layer]
        cur = np.full(len(bs), -np.inf)
        arg = np.full(len(bs), -1)
        for i in range(n):
            has = (bs >> i) & 1 == 1
            prior = best[np.where(has, bs ^ (1 << i), 0)]
            cand = np.where(has, prior + vals[i] * fit[bs], -np.inf)
            better = cand > cur
            cur[better] = cand[better]
            arg[better] = i
        if allowed is not None:
            cur = np.where(allowed[bs], cur, -np.inf)
        best[bs] = cur
        last[bs] = arg
    b = int(np.argmax(best))
    order = []
    while b:
        i = int(last[b])
        order.append(i)
        b ^= 1 << i
    return float(np.max(best)), NonAdaptivePlan(tuple(reversed(order)))


def _submasks(R: int):
    sub = R
    while sub:
        yield sub
        sub = (sub - 1) & R


def optimal_k_semi_adaptive(instance: Instance, k: int, restrict_greedy: bool = False,
                            limit: int = SEMI_LIMIT) -> tuple[float, TreePolicy]:
    """Best policy that observes the used capacity at most ``k`` times."""
    n = instance.n
    if n > limit:
        raise SizeLimitError(f"optimal_k_semi_adaptive supports n <= {limit}, got {n}")
    if k < 0:
        raise ValueError("k must be nonnegative")
    grid = _UsedGrid(instance)
    m = grid.m
    if 3**n * m > TABLE_BUDGET:
        raise SizeLimitError("too many (set, block) pairs")
    risky = instance.variant is Variant.RISKY
    vals = instance.values
    full = (1 << n) - 1
    vmask = _mask_values(vals, n)
    total = float(vmask[full])
    D = _block_dists(instance, grid)
    fitmat = np.array([[1.0 if grid.used[x] + grid.used[u] <= grid.scale else 0.0 for u in range(m)]
                       for x in range(m)])
    F = D @ fitmat  # F[B, u] = Pr(S(B) fits on top of used[u])
    add = grid.add_table()
    allowed = _allowed_masks(instance)
    rank = {i: r for r, i in enumerate(greedy_order(instance))}

    def ordered(B):
        return sorted((i for i in range(n) if B >> i & 1), key=lambda i: rank[i])

    # in-block value and best ordering (nonrisky); risky blocks are order free
    if not risky:
        inb = np.zeros((1 << n, m))
        lastarg = np.full((1 << n, m), -1, dtype=np.int16)
        for B in range(1, 1 << n):
            if restrict_greedy:
                items = ordered(B)
                i = items[-1]
                inb[B] = inb[B ^ (1 << i)] + vals[i] * F[B]
                lastarg[B] = i
                continue
            cur = np.full(m, -np.inf)
            arg = np.full(m, -1)
            for i in range(n):
                if B >> i & 1:
                    cand = inb[B ^ (1 << i)] + vals[i] * F[B]
                    better = cand > cur
                    cur[better] = cand[better]
                    arg[better] = i
            inb[B] = cur
            lastarg[B] = arg

    def blocks_of(R):
        if restrict_greedy:
            items = ordered(R)
            acc = 0
            out = []
            for i in items:
                acc |= 1 << i
                out.append(acc)
            return out
        return list(_submasks(R))

    def permitted(R, B):
        return allowed is None or bool(allowed[(full ^ R) | B])

    # level 0: commit without further observation
    W = np.zeros((1 << n, m))
    commit = np.zeros((1 << n, m), dtype=np.int64)
    for R in range(1 << n):
        base = total - vmask[R] if risky else 0.0
        cur = np.full(m, base * 1.0) if risky else np.zeros(m)
        arg = np.zeros(m, dtype=np.int64)
        for B in blocks_of(R):
            if not permitted(R, B):
                continue
            cand = (base + vmask[B]) * F[B] if risky else inb[B]
            better = cand > cur
            cur[better] = cand[better]
            arg[better] = B
        W[R] = cur
        commit[R] = arg
    levels = [(W, None)]
    okadd = add >= 0
    safe_add = np.where(okadd, add, 0)
    for q in range(1, k + 1):
        prevW = levels[-1][0]
        newW = levels[0][0].copy()
        act = np.zeros((1 << n, m), dtype=np.int64)  # 0 = commit, else block observed
        gathered = np.where(okadd[None, :, :], prevW[:, safe_add], 0.0)  # [R', u, x]
        for R in range(1, 1 << n):
            cur = newW[R]
            arg = act[R]
            for B in blocks_of(R):
                if not permitted(R, B):
                    continue
                cand = gathered[R ^ B] @ D[B]
                if not risky:
                    cand = cand + inb[B]
                better = cand > cur + 1e-15
                cur[better] = cand[better]
                arg[better] = B
        levels.append((newW, act))
        if q >= n:
            break

    start = grid.index[0]
    top = len(levels) - 1
    value = float(levels[top][0][full, start])

    def block_order(B, k_idx):
        if risky or restrict_greedy:
            return tuple(ordered(B))
        seq = []
        while B:
            i = int(lastarg[B, k_idx])
            seq.append(i)
            B ^= 1 << i
        return tuple(reversed(seq))

    memo = {}

    def build(R, k_idx, q):
        key = (R, k_idx, q)
        if key in memo:
            return memo[key]
        B = int(levels[q][1][R, k_idx]) if q > 0 else 0
        if B == 0:
            C = int(commit[R, k_idx])
            node = STOP if C == 0 else InsertNode(block_order(C, k_idx), ())
        else:
            kids = []
            for x in np.nonzero(D[B] > 0)[0]:
                nx = int(add[k_idx, x])
                if nx >= 0:
                    kids.append((grid.scale - grid.used[nx], build(R ^ B, nx, q - 1)))
            node = InsertNode(block_order(B, k_idx), _intervals(kids, grid.scale) if kids else ())
        memo[key] = node
        return node

    tree = TreePolicy(build(full, start, top), instance.scale)
    return value, tree


def enumerate_adaptive(instance: Instance) -> float:
    """Brute force over every adaptive decision tree (tiny instances only).

    Recurses over the full history of (inserted sequence, used capacity) with
    no state compression, maximising at each node over stop or any unused item.
    """
    if instance.n > 5:
        raise SizeLimitError("exhaustive enumeration is limited to n <= 5")
    risky = instance.variant is Variant.RISKY
    sc = instance.scale
    vals = instance.values

    def go(seq: tuple, used: int, acc: float) -> float:
        best = acc if risky else 0.0
        for i in range(instance.n):
            if i in seq:
                continue
            tot = 0.0
            for s, p in instance.items[i].dist.atoms:
                if used + s <= sc:
                    tot += p * (go(seq + (i,), used + s, acc + vals[i]) + (0.0 if risky else vals[i]))
            best = max(best, tot)
        return best

    return go((), 0, 0.0)


def enumerate_nonadaptive(instance: Instance) -> float:
    """Brute force over every ordered plan."""
    if instance.n > 7:
        raise SizeLimitError("exhaustive enumeration is limited to n <= 7")
    best = 0.0
    ids = range(instance.n)
    for r in range(1, instance.n + 1):
        for combo in permutations(ids, r):
            best = max(best, eval_nonadaptive(instance, combo).expected_value)
    return best
