"""Seeded Monte Carlo evaluation of policies.

Samples are grouped into fixed blocks of ``BLOCK`` draws. The uniform used
for item ``i`` in block ``b`` comes from a generator keyed by
``(seed, b, i)``, so a run is reproducible bit for bit no matter how many
worker processes share the blocks or in which order a policy visits items.
Block statistics are merged in block order.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .model import Instance, NonAdaptivePlan, Policy, Variant, greedy_order

BLOCK = 4096
SEED_MOD = 2**64


@dataclass(frozen=True)
class McConfig:
    samples: int = 100_000
    seed: int = 0
    ci_level: float = 0.99

    def __post_init__(self):
        if int(self.samples) < 1:
            raise ValueError("samples must be at least 1")
        if not 0 < self.ci_level < 1:
            raise ValueError("ci_level must lie in (0, 1)")


@dataclass(frozen=True)
class McResult:
    mean: float
    std_error: float
    ci_halfwidth: float
    overflow_freq: float
    samples: int


@dataclass(frozen=True)
class _Sequential:
    """Items one at a time in ``order``; ``rule`` decides who continues."""

    order: tuple[int, ...]
    rule: object = None

    def keep_going(self, count, used):
        if self.rule is None:
            return np.ones(used.shape, dtype=bool)
        return self.rule.keep_going(count, used)


@dataclass(frozen=True)
class _BlockStats:
    count: int
    mean: float
    m2: float
    overflows: int


class _Sampler:
    def __init__(self, instance: Instance, seed: int, block: int, length: int):
        self.inst = instance
        self.seed = int(seed) % SEED_MOD
        self.block = block
        self.length = length
        self.cols: dict[int, np.ndarray] = {}
        big = 3 * instance.scale >= 2**62
        self.dtype = object if big else np.int64

    def sizes(self, item: int) -> np.ndarray:
        col = self.cols.get(item)
        if col is None:
            u = np.random.default_rng([self.seed, self.block, item]).random(self.length)
            dist = self.inst.items[item].dist
            cum = np.cumsum(dist.probs)
            idx = np.minimum(np.searchsorted(cum, u, side="right"), len(cum) - 1)
            col = np.array(dist.sizes, dtype=self.dtype)[idx]
            self.cols[item] = col
        return col


def _run_sequential(instance: Instance, seq: _Sequential, sampler: _Sampler):
    length = sampler.length
    scale = instance.scale
    active = np.ones(length, dtype=bool)
    over = np.zeros(length, dtype=bool)
    used = np.zeros(length, dtype=sampler.dtype)
    gained = np.zeros(length)
    for count, i in enumerate(seq.order):
        active &= seq.keep_going(count, used)
        if not active.any():
            break
        new = used + sampler.sizes(i)
        bust = active & (new > scale)
        fits = active & ~bust
        gained[fits] += instance.items[i].value
        used = np.where(fits, new, used)
        over |= bust
        active &= ~bust
    if instance.variant is Variant.RISKY:
        gained[over] = 0.0
    return gained, over


def _run_generic(instance: Instance, policy: Policy, sampler: _Sampler):
    scale = instance.scale
    risky = instance.variant is Variant.RISKY
    values = np.zeros(sampler.length)
    over = np.zeros(sampler.length, dtype=bool)
    for s in range(sampler.length):
        state, used, got, seen = policy.initial_state(), 0, 0.0, set()
        busted = False
        while state is not None and not busted:
            block, state = policy.next_block(state, used)
            for i in block:
                if i in seen:
                    raise ValueError(f"policy inserts item {i} twice")
                seen.add(i)
                used += int(sampler.sizes(i)[s])
                if used > scale:
                    busted = True
                    break
                got += instance.items[i].value
        over[s] = busted
        values[s] = 0.0 if busted and risky else got
    return values, over


def _as_sequential(policy) -> _Sequential | None:
    if isinstance(policy, _Sequential):
        return policy
    if isinstance(policy, NonAdaptivePlan):
        return _Sequential(policy.items)
    if hasattr(policy, "keep_going") and hasattr(policy, "order"):
        return _Sequential(tuple(policy.order), policy)
    return None


def _block_job(args) -> list[_BlockStats]:
    instance, policy, seed, jobs = args
    seq = _as_sequential(policy)
    out = []
    for block, length in jobs:
        sampler = _Sampler(instance, seed, block, length)
        if seq is not None:
            vals, over = _run_sequential(instance, seq, sampler)
        else:
            vals, over = _run_generic(instance, policy, sampler)
        if vals.min() == vals.max():
            mean, m2 = float(vals[0]), 0.0
        else:
            mean = float(vals.mean())
            m2 = float(((vals - mean) ** 2).sum())
        out.append(_BlockStats(length, mean, m2, int(over.sum())))
    return out


def _merge(parts: list[_BlockStats]) -> tuple[int, float, float, int]:
    n, mean, m2, ovf = 0, 0.0, 0.0, 0
    for b in parts:
        tot = n + b.count
        delta = b.mean - mean
        mean += delta * b.count / tot
        m2 += b.m2 + delta * delta * n * b.count / tot
        n, ovf = tot, ovf + b.overflows
    return n, mean, m2, ovf


def _simulate(instance: Instance, policy, cfg: McConfig, workers: int = 1) -> McResult:
    samples = int(cfg.samples)
    jobs = [(b, min(BLOCK, samples - b * BLOCK)) for b in range(math.ceil(samples / BLOCK))]
    workers = max(1, min(int(workers), len(jobs)))
    if workers == 1:
        parts = _block_job((instance, policy, cfg.seed, jobs))
    else:
        shards = [jobs[w::workers] for w in range(workers)]
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_block_job, [(instance, policy, cfg.seed, s) for s in shards]))
        by_block = {}
        for shard, res in zip(shards, results):
            for (b, _), st in zip(shard, res):
                by_block[b] = st
        parts = [by_block[b] for b, _ in jobs]
    n, mean, m2, ovf = _merge(parts)
    se = math.sqrt(m2 / (n - 1) / n) if n > 1 else 0.0
    z = float(norm.ppf(0.5 + cfg.ci_level / 2))
    return McResult(mean, se, z * se, ovf / n, n)


def simulate(instance: Instance, policy: Policy, cfg: McConfig, workers: int = 1) -> McResult:
    """Estimate the expected value of ``policy`` on ``instance``."""
    return _simulate(instance, policy, cfg, workers)


def simulate_always_insert(instance: Instance, cfg: McConfig, workers: int = 1) -> McResult:
    """Insert items in greedy order until one overflows (NonRisky only).

    Under the Risky rule this policy can lose everything, so it is refused.
    """
    if instance.variant is not Variant.NONRISKY:
        raise ValueError("always-insert is only meaningful for the NonRisky variant")
    return _simulate(instance, _Sequential(tuple(greedy_order(instance))), cfg, workers)
