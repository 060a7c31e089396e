"""Fractional relaxation: maximise sum x_i w_i subject to sum x_i mu_i <= t."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import DerivedItemStats, Instance, derive_stats, greedy_order

CERT_TOL = 1e-12


@dataclass(frozen=True)
class PhiSolution:
    t: float
    value: float
    x: tuple[float, ...]
    split_item: int | None


def phi_from_stats(stats: list[DerivedItemStats], order: list[int], t: float) -> PhiSolution:
    if t < 0:
        raise ValueError("t must be nonnegative")
    x = [0.0] * len(stats)
    room = t
    split = None
    terms = []
    for i in order:
        w, mu = stats[i].effective_value, stats[i].mean_truncated_size
        if w <= 0:
            break
        if mu <= 0:
            x[i] = 1.0
            terms.append(w)
            continue
        if mu <= room:
            x[i] = 1.0
            room -= mu
            terms.append(w)
        else:
            if room > 0:
                x[i] = room / mu
                split = i
                terms.append(w * x[i])
            break
    return PhiSolution(t, math.fsum(terms), tuple(x), split)


def phi(instance: Instance, t: float) -> PhiSolution:
    stats = derive_stats(instance)
    return phi_from_stats(stats, greedy_order(instance, stats), t)


def adapt_upper_bound(instance: Instance) -> float:
    """2 * phi(1): an upper bound on the best adaptive value in both variants."""
    return 2.0 * phi(instance, 1.0).value


def greedy_block_certificate(instance: Instance, j: int, t: float) -> tuple[float, float, bool]:
    """Compare w(J) with min(1, mu(J)/t) * phi(t) for the first j greedy items."""
    if not 1 <= j <= instance.n or t <= 0:
        raise ValueError("need 1 <= j <= n and t > 0")
    stats = derive_stats(instance)
    order = greedy_order(instance, stats)
    head = order[:j]
    w = math.fsum(stats[i].effective_value for i in head)
    mu = math.fsum(stats[i].mean_truncated_size for i in head)
    rhs = min(1.0, mu / t) * phi_from_stats(stats, order, t).value
    return w, rhs, w >= rhs - CERT_TOL
