"""Instances, items, size distributions and policy representations.

Sizes live on an integer grid where ``scale`` grid units equal the knapsack
capacity. Probabilities are floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Hashable, Iterable, Sequence

PROB_RENORM_TOL = 1e-9
MASS_TOL = 1e-12


class Variant(str, Enum):
    RISKY = "risky"
    NONRISKY = "nonrisky"


class SizeLimitError(ValueError):
    """Raised when an exact routine is asked to work beyond its configured size."""


@dataclass(frozen=True)
class DiscreteDist:
    sizes: tuple[int, ...]
    probs: tuple[float, ...]

    @classmethod
    def build(cls, atoms: Iterable[Sequence], scale: int) -> "DiscreteDist":
        """Validate and canonicalise an atom list.

        Atoms with equal size are merged, zero-probability atoms dropped and
        every size above ``scale`` is collapsed onto a single atom at
        ``2 * scale``.
        """
        merged: dict[int, float] = {}
        overflow = 2 * scale
        for size, prob in atoms:
            if isinstance(size, float):
                if not size.is_integer():
                    raise ValueError(f"atom size {size} is not on the integer grid")
                size = int(size)
            size = int(size)
            prob = float(prob)
            if size < 0:
                raise ValueError("atom sizes must be nonnegative")
            if prob < 0 or math.isnan(prob):
                raise ValueError(f"bad probability {prob}")
            if prob == 0.0:
                continue
            key = overflow if size > scale else size
            merged[key] = merged.get(key, 0.0) + prob
        total = math.fsum(merged.values())
        if not merged or abs(total - 1.0) > PROB_RENORM_TOL:
            raise ValueError(f"probabilities sum to {total}, expected 1")
        keys = sorted(merged)
        return cls(tuple(keys), tuple(merged[k] / total for k in keys))

    @classmethod
    def point(cls, size: int, scale: int) -> "DiscreteDist":
        return cls.build([(size, 1.0)], scale)

    def fit_prob(self, room: int) -> float:
        return math.fsum(p for s, p in zip(self.sizes, self.probs) if s <= room)

    def truncated_mean(self, cap: int) -> float:
        """E[min(S, cap)] in grid units."""
        return math.fsum(p * min(s, cap) for s, p in zip(self.sizes, self.probs))

    @property
    def atoms(self) -> list[tuple[int, float]]:
        return list(zip(self.sizes, self.probs))


@dataclass(frozen=True)
class Item:
    value: float
    dist: DiscreteDist

    def __post_init__(self):
        if not (self.value >= 0):
            raise ValueError("item values must be nonnegative")


@dataclass(frozen=True)
class Instance:
    items: tuple[Item, ...]
    scale: int
    variant: Variant = Variant.RISKY
    # permitted inserted sets (tree constraints); None means unconstrained
    allowed: tuple[frozenset, ...] | None = None

    def __post_init__(self):
        if self.scale < 1:
            raise ValueError("scale must be a positive integer")
        object.__setattr__(self, "variant", Variant(self.variant))
        object.__setattr__(self, "items", tuple(self.items))

    @property
    def n(self) -> int:
        return len(self.items)

    @property
    def values(self) -> list[float]:
        return [it.value for it in self.items]

    def subset(self, ids: Sequence[int]) -> "Instance":
        return Instance(tuple(self.items[i] for i in ids), self.scale, self.variant)

    def with_scale(self, scale: int) -> "Instance":
        items = tuple(Item(it.value, DiscreteDist.build(it.dist.atoms, scale)) for it in self.items)
        return Instance(items, scale, self.variant)

    def to_json(self) -> dict:
        out = {
            "variant": self.variant.value,
            "scale": self.scale,
            "items": [{"value": it.value, "atoms": [[s, p] for s, p in it.dist.atoms]} for it in self.items],
        }
        if self.allowed is not None:
            out["allowed"] = [sorted(a) for a in self.allowed]
        return out

    @classmethod
    def from_json(cls, data: dict) -> "Instance":
        scale = int(data["scale"])
        items = tuple(
            Item(float(it["value"]), DiscreteDist.build(it["atoms"], scale)) for it in data["items"]
        )
        allowed = data.get("allowed")
        if allowed is not None:
            allowed = tuple(frozenset(a) for a in allowed)
        return cls(items, scale, Variant(data.get("variant", "risky")), allowed)


def make_instance(values, atom_lists, scale, variant=Variant.RISKY) -> Instance:
    items = tuple(Item(float(v), DiscreteDist.build(a, scale)) for v, a in zip(values, atom_lists))
    return Instance(items, scale, Variant(variant))


@dataclass(frozen=True)
class DerivedItemStats:
    effective_value: float
    mean_truncated_size: float
    density: float


def derive_stats(instance: Instance) -> list[DerivedItemStats]:
    out = []
    sc = instance.scale
    for it in instance.items:
        w = it.value * it.dist.fit_prob(sc)
        mu = it.dist.truncated_mean(sc) / sc
        if mu > 0:
            dens = w / mu
        else:
            dens = math.inf if w > 0 else 0.0
        out.append(DerivedItemStats(w, mu, dens))
    return out


def classify_small_large(instance: Instance, eps: float) -> tuple[list[int], list[int]]:
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    small, large = [], []
    for i, st in enumerate(derive_stats(instance)):
        (small if st.mean_truncated_size <= eps else large).append(i)
    return small, large


def greedy_order(instance: Instance, stats: list[DerivedItemStats] | None = None) -> list[int]:
    stats = stats or derive_stats(instance)

    def key(i):
        st = stats[i]
        if st.effective_value <= 0:
            return (1, 0.0, i)
        return (0, -st.density, i)

    return sorted(range(len(stats)), key=key)


@dataclass(frozen=True)
class Block:
    item_ids: tuple[int, ...]

    def __post_init__(self):
        if len(set(self.item_ids)) != len(self.item_ids):
            raise ValueError("block has repeated items")

    def mass(self, stats) -> float:
        return math.fsum(stats[i].mean_truncated_size for i in self.item_ids)

    def value(self, instance: Instance) -> float:
        return math.fsum(instance.items[i].value for i in self.item_ids)

    def effective_value(self, stats) -> float:
        return math.fsum(stats[i].effective_value for i in self.item_ids)


# --- policies -------------------------------------------------------------
#
# Every policy is driven through one protocol. ``initial_state()`` returns an
# opaque hashable control state; ``next_block(state, used)`` receives the used
# capacity observed at that point and returns the block to insert now plus the
# control state to resume from after the block (None means stop after it).
# Items inside a block go in without observation.


class Policy:
    name = "policy"

    def initial_state(self) -> Hashable:
        return 0

    def next_block(self, state, used: int) -> tuple[tuple[int, ...], Hashable | None]:
        raise NotImplementedError


@dataclass(frozen=True)
class NonAdaptivePlan(Policy):
    items: tuple[int, ...]
    name = "plan"

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(int(i) for i in self.items))
        if len(set(self.items)) != len(self.items):
            raise ValueError("plan repeats an item")

    def next_block(self, state, used):
        return self.items, None


@dataclass(frozen=True, eq=False)
class Stop:
    pass


@dataclass(frozen=True, eq=False)
class InsertNode:
    """Insert ``block`` then branch on remaining capacity.

    ``children`` holds ``(lo, hi, node)`` triples over remaining capacity in
    grid units, inclusive on both ends. An empty tuple means stop afterwards.
    """

    block: tuple[int, ...]
    children: tuple[tuple[int, int, "DecisionNode"], ...] = ()

    def child_for(self, room: int) -> "DecisionNode":
        for lo, hi, node in self.children:
            if lo <= room <= hi:
                return node
        return STOP

    def observes(self, scale: int) -> bool:
        if not self.children:
            return False
        if len(self.children) == 1:
            lo, hi, _ = self.children[0]
            return not (lo <= 0 and hi >= scale)
        return True


DecisionNode = Stop | InsertNode
STOP = Stop()


def check_intervals(node: InsertNode, scale: int) -> None:
    if not node.children:
        return
    spans = sorted((lo, hi) for lo, hi, _ in node.children)
    expect = 0
    for lo, hi in spans:
        if lo != expect or hi < lo:
            raise ValueError(f"child intervals {spans} do not partition [0, {scale}]")
        expect = hi + 1
    if expect != scale + 1:
        raise ValueError(f"child intervals {spans} do not partition [0, {scale}]")


@dataclass(frozen=True, eq=False)
class TreePolicy(Policy):
    root: DecisionNode
    scale: int
    budget: int | None = None
    name = "tree"

    def __post_init__(self):
        seen = set()
        stack = [self.root]
        while stack:
            node = stack.pop()
            if id(node) in seen or isinstance(node, Stop):
                continue
            seen.add(id(node))
            check_intervals(node, self.scale)
            stack.extend(c for _, _, c in node.children)
        if self.budget is not None and self.max_queries() > self.budget:
            raise ValueError("tree observes more often than its query budget")

    def _chain(self, node: DecisionNode):
        # fold single full-range children into one block: no observation happens there
        block: list[int] = []
        while isinstance(node, InsertNode):
            block.extend(node.block)
            if node.observes(self.scale) or not node.children:
                break
            node = node.children[0][2]
        return tuple(block), node

    def initial_state(self):
        return ("start", self.root)

    def next_block(self, state, used):
        tag, node = state
        if tag == "after":
            node = node.child_for(self.scale - used)
        if isinstance(node, Stop):
            return (), None
        block, last = self._chain(node)
        if isinstance(last, InsertNode) and last.observes(self.scale):
            return block, ("after", last)
        return block, None

    def max_queries(self) -> int:
        def walk(node, depth):
            if isinstance(node, Stop):
                return depth
            best = depth
            obs = node.observes(self.scale)
            for _, _, child in node.children:
                best = max(best, walk(child, depth + (1 if obs and isinstance(child, InsertNode) else 0)))
            return best

        return walk(self.root, 0)

    def to_json(self) -> dict:
        def enc(node):
            if isinstance(node, Stop):
                return {"stop": True}
            return {
                "insert": list(node.block),
                "children": [{"lo": lo, "hi": hi, "node": enc(c)} for lo, hi, c in node.children],
            }

        return {"scale": self.scale, "budget": self.budget, "root": enc(self.root)}

    @classmethod
    def from_json(cls, data: dict, scale: int | None = None) -> "TreePolicy":
        def dec(d):
            if d.get("stop"):
                return STOP
            kids = tuple((int(c["lo"]), int(c["hi"]), dec(c["node"])) for c in d.get("children", []))
            return InsertNode(tuple(int(i) for i in d["insert"]), kids)

        sc = scale if scale is not None else int(data["scale"])
        return cls(dec(data["root"]), sc, data.get("budget"))
