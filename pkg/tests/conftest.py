import hypothesis.strategies as st
from hypothesis import settings

from sk_adapt.model import DiscreteDist, Instance, Item, Variant

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@st.composite
def distributions(draw, scale: int):
    count = draw(st.integers(1, 3))
    sizes = draw(st.lists(st.integers(0, 2 * scale), min_size=count, max_size=count, unique=True))
    weights = draw(st.lists(st.integers(1, 9), min_size=count, max_size=count))
    total = sum(weights)
    return DiscreteDist.build([(s, w / total) for s, w in zip(sizes, weights)], scale)


@st.composite
def instances(draw, max_n: int = 4, variant=None):
    scale = draw(st.integers(2, 8))
    n = draw(st.integers(1, max_n))
    var = variant or draw(st.sampled_from([Variant.RISKY, Variant.NONRISKY]))
    items = tuple(
        Item(draw(st.integers(0, 10)) / 4, draw(distributions(scale))) for _ in range(n)
    )
    return Instance(items, scale, var)
