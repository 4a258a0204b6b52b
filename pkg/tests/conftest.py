import numpy as np
import pytest

from sublist import CoverageReward, Item
from sublist.features import build_feature_context
from sublist.listpred import ProblemInstance


@pytest.fixture
def unit_coverage():
    """Three items over a unit-weight four-concept universe: the first two
    tie on normalized benefit at the start and the big item never fits a
    budget of four."""
    reward = CoverageReward(
        {1: 1.0, 2: 1.0, 3: 1.0, 4: 1.0},
        {1: {1, 2}, 2: {3}, 3: {1, 2, 3, 4}},
    )
    items = [
        Item(id=1, length=2),
        Item(id=2, length=1),
        Item(id=3, length=5),
    ]
    return reward, items


def make_instance(items, reward, budget, state_id="test"):
    context = build_feature_context(items, budget)
    return ProblemInstance(
        state_id=state_id, items=list(items), reward=reward, features=context
    )


@pytest.fixture
def coverage_instance():
    """Small featurized coverage instance with varied lengths."""
    rng = np.random.default_rng(7)
    concepts = [f"c{j}" for j in range(10)]
    weights = {c: float(w) for c, w in zip(concepts, rng.uniform(0.5, 1.5, 10))}
    covers = {}
    items = []
    for item_id in range(8):
        chosen = rng.choice(10, size=int(rng.integers(1, 4)), replace=False)
        covers[item_id] = [concepts[j] for j in chosen]
        items.append(
            Item(
                id=item_id,
                length=int(rng.integers(1, 5)),
                payload=tuple(sorted(covers[item_id])),
            )
        )
    reward = CoverageReward(weights, covers)
    return make_instance(items, reward, budget=8)
