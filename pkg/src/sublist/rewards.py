"""Monotone submodular reward functions over item sets, the benefit
arithmetic used throughout training, and the greedy / exhaustive selectors
that serve as optimization baselines and test oracles."""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import _kernels

BRUTE_FORCE_MAX_ITEMS = 20
SUBSET_CHUNK = 8192


class UnknownItemError(KeyError):
    """An item id the reward was not built with: the instance is corrupt."""


class InstanceTooLargeError(ValueError):
    """Exhaustive enumeration was requested beyond its size guard."""


@dataclass(eq=False)
class Item:
    """One selectable unit (a sentence): byte length plus token payload."""

    id: int
    length: int
    payload: tuple[str, ...] = ()
    feature_vec: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.length < 1:
            raise ValueError(f"item {self.id}: length must be >= 1, got {self.length}")
        self.payload = tuple(self.payload)


class ItemList:
    """Ordered, duplicate-free sequence of items with its summed length."""

    __slots__ = ("items", "total_length", "_id_set")

    def __init__(self, items: Iterable[Item] = ()):
        items = tuple(items)
        ids = [item.id for item in items]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate item ids in list: {ids}")
        self.items = items
        self.total_length = sum(item.length for item in items)
        self._id_set = frozenset(ids)

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(item.id for item in self.items)

    def contains_id(self, item_id: int) -> bool:
        return item_id in self._id_set

    def append(self, item: Item) -> "ItemList":
        if item.id in self._id_set:
            raise ValueError(f"item {item.id} already in list")
        return ItemList(self.items + (item,))

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __repr__(self) -> str:
        return f"ItemList(ids={self.ids}, total_length={self.total_length})"


class RewardFunction(ABC):
    """Set-valued reward in [0, 1]; implementations must be monotone
    submodular (checked numerically by :func:`check_monotone_submodular`)."""

    @abstractmethod
    def evaluate(self, ids: Iterable[int]) -> float:
        """Reward of the given item set. Order-free; duplicates ignored."""

    @property
    @abstractmethod
    def item_ids(self) -> tuple[int, ...]:
        """All item ids this reward knows about."""

    def evaluate_subsets(self, ids: Sequence[int], member: np.ndarray) -> np.ndarray:
        """Rewards of many subsets at once.

        ``member`` is a (K, len(ids)) boolean matrix; ``ids`` must not repeat.
        The generic fallback loops; concrete rewards vectorize.
        """
        ids = list(ids)
        return np.array(
            [self.evaluate([i for i, keep in zip(ids, row) if keep]) for row in member],
            dtype=np.float64,
        )

    def union_values(
        self, base_ids: Sequence[int], candidate_ids: Sequence[int]
    ) -> np.ndarray:
        """f(base + {candidate}) per candidate; members of base are no-ops."""
        base = list(base_ids)
        return np.array(
            [self.evaluate(base + [cand]) for cand in candidate_ids], dtype=np.float64
        )


class CoverageReward(RewardFunction):
    """Weighted set cover: the value of a set is the summed weight of
    concepts covered by at least one member, scaled by the total weight so
    the empty set maps to 0 and full coverage maps to 1."""

    def __init__(
        self,
        universe_weights: Mapping,
        item_covers: Mapping[int, Iterable],
    ):
        concepts = sorted(universe_weights)
        if not concepts:
            raise ValueError("universe must contain at least one concept")
        weights = np.array([float(universe_weights[c]) for c in concepts])
        if (weights < 0).any() or not np.isfinite(weights).all():
            raise ValueError("concept weights must be finite and nonnegative")
        self.normalizer = float(weights.sum())
        if self.normalizer <= 0:
            raise ValueError("total concept weight must be positive")
        col = {c: j for j, c in enumerate(concepts)}
        ids = sorted(item_covers)
        cover = np.zeros((len(ids), len(concepts)), dtype=np.uint8)
        for row, item_id in enumerate(ids):
            for concept in item_covers[item_id]:
                if concept not in col:
                    raise ValueError(
                        f"item {item_id} covers unknown concept {concept!r}"
                    )
                cover[row, col[concept]] = 1
        self.universe_weights = dict(universe_weights)
        self._ids = tuple(ids)
        self._row = {item_id: row for row, item_id in enumerate(ids)}
        self._cover = cover
        self._scaled_weights = weights / self.normalizer

    @property
    def item_ids(self) -> tuple[int, ...]:
        return self._ids

    def _rows(self, ids: Iterable[int]) -> np.ndarray:
        try:
            rows = sorted(self._row[i] for i in set(ids))
        except KeyError as exc:
            raise UnknownItemError(f"unknown item id {exc.args[0]!r}") from exc
        return np.array(rows, dtype=np.intp)

    def covered_mask(self, ids: Iterable[int]) -> np.ndarray:
        rows = self._rows(ids)
        if rows.size == 0:
            return np.zeros(self._cover.shape[1], dtype=np.uint8)
        return self._cover[rows].max(axis=0)

    def evaluate(self, ids: Iterable[int]) -> float:
        mask = self.covered_mask(ids)
        return float(mask.astype(np.float64) @ self._scaled_weights)

    def evaluate_subsets(self, ids: Sequence[int], member: np.ndarray) -> np.ndarray:
        rows = self._rows_in_order(ids)
        member = np.ascontiguousarray(member, dtype=np.bool_)
        return _kernels.coverage_subset_values(
            self._cover[rows], self._scaled_weights, member
        )

    def union_values(
        self, base_ids: Sequence[int], candidate_ids: Sequence[int]
    ) -> np.ndarray:
        covered = self.covered_mask(base_ids)
        rows = self._rows_in_order(candidate_ids)
        return _kernels.coverage_union_gains(
            self._cover[rows], covered, self._scaled_weights
        )

    def _rows_in_order(self, ids: Sequence[int]) -> np.ndarray:
        seen = set()
        rows = []
        for i in ids:
            if i in seen:
                raise ValueError(f"repeated item id {i} in subset query")
            seen.add(i)
            if i not in self._row:
                raise UnknownItemError(f"unknown item id {i!r}")
            rows.append(self._row[i])
        return np.array(rows, dtype=np.intp)


class RougeRecallReward(RewardFunction):
    """Multi-reference unigram recall.  Per-unigram credit is capped by the
    reference counts, which makes the set function monotone submodular."""

    def __init__(
        self,
        references: Sequence[Sequence[str]],
        items: Sequence[Item],
    ):
        if not references:
            raise ValueError("at least one reference is required")
        vocab = sorted({tok for ref in references for tok in ref})
        if not vocab:
            raise ValueError("references contain no tokens")
        col = {tok: j for j, tok in enumerate(vocab)}
        ref_counts = np.zeros((len(references), len(vocab)), dtype=np.float64)
        for r, ref in enumerate(references):
            for tok in ref:
                ref_counts[r, col[tok]] += 1
        ids = sorted(item.id for item in items)
        if len(ids) != len(set(ids)):
            raise ValueError("duplicate item ids")
        by_id = {item.id: item for item in items}
        counts = np.zeros((len(ids), len(vocab)), dtype=np.float64)
        for row, item_id in enumerate(ids):
            for tok in by_id[item_id].payload:
                j = col.get(tok)
                if j is not None:
                    counts[row, j] += 1
        self.reference_counts = ref_counts
        self.total_reference_tokens = int(ref_counts.sum())
        self._ids = tuple(ids)
        self._row = {item_id: row for row, item_id in enumerate(ids)}
        self._item_counts = counts

    @property
    def item_ids(self) -> tuple[int, ...]:
        return self._ids

    def _counts_for(self, ids: Iterable[int]) -> np.ndarray:
        try:
            rows = sorted(self._row[i] for i in set(ids))
        except KeyError as exc:
            raise UnknownItemError(f"unknown item id {exc.args[0]!r}") from exc
        if not rows:
            return np.zeros(self._item_counts.shape[1])
        return self._item_counts[rows].sum(axis=0)

    def _recall(self, candidate_counts: np.ndarray) -> np.ndarray:
        capped = np.minimum(candidate_counts[..., None, :], self.reference_counts)
        return capped.sum(axis=(-2, -1)) / self.total_reference_tokens

    def evaluate(self, ids: Iterable[int]) -> float:
        return float(self._recall(self._counts_for(ids)))

    def evaluate_subsets(self, ids: Sequence[int], member: np.ndarray) -> np.ndarray:
        if len(set(ids)) != len(ids):
            raise ValueError("repeated item id in subset query")
        try:
            rows = np.array([self._row[i] for i in ids], dtype=np.intp)
        except KeyError as exc:
            raise UnknownItemError(f"unknown item id {exc.args[0]!r}") from exc
        counts = member.astype(np.float64) @ self._item_counts[rows]
        return self._recall(counts)

    def union_values(
        self, base_ids: Sequence[int], candidate_ids: Sequence[int]
    ) -> np.ndarray:
        base = set(base_ids)
        base_counts = self._counts_for(base_ids)
        base_value = float(self._recall(base_counts))
        values = np.empty(len(candidate_ids))
        for k, cand in enumerate(candidate_ids):
            if cand in base:
                values[k] = base_value
                continue
            if cand not in self._row:
                raise UnknownItemError(f"unknown item id {cand!r}")
            values[k] = self._recall(base_counts + self._item_counts[self._row[cand]])
        return values


def evaluate(reward: RewardFunction, lst: ItemList) -> float:
    return reward.evaluate(lst.ids)


def marginal_benefit(reward: RewardFunction, lst: ItemList, item: Item) -> float:
    """f(list + item) - f(list); the item must not already be selected."""
    if lst.contains_id(item.id):
        raise ValueError(f"item {item.id} already in list")
    return reward.evaluate(lst.ids + (item.id,)) - reward.evaluate(lst.ids)


def normalized_benefit(reward: RewardFunction, lst: ItemList, item: Item) -> float:
    """Marginal benefit per unit of length."""
    return marginal_benefit(reward, lst, item) / item.length


def greedy_clairvoyant(
    reward: RewardFunction,
    items: Iterable[Item],
    budget: int,
    *,
    half_budget_filter: bool = False,
) -> ItemList:
    """Forward greedy selection by normalized benefit under the budget.

    At each step the feasible items are those that still fit; ties break to
    the lowest id, and selection stops early once the best feasible
    normalized benefit is zero (monotone rewards make that value-neutral).
    """
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    pool = sorted(items, key=lambda it: it.id)
    if half_budget_filter:
        pool = [it for it in pool if it.length <= budget / 2]
    chosen = ItemList()
    current = reward.evaluate(()) if pool else 0.0
    while True:
        feasible = [
            it
            for it in pool
            if not chosen.contains_id(it.id)
            and chosen.total_length + it.length <= budget
        ]
        if not feasible:
            break
        unions = reward.union_values(chosen.ids, [it.id for it in feasible])
        lengths = np.array([it.length for it in feasible], dtype=np.float64)
        benefits = (unions - current) / lengths
        best = int(np.argmax(benefits))
        if benefits[best] <= 0.0:
            break
        chosen = chosen.append(feasible[best])
        current = float(unions[best])
    return chosen


def brute_force_optimal(
    reward: RewardFunction, items: Iterable[Item], budget: int
) -> tuple[ItemList, float]:
    """Exact maximizer over every budget-feasible subset (test oracle).

    Enumeration is exponential, so the item count is guarded.  Ties break to
    the lexicographically smallest sorted id sequence, which also makes the
    result independent of the order items are supplied in.
    """
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    pool = sorted(items, key=lambda it: it.id)
    n = len(pool)
    if n > BRUTE_FORCE_MAX_ITEMS:
        raise InstanceTooLargeError(
            f"{n} items exceeds the exhaustive-search guard of "
            f"{BRUTE_FORCE_MAX_ITEMS}; use a smaller instance"
        )
    ids = [it.id for it in pool]
    if n == 0:
        return ItemList(), float(reward.evaluate(()))
    lengths = np.array([it.length for it in pool], dtype=np.int64)
    bit_cols = np.arange(n)
    best_value = -np.inf
    best_masks: list[int] = []
    for start in range(0, 1 << n, SUBSET_CHUNK):
        masks = np.arange(start, min(start + SUBSET_CHUNK, 1 << n), dtype=np.int64)
        member = ((masks[:, None] >> bit_cols) & 1).astype(bool)
        feasible = member @ lengths <= budget
        if not feasible.any():
            continue
        values = reward.evaluate_subsets(ids, member[feasible])
        local_best = float(values.max())
        if local_best < best_value:
            continue
        hit = masks[feasible][values == local_best]
        if local_best > best_value:
            best_value = local_best
            best_masks = list(hit)
        else:
            best_masks.extend(hit)

    def id_key(mask: int) -> tuple[int, ...]:
        return tuple(ids[b] for b in range(n) if (mask >> b) & 1)

    best_mask = min(best_masks, key=id_key)
    chosen = [pool[b] for b in range(n) if (best_mask >> b) & 1]
    return ItemList(chosen), best_value


@dataclass
class SubmodularityReport:
    """Outcome of randomized monotonicity / diminishing-returns probing."""

    trials: int
    submodularity_violations: int
    monotonicity_violations: int
    worst_violation: float

    @property
    def passed(self) -> bool:
        return self.submodularity_violations == 0 and self.monotonicity_violations == 0


TripleSampler = Callable[[np.random.Generator], tuple[Sequence[int], Sequence[int], int]]


def uniform_triple_sampler(ids: Sequence[int], *, max_size: int = 6) -> TripleSampler:
    """Sampler of (list1, list2, item) triples over the given id pool."""
    pool = sorted(ids)
    if not pool:
        raise ValueError("id pool is empty")

    def sample(rng: np.random.Generator):
        cap = min(max_size, len(pool))
        first = rng.permutation(len(pool))[: int(rng.integers(0, cap + 1))]
        second = rng.permutation(len(pool))[: int(rng.integers(0, cap + 1))]
        single = pool[int(rng.integers(len(pool)))]
        return [pool[i] for i in first], [pool[i] for i in second], single

    return sample


def check_monotone_submodular(
    reward: RewardFunction,
    sampler: TripleSampler,
    trials: int,
    *,
    seed: int = 0,
    tolerance: float = 1e-9,
) -> SubmodularityReport:
    """Probe the two defining inequalities on random (L1, L2, s) triples.

    Checks f(L1+s) - f(L1) >= f(L1+L2+s) - f(L1+L2) and f(L1) <= f(L1+L2),
    each within ``tolerance``; reports counts and the worst signed slack.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    sub_violations = 0
    mono_violations = 0
    worst = 0.0
    for _ in range(trials):
        first, second, single = sampler(rng)
        first = tuple(first)
        joined = first + tuple(second)
        f_first = reward.evaluate(first)
        f_joined = reward.evaluate(joined)
        gain_small = reward.evaluate(first + (single,)) - f_first
        gain_large = reward.evaluate(joined + (single,)) - f_joined
        sub_slack = gain_small - gain_large
        mono_slack = f_joined - f_first
        if sub_slack < -tolerance:
            sub_violations += 1
        if mono_slack < -tolerance:
            mono_violations += 1
        worst = min(worst, sub_slack, mono_slack)
    return SubmodularityReport(trials, sub_violations, mono_violations, worst)
