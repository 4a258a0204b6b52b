"""Numerical certification of the selection guarantees on exhaustively
checkable instances: expected values of stochastically thinned lists, the
submodular gain inequalities they satisfy, the competitive bound for
constructed lists, and the end-to-end mixture-policy guarantee."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .features import FEATURE_DIM, assemble_features, build_feature_context
from .learners import LinearRanker
from .listpred import (
    LEARNER_RWM,
    ProblemInstance,
    TrainConfig,
    construct_with_policy,
    train,
)
from .rewards import (
    CoverageReward,
    InstanceTooLargeError,
    Item,
    ItemList,
    RewardFunction,
)

EXACT_ENUMERATION_MAX = 20
GAIN_BOUND_MAX = 12
SEARCH_MAX_POLICIES = 6
SEARCH_MAX_ITEMS = 8
SEARCH_MAX_POSITIONS = 8
DEFAULT_TOLERANCE = 1e-9
_CHUNK = 8192


@dataclass
class StochasticListSpec:
    """A deterministic list together with its thinning probabilities: each
    member is kept independently with probability one over its length."""

    base_list: ItemList

    @property
    def inclusion_probs(self) -> np.ndarray:
        return np.array([1.0 / item.length for item in self.base_list.items])


@dataclass
class BoundReport:
    """One checked inequality, stated as lhs >= rhs - tolerance."""

    check: str
    lhs: float
    rhs: float
    slack: float
    holds: bool
    tolerance: float
    components: dict[str, float]

    @classmethod
    def build(
        cls,
        check: str,
        lhs: float,
        rhs: float,
        tolerance: float,
        components: dict[str, float],
    ) -> "BoundReport":
        slack = lhs - rhs
        return cls(
            check=check,
            lhs=lhs,
            rhs=rhs,
            slack=slack,
            holds=slack >= -tolerance,
            tolerance=tolerance,
            components=components,
        )


def _deduped_union(base_ids: Sequence[int], items: Sequence[Item]):
    """ids for the forced base plus the free (thinned) items, skipping
    list members that already sit in the base."""
    base = list(dict.fromkeys(base_ids))
    base_set = set(base)
    free = [item for item in items if item.id not in base_set]
    return base, free


def stochastic_list_value(
    spec: StochasticListSpec,
    reward: RewardFunction,
    *,
    method: str = "exact",
    samples: int = 100_000,
    seed: int = 0,
    base: ItemList | None = None,
) -> float:
    """Expected reward of ``base`` joined with the thinned list.

    ``exact`` enumerates every inclusion pattern (guarded exponential);
    ``monte_carlo`` averages seeded samples.
    """
    base_ids, free = _deduped_union(() if base is None else base.ids, spec.base_list.items)
    ids = base_ids + [item.id for item in free]
    probs = np.array([1.0 / item.length for item in free])
    m = len(free)
    if m == 0:
        return float(reward.evaluate(ids))
    if method == "exact":
        if len(spec.base_list) > EXACT_ENUMERATION_MAX:
            raise InstanceTooLargeError(
                f"{len(spec.base_list)} items exceeds the exact-enumeration "
                f"guard of {EXACT_ENUMERATION_MAX}"
            )
        total = 0.0
        for start in range(0, 1 << m, _CHUNK):
            masks = np.arange(start, min(start + _CHUNK, 1 << m), dtype=np.int64)
            included = ((masks[:, None] >> np.arange(m)) & 1).astype(bool)
            pattern_probs = np.prod(np.where(included, probs, 1.0 - probs), axis=1)
            member = np.hstack(
                [np.ones((len(masks), len(base_ids)), dtype=bool), included]
            )
            total += float(pattern_probs @ reward.evaluate_subsets(ids, member))
        return total
    if method in ("monte_carlo", "mc"):
        rng = np.random.default_rng(seed)
        total = 0.0
        done = 0
        while done < samples:
            block = min(_CHUNK, samples - done)
            included = rng.random((block, m)) < probs
            member = np.hstack([np.ones((block, len(base_ids)), dtype=bool), included])
            total += float(reward.evaluate_subsets(ids, member).sum())
            done += block
        return total / samples
    raise ValueError(f"unknown method {method!r}")


def _normalized_gains(
    reward: RewardFunction, base_ids: Sequence[int], items: Sequence[Item]
) -> np.ndarray:
    base_value = reward.evaluate(base_ids)
    unions = reward.union_values(base_ids, [item.id for item in items])
    lengths = np.array([item.length for item in items], dtype=np.float64)
    return (unions - base_value) / lengths


def mean_gain_bound(
    reward: RewardFunction,
    base: ItemList,
    other: ItemList,
    *,
    tolerance: float = DEFAULT_TOLERANCE,
) -> BoundReport:
    """Whole-list gain never beats size times the mean single-item gain:
    |other| * (E_uniform[f(base + s)] - f(base)) >= f(base + other) - f(base).
    """
    if len(other) == 0:
        raise ValueError("the compared list must be nonempty")
    f_base = reward.evaluate(base.ids)
    f_union = reward.evaluate(base.ids + other.ids)
    singles = reward.union_values(base.ids, [item.id for item in other.items])
    mean_single = float(singles.mean())
    components = {
        "base_value": f_base,
        "union_value": f_union,
        "mean_single_value": mean_single,
        "other_size": float(len(other)),
    }
    lhs = len(other) * (mean_single - f_base)
    rhs = f_union - f_base
    return BoundReport.build("mean_gain", lhs, rhs, tolerance, components)


def stochastic_gain_bound(
    reward: RewardFunction,
    base: ItemList,
    other: ItemList,
    *,
    tolerance: float = DEFAULT_TOLERANCE,
) -> BoundReport:
    """Normalized variant for the thinned list: |other| times the mean
    length-normalized gain upper-bounds the expected thinned-union gain."""
    if len(other) == 0:
        raise ValueError("the compared list must be nonempty")
    if len(other) > GAIN_BOUND_MAX:
        raise InstanceTooLargeError(
            f"{len(other)} items exceeds the enumeration guard of {GAIN_BOUND_MAX}"
        )
    f_base = reward.evaluate(base.ids)
    mean_normalized = float(_normalized_gains(reward, base.ids, other.items).mean())
    expected_union = stochastic_list_value(
        StochasticListSpec(other), reward, method="exact", base=base
    )
    components = {
        "base_value": f_base,
        "expected_union_value": expected_union,
        "mean_normalized_gain": mean_normalized,
        "other_size": float(len(other)),
    }
    lhs = len(other) * mean_normalized
    rhs = expected_union - f_base
    return BoundReport.build("stochastic_gain", lhs, rhs, tolerance, components)


def competitive_ratio_bound(
    reward: RewardFunction,
    built: ItemList,
    reference: ItemList,
    *,
    tolerance: float = DEFAULT_TOLERANCE,
) -> BoundReport:
    """Value of a constructed list against the thinned reference list.

    With per-step errors eps_j (mean normalized reference gain minus the
    builder's own normalized step gain), the constructed value satisfies
    f(built) >= (1 - exp(-len(built)/|reference|)) * E[f(thinned reference)]
    minus the discounted, length-weighted error sum.  The discount factors
    need every built length <= |reference| to stay in [0, 1]; the report
    flags when that fails but still evaluates the expression.
    """
    if len(reference) == 0:
        raise ValueError("the reference list must be nonempty")
    if len(reference) > GAIN_BOUND_MAX:
        raise InstanceTooLargeError(
            f"{len(reference)} items exceeds the enumeration guard of {GAIN_BOUND_MAX}"
        )
    n_ref = len(reference)
    prefix = ItemList()
    prefix_values = [reward.evaluate(())]
    errors: list[float] = []
    for item in built.items:
        mean_normalized = float(
            _normalized_gains(reward, prefix.ids, reference.items).mean()
        )
        step_value = reward.evaluate(prefix.ids + (item.id,))
        step_gain = (step_value - prefix_values[-1]) / item.length
        errors.append(mean_normalized - step_gain)
        prefix = prefix.append(item)
        prefix_values.append(step_value)
    alpha = math.exp(-built.total_length / n_ref)
    expected_reference = stochastic_list_value(
        StochasticListSpec(reference), reward, method="exact"
    )
    penalty = 0.0
    for i, item in enumerate(built.items):
        factor = 1.0
        for later in built.items[i + 1 :]:
            factor *= 1.0 - later.length / n_ref
        penalty += factor * item.length * errors[i]
    factors_in_range = all(item.length <= n_ref for item in built.items)
    components = {
        "built_value": prefix_values[-1],
        "alpha": alpha,
        "expected_reference_value": expected_reference,
        "penalty": penalty,
        "factors_in_range": 1.0 if factors_in_range else 0.0,
    }
    lhs = prefix_values[-1]
    rhs = (1.0 - alpha) * expected_reference - penalty
    return BoundReport.build("competitive_ratio", lhs, rhs, tolerance, components)


def convex_surrogate_gap(
    alg_cost: Sequence[float],
    alg_convex: Sequence[float],
    policy_cost: np.ndarray,
    policy_convex: np.ndarray,
) -> float:
    """How far minimizing the convex surrogate can drift from minimizing the
    cost-sensitive loss, averaged per round:

        (sum_t (cost_t - convex_t)
         + min over columns of sum_t policy_convex
         - min over columns of sum_t policy_cost) / T

    The per-round sequences are the running policy's losses; the matrices
    hold every comparator policy's losses (columns), either the finite class
    or trace snapshots as an estimate.
    """
    alg_cost = np.asarray(alg_cost, dtype=np.float64)
    alg_convex = np.asarray(alg_convex, dtype=np.float64)
    policy_cost = np.asarray(policy_cost, dtype=np.float64)
    policy_convex = np.asarray(policy_convex, dtype=np.float64)
    rounds = alg_cost.shape[0]
    if rounds == 0:
        raise ValueError("need at least one round")
    if alg_convex.shape != (rounds,):
        raise ValueError("per-round loss sequences have mismatched lengths")
    if policy_cost.shape != policy_convex.shape or policy_cost.shape[0] != rounds:
        raise ValueError("per-policy loss matrices have mismatched shapes")
    return float(
        (
            alg_cost.sum()
            - alg_convex.sum()
            + policy_convex.sum(axis=0).min()
            - policy_cost.sum(axis=0).min()
        )
        / rounds
    )


def random_coverage_items(
    rng: np.random.Generator,
    *,
    n_items: int,
    n_concepts: int = 12,
    max_length: int = 4,
    max_cover: int = 3,
) -> tuple[CoverageReward, list[Item]]:
    """Random weighted-coverage instance: every item covers a few concepts
    and carries a length in 1..max_length."""
    concepts = [f"c{j}" for j in range(n_concepts)]
    weights = {c: float(w) for c, w in zip(concepts, rng.uniform(0.5, 1.5, n_concepts))}
    covers = {}
    items = []
    for item_id in range(n_items):
        k = int(rng.integers(1, max_cover + 1))
        chosen = rng.choice(n_concepts, size=min(k, n_concepts), replace=False)
        covers[item_id] = [concepts[j] for j in chosen]
        items.append(
            Item(
                id=item_id,
                length=int(rng.integers(1, max_length + 1)),
                payload=tuple(sorted(covers[item_id])),
            )
        )
    return CoverageReward(weights, covers), items


def sample_bound_lists(
    rng: np.random.Generator,
    items: Sequence[Item],
    *,
    max_size: int = 8,
    cap_built_lengths: bool = False,
) -> tuple[ItemList, ItemList]:
    """Draw two random lists (they may overlap) for the gain bounds.

    With ``cap_built_lengths`` the first list only uses items no longer than
    the second list's size, which is what keeps the competitive bound's
    discount factors inside [0, 1].
    """
    order = rng.permutation(len(items))
    second_size = int(rng.integers(1, min(max_size, len(items)) + 1))
    second = ItemList([items[i] for i in order[:second_size]])
    first_pool = [
        item
        for item in items
        if not cap_built_lengths or item.length <= second_size
    ]
    rng.shuffle(first_pool)
    first_size = int(rng.integers(0, min(max_size, len(first_pool)) + 1))
    first = ItemList(first_pool[:first_size])
    return first, second


def synthetic_policy_instances(
    n_states: int,
    *,
    budget: int,
    n_items: int = 8,
    n_concepts: int = 12,
    max_length: int = 4,
    max_cover: int = 3,
    seed: int = 0,
) -> list[ProblemInstance]:
    """Small featurized coverage states for the mixture-guarantee harness."""
    rng = np.random.default_rng(seed)
    instances = []
    for state in range(n_states):
        reward, items = random_coverage_items(
            rng,
            n_items=n_items,
            n_concepts=n_concepts,
            max_length=max_length,
            max_cover=max_cover,
        )
        context = build_feature_context(items, budget)
        instances.append(
            ProblemInstance(
                state_id=f"state-{state:03d}",
                items=items,
                reward=reward,
                features=context,
            )
        )
    return instances


def random_policies(
    count: int, *, seed: int = 0, scale: float = 1.0
) -> tuple[LinearRanker, ...]:
    """Fixed linear scorers forming a finite policy class."""
    rng = np.random.default_rng(seed)
    return tuple(
        LinearRanker(weights=scale * rng.standard_normal(FEATURE_DIM))
        for _ in range(count)
    )


@dataclass
class OptimalPolicySequence:
    """Best fixed policy sequence found by exhaustive search, valued by the
    expected reward of its thinned per-state lists."""

    sequence: tuple[int, ...]
    value: float
    per_state_lists: list[ItemList]


def exhaustive_optimal_policy_list(
    policies: Sequence,
    instances: Sequence[ProblemInstance],
    sequence_length: int,
) -> OptimalPolicySequence:
    """Enumerate every policy sequence of the given length (with repetition)
    and return the one whose deterministic per-state lists have the highest
    mean thinned-list value.

    Each policy in the sequence picks over the items not yet selected, with
    no budget cut; the budget enters through the thinning probabilities.
    Feasible only under the guards (small class, few items, short length).
    """
    if len(policies) > SEARCH_MAX_POLICIES:
        raise InstanceTooLargeError(
            f"policy class of {len(policies)} exceeds {SEARCH_MAX_POLICIES}"
        )
    if sequence_length > SEARCH_MAX_POSITIONS:
        raise InstanceTooLargeError(
            f"sequence length {sequence_length} exceeds {SEARCH_MAX_POSITIONS}"
        )
    for inst in instances:
        if len(inst.items) > SEARCH_MAX_ITEMS:
            raise InstanceTooLargeError(
                f"instance {inst.state_id} has {len(inst.items)} items, "
                f"more than {SEARCH_MAX_ITEMS}"
            )
        if inst.reward is None or inst.features is None:
            raise ValueError(f"instance {inst.state_id} lacks reward or features")

    pick_caches = [dict() for _ in instances]
    feature_caches = [dict() for _ in instances]
    value_caches = [dict() for _ in instances]

    def advance(state: int, built: ItemList, policy_idx: int) -> ItemList:
        instance = instances[state]
        key = (frozenset(built.ids), policy_idx)
        cache = pick_caches[state]
        if key not in cache:
            remaining = [
                item for item in instance.items if not built.contains_id(item.id)
            ]
            if not remaining:
                cache[key] = None
            else:
                feat_key = frozenset(built.ids)
                feats = feature_caches[state].get(feat_key)
                if feats is None:
                    feats = {
                        item.id: assemble_features(instance, built, item).assembled
                        for item in remaining
                    }
                    feature_caches[state][feat_key] = feats
                cache[key] = policies[policy_idx].pick(
                    feats, [item.id for item in remaining]
                )
        pick = cache[key]
        return built if pick is None else built.append(instance.item(pick))

    def list_value(state: int, built: ItemList) -> float:
        key = frozenset(built.ids)
        cache = value_caches[state]
        if key not in cache:
            cache[key] = stochastic_list_value(
                StochasticListSpec(built), instances[state].reward, method="exact"
            )
        return cache[key]

    best_value = -np.inf
    best_sequence: tuple[int, ...] = ()
    best_lists: list[ItemList] = []

    def search(depth: int, prefix: tuple[int, ...], lists: list[ItemList]) -> None:
        nonlocal best_value, best_sequence, best_lists
        if depth == sequence_length:
            value = float(
                np.mean([list_value(s, lst) for s, lst in enumerate(lists)])
            )
            if value > best_value:
                best_value = value
                best_sequence = prefix
                best_lists = list(lists)
            return
        for policy_idx in range(len(policies)):
            next_lists = [
                advance(s, lst, policy_idx) for s, lst in enumerate(lists)
            ]
            search(depth + 1, prefix + (policy_idx,), next_lists)

    search(0, (), [ItemList() for _ in instances])
    return OptimalPolicySequence(best_sequence, best_value, best_lists)


@dataclass
class RepetitionOutcome:
    seed: int
    mixture_value: float
    regret: float
    lhs: float
    rhs: float
    holds: bool


@dataclass
class MixtureGuaranteeReport:
    """Frequency with which the high-probability mixture bound held."""

    delta: float
    repetitions: int
    frequency: float
    passed: bool
    optimal_value: float
    deviation: float
    discount: float
    outcomes: list[RepetitionOutcome] = field(default_factory=list)


def check_mixture_guarantee(
    cfg: TrainConfig,
    instances: Sequence[ProblemInstance],
    *,
    delta: float,
    repetitions: int,
    sequence_length: int | None = None,
) -> MixtureGuaranteeReport:
    """Certify, by repetition frequency, the mixture-policy guarantee

        mixture value >= (1 - 1/e) * optimal thinned value
                         - regret/T - 2 sqrt(2 ln(1/delta) / T).

    Each repetition trains the weighted-majority learner with a fresh seed;
    the mixture value averages the pre-update policy distributions against
    exact per-policy values, the regret is the realized training regret, and
    the optimal value comes from the exhaustive sequence search.  The check
    passes when the inequality holds in at least a 1 - delta fraction.
    """
    if cfg.learner != LEARNER_RWM:
        raise ValueError("the mixture guarantee applies to the rwm learner")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    if cfg.budget > SEARCH_MAX_POSITIONS:
        raise InstanceTooLargeError(
            f"budget {cfg.budget} exceeds the search guard {SEARCH_MAX_POSITIONS}"
        )
    length = cfg.budget if sequence_length is None else sequence_length
    optimum = exhaustive_optimal_policy_list(cfg.policies, instances, length)

    per_policy_value = np.array(
        [
            np.mean(
                [
                    inst.reward.evaluate(
                        construct_with_policy(
                            policy,
                            inst,
                            cfg.budget,
                            half_budget_filter=cfg.half_budget_filter,
                        ).ids
                    )
                    for inst in instances
                ]
            )
            for policy in cfg.policies
        ]
    )
    deviation = 2.0 * math.sqrt(2.0 * math.log(1.0 / delta) / cfg.iterations)
    discount = 1.0 - 1.0 / math.e
    outcomes = []
    held = 0
    for rep in range(repetitions):
        run_cfg = replace(cfg, seed=cfg.seed + rep)
        bundle = train(instances, run_cfg)
        trace = bundle.trace
        distributions = [trace.initial_snapshot] + trace.snapshots[:-1]
        mixture_value = float(
            np.mean([dist @ per_policy_value for dist in distributions])
        )
        regret = float(
            sum(trace.cost_losses) - bundle.rwm.cumulative_policy_losses.min()
        )
        rhs = discount * optimum.value - regret / cfg.iterations - deviation
        holds = mixture_value >= rhs - 1e-12
        held += holds
        outcomes.append(
            RepetitionOutcome(
                seed=run_cfg.seed,
                mixture_value=mixture_value,
                regret=regret,
                lhs=mixture_value,
                rhs=rhs,
                holds=holds,
            )
        )
    frequency = held / repetitions
    return MixtureGuaranteeReport(
        delta=delta,
        repetitions=repetitions,
        frequency=frequency,
        passed=frequency >= 1.0 - delta,
        optimal_value=optimum.value,
        deviation=deviation,
        discount=discount,
        outcomes=outcomes,
    )
