"""End-to-end list prediction: budgeted list construction with a policy,
cost-sensitive example generation with position-discounted weights, and the
online training loop in shared-policy ("scp") and per-position
("conseqopt") modes."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .features import FEATURE_DIM, FeatureContext, assemble_features
from .learners import (
    CostSensitiveExample,
    LinearRanker,
    RWMState,
    hedge_eta,
    reduce_to_ranking,
    rwm_policy_loss,
)
from .rewards import Item, ItemList, RewardFunction

MODE_SHARED = "scp"
MODE_PER_POSITION = "conseqopt"
LEARNER_RANKER = "ranker"
LEARNER_RWM = "rwm"

WHICH_FINAL = "final"
WHICH_BEST = "best"
WHICH_MIXTURE = "mixture"

BUNDLE_FORMAT = "sublist-policy-v1"


@dataclass
class ProblemInstance:
    """One selection task: the candidate items, an optional reward oracle
    (training / evaluation only), and the featurization context."""

    state_id: str
    items: list[Item]
    reward: RewardFunction | None = None
    features: FeatureContext | None = None

    def __post_init__(self) -> None:
        if not self.items:
            raise ValueError(f"instance {self.state_id}: needs at least one item")
        ids = [item.id for item in self.items]
        if len(set(ids)) != len(ids):
            raise ValueError(f"instance {self.state_id}: duplicate item ids")
        self.items = sorted(self.items, key=lambda it: it.id)
        self._by_id = {item.id: item for item in self.items}
        self._lengths = np.array([item.length for item in self.items], dtype=np.float64)

    def item(self, item_id: int) -> Item:
        return self._by_id[item_id]

    @property
    def item_ids(self) -> list[int]:
        return [item.id for item in self.items]

    @property
    def lengths(self) -> np.ndarray:
        return self._lengths


@dataclass
class TrainConfig:
    """Knobs of one training run."""

    mode: str
    budget: int
    iterations: int
    seed: int = 0
    learner: str = LEARNER_RANKER
    eta0: float = 0.5
    rwm_eta: float | None = None
    half_budget_filter: bool = False
    max_positions: int | None = None
    policies: tuple = ()

    def __post_init__(self) -> None:
        if self.mode not in (MODE_SHARED, MODE_PER_POSITION):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.learner not in (LEARNER_RANKER, LEARNER_RWM):
            raise ValueError(f"unknown learner {self.learner!r}")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.mode == MODE_PER_POSITION:
            if self.max_positions is None or self.max_positions < 1:
                raise ValueError("per-position mode needs max_positions >= 1")
        if self.learner == LEARNER_RWM:
            if not self.policies:
                raise ValueError("the rwm learner needs a finite policy class")
            if self.mode != MODE_SHARED:
                raise ValueError(
                    "the rwm learner is only supported with the shared-policy mode"
                )


@dataclass
class TrainTrace:
    """Per-round record: list value, realized cost-sensitive loss, convex
    (hinge) loss where applicable, rwm regret, and post-update snapshots."""

    values: list[float] = field(default_factory=list)
    cost_losses: list[float] = field(default_factory=list)
    convex_losses: list[float] = field(default_factory=list)
    regrets: list[float] = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    initial_snapshot: object = None
    examples: list[list[CostSensitiveExample]] | None = None


@dataclass
class PolicyBundle:
    """A trained policy (or policy distribution) plus its training trace."""

    mode: str
    learner: str
    budget: int
    dimension: int
    half_budget_filter: bool = False
    max_positions: int | None = None
    ranker: LinearRanker | None = None
    rankers: list[LinearRanker] | None = None
    rwm: RWMState | None = None
    trace: TrainTrace = field(default_factory=TrainTrace)


@dataclass
class EvalSummary:
    which: str
    mean_value: float
    mean_length: float
    mean_size: float
    snapshots_used: int


def _feasible_items(
    pool: Sequence[Item], built: ItemList, budget: int
) -> list[Item]:
    return [
        item
        for item in pool
        if not built.contains_id(item.id)
        and built.total_length + item.length <= budget
    ]


def _filtered_pool(instance: ProblemInstance, budget: int, half_filter: bool) -> list[Item]:
    if half_filter:
        return [item for item in instance.items if item.length <= budget / 2]
    return list(instance.items)


def construct_with_policy(
    policy,
    instance: ProblemInstance,
    budget: int,
    *,
    half_budget_filter: bool = False,
    max_positions: int | None = None,
) -> ItemList:
    """Greedily apply one fixed picker at every position until nothing fits."""
    pool = _filtered_pool(instance, budget, half_budget_filter)
    built = ItemList()
    while max_positions is None or len(built) < max_positions:
        feasible = _feasible_items(pool, built, budget)
        if not feasible:
            break
        feats = {
            item.id: assemble_features(instance, built, item).assembled
            for item in feasible
        }
        pick = policy.pick(feats, [item.id for item in feasible])
        built = built.append(instance.item(pick))
    return built


def construct_with_position_policies(
    policies: Sequence,
    instance: ProblemInstance,
    budget: int,
    *,
    half_budget_filter: bool = False,
) -> ItemList:
    """Like :func:`construct_with_policy` but position i uses policies[i];
    construction stops after the last provided position."""
    pool = _filtered_pool(instance, budget, half_budget_filter)
    built = ItemList()
    for policy in policies:
        feasible = _feasible_items(pool, built, budget)
        if not feasible:
            break
        feats = {
            item.id: assemble_features(instance, built, item).assembled
            for item in feasible
        }
        pick = policy.pick(feats, [item.id for item in feasible])
        built = built.append(instance.item(pick))
    return built


def construct_list(
    bundle: PolicyBundle,
    instance: ProblemInstance,
    budget: int | None = None,
    *,
    rng: np.random.Generator | None = None,
) -> ItemList:
    """Construct a budget-feasible list with the bundle's current policy.

    With the rwm learner one policy is sampled from the current distribution
    for the whole list, so a generator is required.
    """
    width = bundle.budget if budget is None else budget
    if bundle.learner == LEARNER_RWM:
        if rng is None:
            raise ValueError("constructing with the rwm learner needs an rng")
        policy = bundle.rwm.policies[bundle.rwm.sample_index(rng)]
        return construct_with_policy(
            policy,
            instance,
            width,
            half_budget_filter=bundle.half_budget_filter,
        )
    if bundle.mode == MODE_PER_POSITION:
        return construct_with_position_policies(
            bundle.rankers,
            instance,
            width,
            half_budget_filter=bundle.half_budget_filter,
        )
    return construct_with_policy(
        bundle.ranker,
        instance,
        width,
        half_budget_filter=bundle.half_budget_filter,
        max_positions=bundle.max_positions,
    )


def position_weight(built: ItemList, position: int, budget: int) -> float:
    """Importance weight of the example at ``position`` (0-based): the
    picked item's length discounted by every later pick's budget share."""
    factor = 1.0
    for later in built.items[position + 1 :]:
        factor *= 1.0 - later.length / budget
    return factor * built.items[position].length


def make_examples(
    instance: ProblemInstance,
    built: ItemList,
    budget: int,
    *,
    half_budget_filter: bool = False,
) -> list[CostSensitiveExample]:
    """One cost-sensitive example per filled position of ``built``.

    Costs are computed over every candidate in the instance (feasibility is
    only enforced at prediction time): cost(s) = best normalized benefit at
    that position minus s's normalized benefit.
    """
    if instance.reward is None:
        raise ValueError(f"instance {instance.state_id} has no reward oracle")
    reward = instance.reward
    pool = _filtered_pool(instance, budget, half_budget_filter)
    pool_ids = [item.id for item in pool]
    lengths = np.array([item.length for item in pool], dtype=np.float64)
    examples: list[CostSensitiveExample] = []
    prefix = ItemList()
    for position, picked in enumerate(built.items):
        base_value = reward.evaluate(prefix.ids)
        unions = reward.union_values(prefix.ids, pool_ids)
        benefits = (unions - base_value) / lengths
        best = float(benefits.max())
        costs = {item_id: float(best - b) for item_id, b in zip(pool_ids, benefits)}
        feats = {
            item.id: assemble_features(instance, prefix, item).assembled
            for item in pool
        }
        examples.append(
            CostSensitiveExample(
                candidate_features=feats,
                costs=costs,
                weight=position_weight(built, position, budget),
                position=position,
            )
        )
        prefix = prefix.append(picked)
    return examples


def _realized_cost_loss(examples: Sequence[CostSensitiveExample], built: ItemList) -> float:
    return sum(
        ex.weight * ex.costs[built.items[ex.position].id] for ex in examples
    )


def _snapshot(bundle: PolicyBundle):
    if bundle.learner == LEARNER_RWM:
        return bundle.rwm.distribution()
    if bundle.mode == MODE_PER_POSITION:
        return [ranker.weights.copy() for ranker in bundle.rankers]
    return bundle.ranker.weights.copy()


def train(
    instances: Sequence[ProblemInstance],
    cfg: TrainConfig,
    *,
    record_examples: bool = False,
) -> PolicyBundle:
    """Run the online loop: sample a state, build a list with the current
    policy, turn every filled position into weighted cost-sensitive
    examples, and hand them to the learner.

    The shared mode feeds all positions to one ranker; the per-position mode
    routes position i to ranker i.  States are drawn i.i.d. (with
    replacement) from ``instances`` using the config seed, so a fixed seed
    and instance sequence reproduce the trace bit for bit.
    """
    if not instances:
        raise ValueError("no training instances")
    for inst in instances:
        if inst.reward is None:
            raise ValueError(f"instance {inst.state_id} has no reward oracle")
        if inst.features is None:
            raise ValueError(f"instance {inst.state_id} has no feature context")
    rng = np.random.default_rng(cfg.seed)
    bundle = PolicyBundle(
        mode=cfg.mode,
        learner=cfg.learner,
        budget=cfg.budget,
        dimension=FEATURE_DIM,
        half_budget_filter=cfg.half_budget_filter,
        max_positions=cfg.max_positions,
    )
    if cfg.learner == LEARNER_RWM:
        eta = cfg.rwm_eta
        if eta is None:
            eta = hedge_eta(len(cfg.policies), cfg.iterations)
        bundle.rwm = RWMState.uniform(cfg.policies, eta, auto_scale=True)
    elif cfg.mode == MODE_PER_POSITION:
        bundle.rankers = [
            LinearRanker.zeros(FEATURE_DIM, cfg.eta0) for _ in range(cfg.max_positions)
        ]
    else:
        bundle.ranker = LinearRanker.zeros(FEATURE_DIM, cfg.eta0)
    trace = bundle.trace
    trace.initial_snapshot = _snapshot(bundle)
    if record_examples:
        trace.examples = []

    for _ in range(cfg.iterations):
        instance = instances[int(rng.integers(len(instances)))]
        if cfg.learner == LEARNER_RWM:
            policy = bundle.rwm.policies[bundle.rwm.sample_index(rng)]
            built = construct_with_policy(
                policy,
                instance,
                cfg.budget,
                half_budget_filter=cfg.half_budget_filter,
            )
        else:
            built = construct_list(bundle, instance)
        examples = make_examples(
            instance, built, cfg.budget, half_budget_filter=cfg.half_budget_filter
        )
        value = float(instance.reward.evaluate(built.ids))
        cost_loss = _realized_cost_loss(examples, built)
        if not math.isfinite(cost_loss):
            raise RuntimeError("non-finite training loss; aborting run")

        if cfg.learner == LEARNER_RWM:
            losses = np.array(
                [
                    sum(rwm_policy_loss(policy, ex) for ex in examples)
                    for policy in bundle.rwm.policies
                ]
            )
            bundle.rwm.update(losses)
            trace.regrets.append(bundle.rwm.regret())
            convex_loss = 0.0
        elif cfg.mode == MODE_PER_POSITION:
            convex_loss = 0.0
            for ex in examples:
                pairs = reduce_to_ranking(ex)
                learner = bundle.rankers[ex.position]
                convex_loss += learner.batch_hinge(pairs)
                learner.update(pairs)
        else:
            pairs = [pair for ex in examples for pair in reduce_to_ranking(ex)]
            convex_loss = bundle.ranker.batch_hinge(pairs)
            bundle.ranker.update(pairs)

        trace.values.append(value)
        trace.cost_losses.append(cost_loss)
        trace.convex_losses.append(convex_loss)
        trace.snapshots.append(_snapshot(bundle))
        if record_examples:
            trace.examples.append(examples)
    return bundle


def _ranker_from_snapshot(snapshot: np.ndarray) -> LinearRanker:
    return LinearRanker(weights=np.asarray(snapshot, dtype=np.float64))


def _snapshot_stats(
    bundle: PolicyBundle, snapshot, instances: Sequence[ProblemInstance], budget: int
) -> tuple[float, float, float]:
    values, lengths, sizes = [], [], []
    for instance in instances:
        if bundle.mode == MODE_PER_POSITION:
            built = construct_with_position_policies(
                [_ranker_from_snapshot(w) for w in snapshot],
                instance,
                budget,
                half_budget_filter=bundle.half_budget_filter,
            )
        else:
            built = construct_with_policy(
                _ranker_from_snapshot(snapshot),
                instance,
                budget,
                half_budget_filter=bundle.half_budget_filter,
                max_positions=bundle.max_positions,
            )
        values.append(instance.reward.evaluate(built.ids))
        lengths.append(built.total_length)
        sizes.append(len(built))
    return float(np.mean(values)), float(np.mean(lengths)), float(np.mean(sizes))


def _policy_value_table(
    bundle: PolicyBundle, instances: Sequence[ProblemInstance], budget: int
) -> np.ndarray:
    """(3, |class|) table of mean value / length / size per fixed policy."""
    table = np.zeros((3, len(bundle.rwm.policies)))
    for col, policy in enumerate(bundle.rwm.policies):
        values, lengths, sizes = [], [], []
        for instance in instances:
            built = construct_with_policy(
                policy,
                instance,
                budget,
                half_budget_filter=bundle.half_budget_filter,
            )
            values.append(instance.reward.evaluate(built.ids))
            lengths.append(built.total_length)
            sizes.append(len(built))
        table[:, col] = (np.mean(values), np.mean(lengths), np.mean(sizes))
    return table


def evaluate_policy(
    bundle: PolicyBundle,
    instances: Sequence[ProblemInstance],
    which: str = WHICH_FINAL,
    *,
    budget: int | None = None,
    seed: int = 0,
    max_snapshots: int = 100,
) -> EvalSummary:
    """Mean reward / length / size of the trained policy on ``instances``.

    ``final`` scores the post-training policy, ``best`` the snapshot with
    the highest mean value on these instances, and ``mixture`` the average
    over snapshots (uniformly subsampled to ``max_snapshots`` for ranker
    bundles; the rwm average is exact and cheap, so it uses every one).
    """
    if not instances:
        raise ValueError("no evaluation instances")
    for inst in instances:
        if inst.reward is None:
            raise ValueError(f"instance {inst.state_id} has no reward oracle")
    if which not in (WHICH_FINAL, WHICH_BEST, WHICH_MIXTURE):
        raise ValueError(f"unknown evaluation target {which!r}")
    width = bundle.budget if budget is None else budget
    snapshots = bundle.trace.snapshots

    if bundle.learner == LEARNER_RWM:
        table = _policy_value_table(bundle, instances, width)
        if which == WHICH_FINAL:
            dists, used = [bundle.rwm.distribution()], 1
        elif which == WHICH_BEST:
            if not snapshots:
                raise ValueError("bundle has no snapshots")
            best = max(snapshots, key=lambda d: float(d @ table[0]))
            dists, used = [best], 1
        else:
            if not snapshots:
                raise ValueError("bundle has no snapshots")
            dists, used = snapshots, len(snapshots)
        stats = np.mean([table @ d for d in dists], axis=0)
        return EvalSummary(which, stats[0], stats[1], stats[2], used)

    if which == WHICH_FINAL:
        current = (
            [r.weights for r in bundle.rankers]
            if bundle.mode == MODE_PER_POSITION
            else bundle.ranker.weights
        )
        stats = _snapshot_stats(bundle, current, instances, width)
        return EvalSummary(which, *stats, 1)
    if not snapshots:
        raise ValueError("bundle has no snapshots")
    if which == WHICH_BEST:
        per_snapshot = [
            _snapshot_stats(bundle, snap, instances, width) for snap in snapshots
        ]
        best = max(range(len(snapshots)), key=lambda i: per_snapshot[i][0])
        return EvalSummary(which, *per_snapshot[best], len(snapshots))
    chosen = snapshots
    if len(snapshots) > max_snapshots:
        rng = np.random.default_rng(seed)
        keep = sorted(rng.choice(len(snapshots), size=max_snapshots, replace=False))
        chosen = [snapshots[i] for i in keep]
    per_snapshot = [_snapshot_stats(bundle, snap, instances, width) for snap in chosen]
    stats = np.mean(per_snapshot, axis=0)
    return EvalSummary(which, stats[0], stats[1], stats[2], len(chosen))


def bundle_to_dict(bundle: PolicyBundle) -> dict:
    """JSON-serializable form of a bundle: policy weights plus a trace
    summary (snapshots are an in-memory-only training artifact)."""
    doc: dict = {
        "format": BUNDLE_FORMAT,
        "mode": bundle.mode,
        "learner": bundle.learner,
        "budget": bundle.budget,
        "dimension": bundle.dimension,
        "half_budget_filter": bundle.half_budget_filter,
        "max_positions": bundle.max_positions,
        "trace": {
            "values": list(bundle.trace.values),
            "cost_losses": list(bundle.trace.cost_losses),
            "convex_losses": list(bundle.trace.convex_losses),
            "regrets": list(bundle.trace.regrets),
        },
    }
    if bundle.learner == LEARNER_RWM:
        doc["rwm"] = {
            "policy_weights": [list(map(float, p.weights)) for p in bundle.rwm.policies],
            "log_weights": list(map(float, bundle.rwm.log_weights)),
            "eta": bundle.rwm.eta,
            "loss_scale": bundle.rwm.loss_scale,
            "auto_scale": bundle.rwm.auto_scale,
        }
    elif bundle.mode == MODE_PER_POSITION:
        doc["position_weights"] = [
            list(map(float, r.weights)) for r in bundle.rankers
        ]
    else:
        doc["weights"] = list(map(float, bundle.ranker.weights))
    return doc


def bundle_from_dict(doc: dict) -> PolicyBundle:
    if doc.get("format") != BUNDLE_FORMAT:
        raise ValueError(f"unsupported model format {doc.get('format')!r}")
    trace = TrainTrace(
        values=list(doc["trace"]["values"]),
        cost_losses=list(doc["trace"]["cost_losses"]),
        convex_losses=list(doc["trace"]["convex_losses"]),
        regrets=list(doc["trace"]["regrets"]),
    )
    bundle = PolicyBundle(
        mode=doc["mode"],
        learner=doc["learner"],
        budget=doc["budget"],
        dimension=doc["dimension"],
        half_budget_filter=doc["half_budget_filter"],
        max_positions=doc["max_positions"],
        trace=trace,
    )
    if bundle.learner == LEARNER_RWM:
        rwm = doc["rwm"]
        bundle.rwm = RWMState(
            policies=tuple(
                LinearRanker(weights=np.array(w)) for w in rwm["policy_weights"]
            ),
            eta=rwm["eta"],
            log_weights=np.array(rwm["log_weights"]),
            loss_scale=rwm["loss_scale"],
            auto_scale=rwm["auto_scale"],
        )
    elif bundle.mode == MODE_PER_POSITION:
        bundle.rankers = [
            LinearRanker(weights=np.array(w)) for w in doc["position_weights"]
        ]
    else:
        bundle.ranker = LinearRanker(weights=np.array(doc["weights"]))
    return bundle


def save_bundle(bundle: PolicyBundle, path: str | Path) -> None:
    payload = json.dumps(bundle_to_dict(bundle), sort_keys=True, indent=2) + "\n"
    Path(path).write_text(payload, encoding="utf-8")


def load_bundle(path: str | Path) -> PolicyBundle:
    return bundle_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
