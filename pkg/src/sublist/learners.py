"""Online learners fed by the list-construction loop: a pairwise ranking
reduction trained with online gradient descent on a weighted hinge loss, and
randomized weighted majority over a finite policy class."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import _kernels

COST_TOLERANCE = 1e-9


@dataclass
class CostSensitiveExample:
    """Per-position training signal: every candidate's features, its cost
    (benefit shortfall against the best candidate, so the minimum is 0), and
    the position's importance weight."""

    candidate_features: dict[int, np.ndarray]
    costs: dict[int, float]
    weight: float
    position: int

    def __post_init__(self) -> None:
        if set(self.candidate_features) != set(self.costs):
            raise ValueError("features and costs cover different candidates")
        if not self.costs:
            raise ValueError("example has no candidates")
        values = np.array(list(self.costs.values()))
        if not np.isfinite(values).all():
            raise ValueError("costs must be finite")
        if values.min() < -COST_TOLERANCE:
            raise ValueError(f"costs must be nonnegative, got {values.min()!r}")
        if values.min() > COST_TOLERANCE:
            raise ValueError(
                f"the best candidate must have cost 0, got minimum {values.min()!r}"
            )
        if not math.isfinite(self.weight) or self.weight < 0:
            raise ValueError(f"weight must be finite and >= 0, got {self.weight}")

    @property
    def candidate_ids(self) -> tuple[int, ...]:
        return tuple(sorted(self.costs))


@dataclass
class RankingPair:
    """One weighted ordering constraint: the better (lower-cost) candidate
    should outscore the worse one by a margin."""

    better_features: np.ndarray
    worse_features: np.ndarray
    pair_weight: float

    def __post_init__(self) -> None:
        if self.pair_weight <= 0:
            raise ValueError("pair weight must be positive")


def reduce_to_ranking(example: CostSensitiveExample) -> list[RankingPair]:
    """Expand a cost-sensitive example into weighted pairwise constraints.

    One pair per unordered candidate pair with distinct costs, weighted by
    example_weight * |cost difference|; equal-cost and zero-weight pairs
    carry no signal and are dropped.  At most n(n-1)/2 pairs come out.
    """
    ids = example.candidate_ids
    pairs: list[RankingPair] = []
    for a in range(len(ids)):
        for b in range(a + 1, len(ids)):
            first, second = ids[a], ids[b]
            diff = example.costs[first] - example.costs[second]
            if diff == 0:
                continue
            weight = example.weight * abs(diff)
            if weight <= 0:
                continue
            better, worse = (first, second) if diff < 0 else (second, first)
            pairs.append(
                RankingPair(
                    better_features=example.candidate_features[better],
                    worse_features=example.candidate_features[worse],
                    pair_weight=weight,
                )
            )
    return pairs


def _pair_arrays(
    pairs: Sequence[RankingPair], dimension: int
) -> tuple[np.ndarray, np.ndarray]:
    diffs = np.zeros((len(pairs), dimension))
    weights = np.zeros(len(pairs))
    for row, pair in enumerate(pairs):
        if pair.better_features.shape != (dimension,) or pair.worse_features.shape != (
            dimension,
        ):
            raise ValueError(
                f"pair features must have dimension {dimension}, got "
                f"{pair.better_features.shape} / {pair.worse_features.shape}"
            )
        diffs[row] = pair.better_features - pair.worse_features
        weights[row] = pair.pair_weight
    return diffs, weights


@dataclass
class LinearRanker:
    """Linear scorer trained online on ranking pairs.

    Each update takes one subgradient step on the batch's total weighted
    hinge loss, with step size eta0 / sqrt(update_count).
    """

    weights: np.ndarray
    eta0: float = 0.5
    update_count: int = 0

    @classmethod
    def zeros(cls, dimension: int, eta0: float = 0.5) -> "LinearRanker":
        return cls(weights=np.zeros(dimension), eta0=eta0)

    @property
    def dimension(self) -> int:
        return self.weights.shape[0]

    def clone(self) -> "LinearRanker":
        return LinearRanker(self.weights.copy(), self.eta0, self.update_count)

    def hinge_loss(self, pair: RankingPair) -> float:
        """pair_weight * max(0, 1 - w @ (better - worse))."""
        diffs, weights = _pair_arrays([pair], self.dimension)
        loss, _ = _kernels.pairwise_hinge(diffs, weights, self.weights)
        return float(loss)

    def batch_hinge(self, pairs: Sequence[RankingPair]) -> float:
        if not pairs:
            return 0.0
        diffs, weights = _pair_arrays(pairs, self.dimension)
        loss, _ = _kernels.pairwise_hinge(diffs, weights, self.weights)
        return float(loss)

    def update(self, pairs: Sequence[RankingPair]) -> "LinearRanker":
        """One subgradient step over the batch; empty batches still advance
        the step-size clock."""
        self.update_count += 1
        if pairs:
            diffs, weights = _pair_arrays(pairs, self.dimension)
            _, grad = _kernels.pairwise_hinge(diffs, weights, self.weights)
            if not np.isfinite(grad).all():
                raise RuntimeError("non-finite ranking subgradient; aborting run")
            step = self.eta0 / math.sqrt(self.update_count)
            self.weights = self.weights - step * grad
            if not np.isfinite(self.weights).all():
                raise RuntimeError("ranker weights left the finite range")
        return self

    def pick(
        self, features: Mapping[int, np.ndarray], feasible: Iterable[int]
    ) -> int:
        """Highest-scoring feasible candidate; ties go to the lowest id."""
        ids = sorted(feasible)
        if not ids:
            raise ValueError("no feasible candidates to pick from")
        scores = np.array([float(self.weights @ features[i]) for i in ids])
        return ids[int(np.argmax(scores))]


def rwm_policy_loss(policy, example: CostSensitiveExample) -> float:
    """Weighted cost the policy incurs on one example: its pick's cost."""
    pick = policy.pick(example.candidate_features, example.candidate_ids)
    if pick not in example.costs:
        raise KeyError(f"policy picked unknown candidate {pick}")
    return example.weight * example.costs[pick]


@dataclass
class RWMState:
    """Randomized weighted majority over a finite policy class.

    Updates are multiplicative in a loss scale M (losses must lie in
    [0, M]); with ``auto_scale`` the scale tracks the running maximum, which
    keeps unbounded weighted costs usable at the price of the fixed-scale
    regret guarantee.  The regret counter compares the expected (not
    sampled) loss against the best fixed policy in hindsight.
    """

    policies: tuple
    eta: float
    log_weights: np.ndarray
    loss_scale: float = 1.0
    auto_scale: bool = False
    cumulative_policy_losses: np.ndarray = field(default=None)  # type: ignore[assignment]
    cumulative_expected_loss: float = 0.0
    rounds: int = 0

    def __post_init__(self) -> None:
        if len(self.policies) == 0:
            raise ValueError("policy class must be nonempty")
        if self.eta < 0:
            raise ValueError("eta must be >= 0")
        if self.cumulative_policy_losses is None:
            self.cumulative_policy_losses = np.zeros(len(self.policies))

    @classmethod
    def uniform(
        cls,
        policies: Sequence,
        eta: float,
        *,
        loss_scale: float | None = None,
        auto_scale: bool = False,
    ) -> "RWMState":
        """Uniform initial distribution; the scale defaults to 1 when fixed
        and to 0 (grow from the first observed loss) when auto-tracked."""
        if loss_scale is None:
            loss_scale = 0.0 if auto_scale else 1.0
        return cls(
            policies=tuple(policies),
            eta=eta,
            log_weights=np.zeros(len(policies)),
            loss_scale=loss_scale,
            auto_scale=auto_scale,
        )

    def distribution(self) -> np.ndarray:
        shifted = self.log_weights - self.log_weights.max()
        weights = np.exp(shifted)
        return weights / weights.sum()

    def sample_index(self, rng: np.random.Generator) -> int:
        dist = self.distribution()
        return int(rng.choice(len(self.policies), p=dist / dist.sum()))

    def update(self, losses: Sequence[float]) -> "RWMState":
        losses = np.asarray(losses, dtype=np.float64)
        if losses.shape != (len(self.policies),):
            raise ValueError(
                f"expected {len(self.policies)} losses, got shape {losses.shape}"
            )
        if not np.isfinite(losses).all():
            raise ValueError("losses must be finite")
        if (losses < 0).any():
            raise ValueError("losses must be nonnegative")
        if self.auto_scale:
            self.loss_scale = max(self.loss_scale, float(losses.max()))
        elif losses.max() > self.loss_scale * (1 + 1e-12):
            raise ValueError(
                f"loss {losses.max()} exceeds the fixed scale {self.loss_scale}"
            )
        dist = self.distribution()
        self.cumulative_expected_loss += float(dist @ losses)
        self.cumulative_policy_losses = self.cumulative_policy_losses + losses
        if self.loss_scale > 0:
            self.log_weights = self.log_weights - self.eta * losses / self.loss_scale
            shifted = self.log_weights - self.log_weights.max()
            self.log_weights = shifted - math.log(float(np.exp(shifted).sum()))
        self.rounds += 1
        return self

    def regret(self) -> float:
        """Expected cumulative loss minus the best fixed policy's loss."""
        return self.cumulative_expected_loss - float(
            self.cumulative_policy_losses.min()
        )


def hedge_eta(n_policies: int, horizon: int) -> float:
    """Learning rate sqrt(8 ln |class| / T) for losses scaled into [0, 1]."""
    if n_policies < 1 or horizon < 1:
        raise ValueError("need at least one policy and one round")
    return math.sqrt(8.0 * math.log(n_policies) / horizon)


def hedge_regret_bound(n_policies: int, horizon: int) -> float:
    """Worst-case expected regret sqrt(T ln |class| / 2) at the hedge_eta rate."""
    return math.sqrt(horizon * math.log(n_policies) / 2.0)
