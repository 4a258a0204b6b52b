"""Acceptance suite: one test per release criterion, each printing a
PASS line with its measured numbers and wall time.

Run with ``pytest tests/test_acceptance.py -v -s`` to see every line.
"""

import json
import time

import numpy as np
import pytest

from sublist import bounds, data, listpred
from sublist.cli import EXIT_OK, main
from sublist.learners import RWMState, hedge_eta, hedge_regret_bound
from sublist.listpred import TrainConfig, evaluate_policy, train
from sublist.rewards import ItemList, greedy_clairvoyant
from sublist.rouge import rouge1
from sublist import _kernels


def _report(name, detail, started, limit):
    elapsed = time.time() - started
    print(f"ACCEPTANCE PASS {name}: {detail} [{elapsed:.1f}s]")
    assert elapsed <= limit, f"{name} exceeded its {limit}s runtime budget"


def test_criterion_1_gain_inequality_suite():
    """All three list inequalities hold on 1000 random coverage instances."""
    started = time.time()
    rng = np.random.default_rng(2024)
    trials = 1000
    worst = np.inf
    for _ in range(trials):
        reward, items = bounds.random_coverage_items(
            rng, n_items=int(rng.integers(2, 13)), max_length=4
        )
        # the competitive bound's discount factors need every built length
        # to stay within the reference size, hence the cap
        built, reference = bounds.sample_bound_lists(
            rng, items, max_size=8, cap_built_lengths=True
        )
        for check in (
            bounds.mean_gain_bound,
            bounds.stochastic_gain_bound,
            bounds.competitive_ratio_bound,
        ):
            report = check(reward, built, reference)
            worst = min(worst, report.slack)
            assert report.slack >= -1e-9, (check.__name__, report)
            assert report.holds
    _report(
        "criterion-1",
        f"mean/stochastic/competitive bounds held on {trials} instances "
        f"(worst slack {worst:.3e} >= -1e-9)",
        started,
        limit=120,
    )


def test_criterion_2_stochastic_value_oracle_agreement():
    """Exact thinned-list expectations match Monte Carlo within 0.01."""
    started = time.time()
    rng = np.random.default_rng(77)
    worst = 0.0
    for trial in range(20):
        reward, items = bounds.random_coverage_items(rng, n_items=5, max_length=4)
        spec = bounds.StochasticListSpec(ItemList(items))
        exact = bounds.stochastic_list_value(spec, reward, method="exact")
        sampled = bounds.stochastic_list_value(
            spec, reward, method="monte_carlo", samples=100_000, seed=trial
        )
        worst = max(worst, abs(exact - sampled))
        assert abs(exact - sampled) <= 0.01
    _report(
        "criterion-2",
        f"exact vs monte-carlo (n=1e5) on 20 five-item lists, "
        f"max |diff| {worst:.4f} <= 0.01",
        started,
        limit=60,
    )


def test_criterion_3_mixture_guarantee_frequency():
    """The high-probability mixture bound holds in >= 45 of 50 runs."""
    started = time.time()
    instances = bounds.synthetic_policy_instances(
        10, budget=6, n_items=8, seed=30
    )
    cfg = TrainConfig(
        mode="scp",
        budget=6,
        iterations=500,
        seed=100,
        learner="rwm",
        policies=bounds.random_policies(4, seed=31),
    )
    report = bounds.check_mixture_guarantee(
        cfg, instances, delta=0.1, repetitions=50
    )
    held = sum(o.holds for o in report.outcomes)
    assert held >= 45, report
    assert report.passed
    _report(
        "criterion-3",
        f"mixture guarantee held in {held}/50 runs "
        f"(optimum {report.optimal_value:.3f}, deviation {report.deviation:.3f})",
        started,
        limit=600,
    )


def test_criterion_4_regret_and_subgradients():
    """Weighted-majority regret stays under the bound; hinge subgradients
    match finite differences."""
    started = time.time()
    n_policies = 8
    for horizon in (100, 1000, 10_000):
        eta = hedge_eta(n_policies, horizon)
        cap = hedge_regret_bound(n_policies, horizon) + 2.0
        rng = np.random.default_rng(horizon)
        random_state = RWMState.uniform(list(range(n_policies)), eta=eta)
        for _ in range(horizon):
            random_state.update(rng.random(n_policies))
        assert random_state.regret() <= cap
        adversary = RWMState.uniform(list(range(n_policies)), eta=eta)
        for _ in range(horizon):
            row = np.zeros(n_policies)
            row[int(np.argmax(adversary.distribution()))] = 1.0
            adversary.update(row)
        assert adversary.regret() <= cap

    rng = np.random.default_rng(8)
    checked = 0
    worst_rel = 0.0
    while checked < 100:
        diffs = rng.standard_normal((10, 6))
        weights = rng.uniform(0.1, 2.0, 10)
        h = rng.standard_normal(6)
        if np.min(np.abs(1.0 - diffs @ h)) < 1e-3:
            continue
        direction = rng.standard_normal(6)
        direction /= np.linalg.norm(direction)
        eps = 1e-5
        plus, _ = _kernels.pairwise_hinge(diffs, weights, h + eps * direction)
        minus, _ = _kernels.pairwise_hinge(diffs, weights, h - eps * direction)
        _, grad = _kernels.pairwise_hinge(diffs, weights, h)
        numeric = (plus - minus) / (2 * eps)
        analytic = float(grad @ direction)
        rel = abs(numeric - analytic) / max(abs(analytic), 1e-12)
        worst_rel = max(worst_rel, rel)
        assert numeric == pytest.approx(analytic, rel=1e-5, abs=1e-7)
        checked += 1
    _report(
        "criterion-4",
        f"regret bound held for T in (1e2, 1e3, 1e4); subgradients matched "
        f"finite differences on 100 draws (worst rel err {worst_rel:.2e})",
        started,
        limit=300,
    )


def test_criterion_5_realizable_imitation(tmp_path):
    """Both training modes reach 95% of clairvoyant greedy on held-out
    realizable states."""
    started = time.time()
    train_dir = tmp_path / "train"
    test_dir = tmp_path / "test"
    data.gen_synthetic(
        data.SyntheticSpec(clusters=20, seed=500, realizable=True), train_dir
    )
    data.gen_synthetic(
        data.SyntheticSpec(clusters=50, seed=501, realizable=True), test_dir
    )
    budget = 20
    train_instances = [c.instance for c in data.ingest(train_dir, budget)]
    heldout = [c.instance for c in data.ingest(test_dir, budget)]
    greedy_mean = float(
        np.mean(
            [
                inst.reward.evaluate(
                    greedy_clairvoyant(inst.reward, inst.items, budget).ids
                )
                for inst in heldout
            ]
        )
    )
    ratios = {}
    for mode, extra in (
        ("scp", {}),
        ("conseqopt", {"max_positions": 10}),
    ):
        cfg = TrainConfig(
            mode=mode, budget=budget, iterations=500, seed=42, **extra
        )
        bundle = train(train_instances, cfg)
        summary = evaluate_policy(bundle, heldout, "final")
        ratios[mode] = summary.mean_value / greedy_mean
        assert summary.mean_value >= 0.95 * greedy_mean, (mode, summary, greedy_mean)
    _report(
        "criterion-5",
        f"held-out value vs greedy: scp {ratios['scp']:.3f}, "
        f"conseqopt {ratios['conseqopt']:.3f} (both >= 0.95)",
        started,
        limit=300,
    )


def test_criterion_6_example_arithmetic():
    """The position-weight formula spot check and cost-vector invariants
    over a full recorded training run."""
    started = time.time()
    from sublist.rewards import Item

    lst = ItemList([Item(id=0, length=2), Item(id=1, length=3)])
    w1 = listpred.position_weight(lst, 0, 10)
    w2 = listpred.position_weight(lst, 1, 10)
    assert w1 == pytest.approx(1.4)
    assert w2 == pytest.approx(3.0)

    instances = bounds.synthetic_policy_instances(6, budget=6, seed=61)
    cfg = TrainConfig(mode="scp", budget=6, iterations=120, seed=62)
    bundle = train(instances, cfg, record_examples=True)
    n_examples = 0
    for examples in bundle.trace.examples:
        for ex in examples:
            costs = np.array(list(ex.costs.values()))
            assert costs.min() == 0.0
            assert (costs >= 0.0).all()
            n_examples += 1
    _report(
        "criterion-6",
        f"weight spot check (1.4, 3.0) and {n_examples} cost vectors with "
        "min 0 and no negatives",
        started,
        limit=120,
    )


def test_criterion_7_rouge_fixtures():
    """Hand-computed unigram-overlap fixtures match exactly."""
    started = time.time()
    ref = data.tokenize("the cat sat on the mat")
    scores = rouge1(data.tokenize("the cat"), [ref])
    assert scores.recall == pytest.approx(2 / 6, abs=0)
    assert scores.precision == 1.0
    assert scores.f1 == pytest.approx(0.5, abs=0)

    identical = rouge1(ref, [ref])
    assert identical.recall == 1.0
    assert identical.precision == 1.0
    assert identical.f1 == 1.0

    empty = rouge1([], [ref])
    assert empty.recall == empty.precision == empty.f1 == 0.0

    multi = rouge1(
        data.tokenize("alpha"), [data.tokenize("alpha beta"), data.tokenize("alpha gamma delta")]
    )
    assert multi.recall == pytest.approx(2 / 5, abs=0)
    assert multi.precision == pytest.approx(1.0, abs=0)
    _report(
        "criterion-7",
        "2/6-recall fixture, identical-summary 1.0s, empty candidate, and "
        "multi-reference denominators all exact",
        started,
        limit=60,
    )


def test_criterion_8_pipeline_determinism(tmp_path):
    """Running gen -> train -> predict -> eval twice with one seed yields
    byte-identical model and report files."""
    started = time.time()
    artifacts = []
    for run in ("first", "second"):
        base = tmp_path / run
        data_dir = base / "data"
        assert (
            main(
                [
                    "gen",
                    "--out",
                    str(data_dir),
                    "--clusters",
                    "5",
                    "--seed",
                    "9",
                    "--realizable",
                ]
            )
            == EXIT_OK
        )
        model = base / "model.json"
        assert (
            main(
                [
                    "train",
                    "--data",
                    str(data_dir),
                    "--model",
                    str(model),
                    "--budget",
                    "20",
                    "--iters",
                    "60",
                    "--seed",
                    "5",
                ]
            )
            == EXIT_OK
        )
        pred = base / "pred.json"
        assert (
            main(
                [
                    "predict",
                    "--model",
                    str(model),
                    "--data",
                    str(data_dir),
                    "--out",
                    str(pred),
                ]
            )
            == EXIT_OK
        )
        prefix = base / "report"
        assert (
            main(
                [
                    "eval",
                    "--model",
                    str(model),
                    "--data",
                    str(data_dir),
                    "--out-prefix",
                    str(prefix),
                ]
            )
            == EXIT_OK
        )
        artifacts.append(
            {
                "model": model.read_bytes(),
                "pred": pred.read_bytes(),
                "tsv": prefix.with_suffix(".tsv").read_bytes(),
                "json": prefix.with_suffix(".json").read_bytes(),
            }
        )
    assert artifacts[0] == artifacts[1]
    _report(
        "criterion-8",
        "model, prediction, and both report files byte-identical across reruns",
        started,
        limit=300,
    )
