"""Command-line surface: synthetic data generation, training, prediction,
unigram-overlap evaluation, and the numerical verification report.

Exit codes: 0 success, 1 input error, 2 failed verification.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bounds, data, listpred, rewards
from .rouge import rouge1

log = logging.getLogger("sublist")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_VERIFY = 2


@dataclasses.dataclass
class RunConfig:
    """Fully resolved run settings (file values overridden by CLI flags)."""

    mode: str = listpred.MODE_SHARED
    learner: str = listpred.LEARNER_RANKER
    budget: int = 665
    iterations: int = 200
    seed: int = 0
    eta0: float = 0.5
    rwm_eta: float | None = None
    half_budget_filter: bool = False
    max_positions: int | None = None
    rwm_policies: int = 4
    reward: str = data.REWARD_ROUGE
    train_dir: str | None = None
    test_dir: str | None = None
    model_out: str | None = None
    report_out: str | None = None

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**raw)


def _train_config(run: RunConfig) -> listpred.TrainConfig:
    policies: tuple = ()
    if run.learner == listpred.LEARNER_RWM:
        policies = bounds.random_policies(run.rwm_policies, seed=run.seed)
    return listpred.TrainConfig(
        mode=run.mode,
        budget=run.budget,
        iterations=run.iterations,
        seed=run.seed,
        learner=run.learner,
        eta0=run.eta0,
        rwm_eta=run.rwm_eta,
        half_budget_filter=run.half_budget_filter,
        max_positions=run.max_positions,
        policies=policies,
    )


def _write_or_print(payload: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(payload, encoding="utf-8")
    else:
        sys.stdout.write(payload)


def _cmd_gen(args: argparse.Namespace) -> int:
    spec = data.SyntheticSpec(
        clusters=args.clusters,
        documents=args.documents,
        items=args.items,
        budget=args.budget,
        seed=args.seed,
        realizable=args.realizable,
        concepts=args.concepts,
    )
    paths = data.gen_synthetic(spec, args.out)
    log.info("wrote %d clusters to %s", len(paths), args.out)
    return EXIT_OK


def _resolve_run(args: argparse.Namespace) -> RunConfig:
    run = RunConfig.load(args.config) if args.config else RunConfig()
    overrides = {
        "mode": args.mode,
        "learner": args.learner,
        "budget": args.budget,
        "iterations": args.iters,
        "seed": args.seed,
        "eta0": args.eta0,
        "max_positions": args.positions,
        "rwm_policies": args.rwm_policies,
        "reward": args.reward,
        "train_dir": args.data,
        "model_out": args.model,
    }
    for key, value in overrides.items():
        if value is not None:
            setattr(run, key, value)
    if args.half_budget_filter:
        run.half_budget_filter = True
    return run


def _cmd_train(args: argparse.Namespace) -> int:
    run = _resolve_run(args)
    log.info("resolved config: %s", json.dumps(dataclasses.asdict(run), sort_keys=True))
    if not run.train_dir:
        log.error("no training directory given (--data or config train_dir)")
        return EXIT_INPUT
    if not run.model_out:
        log.error("no model output path given (--model or config model_out)")
        return EXIT_INPUT
    clusters = data.ingest(run.train_dir, run.budget, reward_kind=run.reward)
    cfg = _train_config(run)
    bundle = listpred.train([c.instance for c in clusters], cfg)
    listpred.save_bundle(bundle, run.model_out)
    log.info(
        "trained %s/%s on %d clusters for %d rounds -> %s",
        run.mode,
        run.learner,
        len(clusters),
        run.iterations,
        run.model_out,
    )
    if run.test_dir and run.report_out:
        _evaluate_model(bundle, run.test_dir, run.budget, run.seed, run.report_out)
    return EXIT_OK


def _predict_cluster(
    bundle: listpred.PolicyBundle,
    cluster: data.IngestedCluster,
    budget: int,
    seed: int,
) -> dict:
    rng = np.random.default_rng(seed)
    built = listpred.construct_list(bundle, cluster.instance, budget, rng=rng)
    ordered = sorted(built.ids, key=lambda item_id: cluster.locations[item_id])
    selected = []
    for item_id in ordered:
        doc, sentence = cluster.sentence(item_id)
        selected.append(
            {
                "doc_id": doc.doc_id,
                "sentence_id": sentence.sentence_id,
                "item_id": item_id,
                "text": sentence.text,
            }
        )
    return {
        "cluster_id": cluster.cluster.cluster_id,
        "selected": selected,
        "total_bytes": built.total_length,
    }


def _cmd_predict(args: argparse.Namespace) -> int:
    bundle = listpred.load_bundle(args.model)
    budget = args.budget if args.budget is not None else bundle.budget
    clusters = data.ingest(args.data, budget, require_references=False)
    doc = {
        "budget": budget,
        "clusters": [
            _predict_cluster(bundle, cluster, budget, args.seed)
            for cluster in clusters
        ],
    }
    _write_or_print(json.dumps(doc, sort_keys=True, indent=2) + "\n", args.out)
    return EXIT_OK


def _evaluate_model(
    bundle: listpred.PolicyBundle,
    data_dir: str,
    budget: int,
    seed: int,
    out_prefix: str | None,
) -> int:
    """Score the model (plus greedy and, size permitting, the exhaustive
    oracle) on a cluster directory; write TSV/JSON or print the TSV."""
    clusters = data.ingest(data_dir, budget)
    systems: dict[str, list] = {"model": [], "greedy": []}
    include_brute = all(
        len(c.instance.items) <= rewards.BRUTE_FORCE_MAX_ITEMS for c in clusters
    )
    if include_brute:
        systems["brute_force"] = []
    rng = np.random.default_rng(seed)
    for cluster in clusters:
        instance = cluster.instance
        references = [data.tokenize(ref) for ref in cluster.cluster.references]
        lists = {
            "model": listpred.construct_list(bundle, instance, budget, rng=rng),
            "greedy": rewards.greedy_clairvoyant(instance.reward, instance.items, budget),
        }
        if include_brute:
            lists["brute_force"], _ = rewards.brute_force_optimal(
                instance.reward, instance.items, budget
            )
        for system, built in lists.items():
            tokens = [tok for item in built.items for tok in item.payload]
            scores = rouge1(tokens, references)
            systems[system].append((scores, built.total_length))
    rows = []
    for system, outcomes in systems.items():
        rows.append(
            {
                "system": system,
                "rouge1f": float(np.mean([s.f1 for s, _ in outcomes])),
                "rouge1p": float(np.mean([s.precision for s, _ in outcomes])),
                "rouge1r": float(np.mean([s.recall for s, _ in outcomes])),
                "mean_bytes": float(np.mean([b for _, b in outcomes])),
            }
        )
    tsv_lines = ["system\trouge1f\trouge1p\trouge1r\tmean_bytes"]
    for row in rows:
        tsv_lines.append(
            f"{row['system']}\t{row['rouge1f']:.6f}\t{row['rouge1p']:.6f}"
            f"\t{row['rouge1r']:.6f}\t{row['mean_bytes']:.6f}"
        )
    tsv = "\n".join(tsv_lines) + "\n"
    report = {"budget": budget, "clusters": len(clusters), "systems": rows}
    if out_prefix:
        prefix = Path(out_prefix)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        prefix.with_suffix(".tsv").write_text(tsv, encoding="utf-8")
        prefix.with_suffix(".json").write_text(
            json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        log.info("wrote %s and %s", prefix.with_suffix(".tsv"), prefix.with_suffix(".json"))
    else:
        sys.stdout.write(tsv)
    return EXIT_OK


def _cmd_eval(args: argparse.Namespace) -> int:
    bundle = listpred.load_bundle(args.model)
    budget = args.budget if args.budget is not None else bundle.budget
    return _evaluate_model(bundle, args.data, budget, args.seed, args.out_prefix)


def _bound_suite_check(name, bound_fn, trials, seed) -> dict:
    """Run one inequality over random coverage instances; report the worst case."""
    rng = np.random.default_rng(seed)
    worst: bounds.BoundReport | None = None
    violations = 0
    for _ in range(trials):
        reward, items = bounds.random_coverage_items(
            rng, n_items=int(rng.integers(4, 13))
        )
        built, reference = bounds.sample_bound_lists(
            rng, items, cap_built_lengths=True
        )
        report = bound_fn(reward, built, reference)
        violations += not report.holds
        if worst is None or report.slack < worst.slack:
            worst = report
    return {
        "check": name,
        "trials": trials,
        "violations": violations,
        "lhs": worst.lhs,
        "rhs": worst.rhs,
        "slack": worst.slack,
        "holds": violations == 0,
    }


def _stochastic_agreement_check(lists: int, samples: int, seed: int) -> dict:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(lists):
        reward, items = bounds.random_coverage_items(rng, n_items=5)
        spec = bounds.StochasticListSpec(rewards.ItemList(items))
        exact = bounds.stochastic_list_value(spec, reward, method="exact")
        sampled = bounds.stochastic_list_value(
            spec,
            reward,
            method="monte_carlo",
            samples=samples,
            seed=int(rng.integers(2**31)),
        )
        worst = max(worst, abs(exact - sampled))
    return {
        "check": "stochastic_value_agreement",
        "lhs": 0.01,
        "rhs": worst,
        "slack": 0.01 - worst,
        "holds": worst <= 0.01,
    }


def _mixture_check(reps: int, iterations: int, seed: int) -> dict:
    instances = bounds.synthetic_policy_instances(8, budget=6, seed=seed)
    cfg = listpred.TrainConfig(
        mode=listpred.MODE_SHARED,
        budget=6,
        iterations=iterations,
        seed=seed,
        learner=listpred.LEARNER_RWM,
        policies=bounds.random_policies(4, seed=seed),
    )
    report = bounds.check_mixture_guarantee(
        cfg, instances, delta=0.1, repetitions=reps
    )
    return {
        "check": "mixture_guarantee",
        "repetitions": report.repetitions,
        "frequency": report.frequency,
        "holds": report.passed,
    }


def _cmd_verify(args: argparse.Namespace) -> int:
    checks = [
        _bound_suite_check("mean_gain", bounds.mean_gain_bound, args.trials, args.seed),
        _bound_suite_check(
            "stochastic_gain", bounds.stochastic_gain_bound, args.trials, args.seed + 1
        ),
        _bound_suite_check(
            "competitive_ratio",
            bounds.competitive_ratio_bound,
            args.trials,
            args.seed + 2,
        ),
        _stochastic_agreement_check(args.lists, args.samples, args.seed + 3),
        _mixture_check(args.reps, args.iters, args.seed + 4),
    ]
    passed = all(c["holds"] for c in checks)
    payload = json.dumps(
        {"passed": passed, "checks": checks}, sort_keys=True, indent=2
    ) + "\n"
    _write_or_print(payload, args.out)
    for check in checks:
        log.info("%-28s %s", check["check"], "ok" if check["holds"] else "FAILED")
    return EXIT_OK if passed else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sublist",
        description=(
            "Budgeted submodular list prediction: generate data, train, "
            "predict, evaluate, and verify the numerical guarantees."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="write a synthetic cluster corpus")
    gen.add_argument("--out", required=True)
    gen.add_argument("--clusters", type=int, default=20)
    gen.add_argument("--documents", type=int, default=2)
    gen.add_argument("--items", type=int, default=16)
    gen.add_argument("--budget", type=int, default=20)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--concepts", type=int, default=12)
    gen.add_argument("--realizable", action="store_true")
    gen.set_defaults(func=_cmd_gen)

    tr = sub.add_parser("train", help="train a selection policy on clusters")
    tr.add_argument("--data", help="directory of cluster JSON files")
    tr.add_argument("--model", help="output model path")
    tr.add_argument("--config", help="JSON run-config file")
    tr.add_argument("--mode", choices=[listpred.MODE_SHARED, listpred.MODE_PER_POSITION])
    tr.add_argument("--learner", choices=[listpred.LEARNER_RANKER, listpred.LEARNER_RWM])
    tr.add_argument("--budget", type=int)
    tr.add_argument("--iters", type=int)
    tr.add_argument("--seed", type=int)
    tr.add_argument("--eta0", type=float)
    tr.add_argument("--positions", type=int, help="per-position mode: ranker count")
    tr.add_argument("--rwm-policies", type=int, dest="rwm_policies")
    tr.add_argument("--reward", choices=[data.REWARD_ROUGE, data.REWARD_COVERAGE])
    tr.add_argument("--half-budget-filter", action="store_true", dest="half_budget_filter")
    tr.set_defaults(func=_cmd_train)

    pr = sub.add_parser("predict", help="select sentences with a trained model")
    pr.add_argument("--model", required=True)
    pr.add_argument("--data", required=True)
    pr.add_argument("--budget", type=int)
    pr.add_argument("--seed", type=int, default=0)
    pr.add_argument("--out")
    pr.set_defaults(func=_cmd_predict)

    ev = sub.add_parser("eval", help="score a model (and oracles) with unigram overlap")
    ev.add_argument("--model", required=True)
    ev.add_argument("--data", required=True)
    ev.add_argument("--budget", type=int)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--out-prefix", dest="out_prefix")
    ev.set_defaults(func=_cmd_eval)

    ve = sub.add_parser("verify", help="run the numerical guarantee checks")
    ve.add_argument("--trials", type=int, default=300)
    ve.add_argument("--lists", type=int, default=10)
    ve.add_argument("--samples", type=int, default=50000)
    ve.add_argument("--reps", type=int, default=5)
    ve.add_argument("--iters", type=int, default=200)
    ve.add_argument("--seed", type=int, default=0)
    ve.add_argument("--out")
    ve.set_defaults(func=_cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (data.IngestError, FileNotFoundError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
