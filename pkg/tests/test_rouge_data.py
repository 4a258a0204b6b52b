"""Unigram-overlap scoring fixtures, cluster ingestion, and the synthetic
corpus generator (determinism and the planted rankable structure)."""

import json

import pytest

from sublist.data import (
    IngestError,
    SyntheticSpec,
    build_instance,
    byte_length,
    gen_synthetic,
    generate_clusters,
    ingest,
    parse_cluster,
    planted_ranker,
    tokenize,
)
from sublist.learners import reduce_to_ranking
from sublist.listpred import construct_with_policy, make_examples
from sublist.rewards import greedy_clairvoyant
from sublist.rouge import rouge1


def test_rouge_candidate_equals_reference():
    ref = tokenize("a small brown fox")
    scores = rouge1(ref, [ref])
    assert scores.recall == scores.precision == scores.f1 == 1.0


def test_rouge_empty_candidate_is_zero():
    scores = rouge1([], [tokenize("something here")])
    assert scores.recall == scores.precision == scores.f1 == 0.0


def test_rouge_hand_counted_example():
    scores = rouge1(tokenize("the cat"), [tokenize("the cat sat on the mat")])
    assert scores.recall == pytest.approx(2 / 6)
    assert scores.precision == pytest.approx(1.0)
    assert scores.f1 == pytest.approx(0.5)


def test_rouge_multi_reference_denominators():
    refs = [tokenize("alpha beta"), tokenize("alpha gamma delta")]
    scores = rouge1(tokenize("alpha"), refs)
    assert scores.recall == pytest.approx(2 / 5)
    assert scores.precision == pytest.approx(2 / (1 * 2))


def test_rouge_requires_references():
    with pytest.raises(ValueError):
        rouge1(["x"], [])


def test_tokenize_lowers_and_strips_punctuation():
    assert tokenize("Hello, World! 42?") == ["hello", "world", "42"]


def test_byte_length_counts_utf8_with_spaces():
    assert byte_length("Hi there.") == 9
    assert byte_length("naïve") == 6


def _cluster_doc(n_docs=2, n_sentences=3):
    return {
        "cluster_id": "c0",
        "documents": [
            {
                "doc_id": f"d{d}",
                "sentences": [
                    {
                        "sentence_id": f"s{s}",
                        "text": f"token{d} token{s} filler",
                        "byte_length": byte_length(f"token{d} token{s} filler"),
                    }
                    for s in range(n_sentences)
                ],
            }
            for d in range(n_docs)
        ],
        "references": ["token0 token1 token2 filler"],
    }


def test_parse_and_build_instance_counts():
    cluster = parse_cluster(_cluster_doc())
    ingested = build_instance(cluster, budget=50)
    assert len(ingested.instance.items) == 6
    assert ingested.locations[0] == (0, 0)
    assert ingested.locations[5] == (1, 2)
    assert ingested.instance.reward is not None


def test_parse_rejects_byte_length_mismatch():
    doc = _cluster_doc()
    doc["documents"][0]["sentences"][0]["byte_length"] = 999
    with pytest.raises(IngestError, match="byte_length"):
        parse_cluster(doc)


def test_parse_rejects_zero_length_sentence():
    doc = _cluster_doc()
    doc["documents"][0]["sentences"][0]["text"] = ""
    with pytest.raises(IngestError, match="zero length"):
        parse_cluster(doc)


def test_build_instance_requires_references():
    doc = _cluster_doc()
    doc["references"] = []
    cluster = parse_cluster(doc)
    with pytest.raises(IngestError, match="references"):
        build_instance(cluster, budget=50)
    relaxed = build_instance(cluster, budget=50, require_references=False)
    assert relaxed.instance.reward is None


def test_ingest_empty_directory_errors(tmp_path):
    with pytest.raises(IngestError, match="no cluster"):
        ingest(tmp_path)


def test_ingest_collects_errors_across_files(tmp_path):
    good = _cluster_doc()
    bad = _cluster_doc()
    bad["documents"][0]["sentences"][0]["byte_length"] = 1
    (tmp_path / "a.json").write_text(json.dumps(good))
    (tmp_path / "b.json").write_text(json.dumps(bad))
    (tmp_path / "c.json").write_text("{not json")
    with pytest.raises(IngestError) as err:
        ingest(tmp_path)
    text = str(err.value)
    assert "b.json" in text and "c.json" in text


def test_ingest_round_trip(tmp_path):
    gen_synthetic(SyntheticSpec(clusters=3, seed=0), tmp_path)
    clusters = ingest(tmp_path, budget=20)
    assert len(clusters) == 3
    for cluster in clusters:
        assert cluster.instance.reward is not None
        for item in cluster.instance.items:
            doc, sentence = cluster.sentence(item.id)
            assert item.length == sentence.byte_length


def test_generator_is_deterministic(tmp_path):
    first = tmp_path / "one"
    second = tmp_path / "two"
    gen_synthetic(SyntheticSpec(clusters=4, seed=9), first)
    gen_synthetic(SyntheticSpec(clusters=4, seed=9), second)
    for a, b in zip(sorted(first.iterdir()), sorted(second.iterdir())):
        assert a.name == b.name
        assert a.read_bytes() == b.read_bytes()


def test_generator_seed_changes_output(tmp_path):
    gen_synthetic(SyntheticSpec(clusters=1, seed=1), tmp_path / "one")
    gen_synthetic(SyntheticSpec(clusters=1, seed=2), tmp_path / "two")
    a = (tmp_path / "one" / "cluster-000.json").read_bytes()
    b = (tmp_path / "two" / "cluster-000.json").read_bytes()
    assert a != b


def test_generated_instances_fit_harness_guards():
    clusters = generate_clusters(SyntheticSpec(clusters=2, items=8, budget=8, seed=3))
    for cluster in clusters:
        ingested = build_instance(cluster, budget=8)
        assert len(ingested.instance.items) <= 8


def test_realizable_corpus_has_zero_hinge_under_planted_ranker():
    clusters = generate_clusters(SyntheticSpec(clusters=4, seed=11, realizable=True))
    ranker = planted_ranker()
    worst = 0.0
    for cluster in clusters:
        instance = build_instance(cluster, budget=20).instance
        built = construct_with_policy(ranker, instance, 20)
        for ex in make_examples(instance, built, 20):
            pairs = reduce_to_ranking(ex)
            worst = max(worst, ranker.batch_hinge(pairs))
    assert worst <= 1e-8


def test_realizable_planted_ranker_matches_greedy():
    clusters = generate_clusters(SyntheticSpec(clusters=5, seed=13, realizable=True))
    ranker = planted_ranker()
    for cluster in clusters:
        instance = build_instance(cluster, budget=20).instance
        built = construct_with_policy(ranker, instance, 20)
        greedy = greedy_clairvoyant(instance.reward, instance.items, 20)
        assert instance.reward.evaluate(built.ids) == pytest.approx(
            instance.reward.evaluate(greedy.ids)
        )
