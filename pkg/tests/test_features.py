"""tf-idf construction, the Gram-determinant diversity signal, and feature
assembly conventions."""

import math

import numpy as np
import pytest

from sublist import CoverageReward, Item, ItemList
from sublist.features import (
    FEATURE_DIM,
    QUALITY_DIM,
    TfIdfModel,
    assemble_features,
    build_feature_context,
    build_tfidf,
    gram_det_similarity,
)

from conftest import make_instance


def test_tfidf_single_document_degenerates_to_zero():
    model = build_tfidf([["alpha", "beta"]])
    assert np.all(model.idf == 0.0)
    assert np.all(model.vector(0) == 0.0)


def test_tfidf_disjoint_items_are_orthogonal():
    model = build_tfidf([["alpha", "beta"], ["gamma"]])
    assert model.inner(0, 1) == pytest.approx(0.0)
    assert model.inner(0, 0) == pytest.approx(1.0)


def test_tfidf_identical_items_have_unit_inner_product():
    model = build_tfidf([["alpha", "beta"], ["alpha", "beta"], ["gamma"]])
    assert model.inner(0, 1) == pytest.approx(1.0)


def test_tfidf_idf_values():
    model = build_tfidf([["alpha"], ["alpha", "beta"], ["beta"], ["beta"]])
    assert model.idf[model.vocabulary["alpha"]] == pytest.approx(math.log(4 / 2))
    assert model.idf[model.vocabulary["beta"]] == pytest.approx(math.log(4 / 3))


def test_tfidf_empty_corpus_rejected():
    with pytest.raises(ValueError):
        build_tfidf([])


def test_tfidf_rows_are_unit_or_zero():
    model = build_tfidf([["alpha"], ["alpha", "beta"], ["beta"], ["alpha"]])
    for item_id in range(4):
        norm = np.linalg.norm(model.vector(item_id))
        assert norm == pytest.approx(1.0, abs=1e-12) or norm == 0.0
    # an all-shared vocabulary makes idf zero, hence zero vectors
    degenerate = build_tfidf([["x"], ["x"]])
    assert np.linalg.norm(degenerate.vector(0)) == 0.0


def _model_from_rows(rows):
    rows = np.asarray(rows, dtype=np.float64)
    return TfIdfModel({}, np.zeros(rows.shape[1]), rows, list(range(len(rows))))


def _items(n):
    return [Item(id=i, length=1) for i in range(n)]


def test_gram_det_unit_vector_alone_is_one():
    model = _model_from_rows([[1.0, 0.0]])
    assert gram_det_similarity(model, ItemList(), _items(1)[0]) == 1.0


def test_gram_det_duplicate_vector_vanishes():
    model = _model_from_rows([[1.0, 0.0], [1.0, 0.0]])
    a, b = _items(2)
    assert gram_det_similarity(model, ItemList([a]), b) == pytest.approx(0.0, abs=1e-9)


def test_gram_det_orthogonal_pair_is_one():
    model = _model_from_rows([[1.0, 0.0], [0.0, 1.0]])
    a, b = _items(2)
    assert gram_det_similarity(model, ItemList([a]), b) == pytest.approx(1.0, abs=1e-9)


def test_gram_det_permutation_invariant():
    rng = np.random.default_rng(0)
    for _ in range(20):
        rows = rng.standard_normal((4, 6))
        rows /= np.linalg.norm(rows, axis=1, keepdims=True)
        model = _model_from_rows(rows)
        items = _items(4)
        base = gram_det_similarity(model, ItemList(items[:3]), items[3])
        shuffled = gram_det_similarity(
            model, ItemList([items[2], items[0], items[1]]), items[3]
        )
        assert shuffled == pytest.approx(base, abs=1e-9)


def test_gram_det_never_grows_when_list_grows():
    rng = np.random.default_rng(1)
    for _ in range(20):
        rows = rng.standard_normal((5, 8))
        rows /= np.linalg.norm(rows, axis=1, keepdims=True)
        model = _model_from_rows(rows)
        items = _items(5)
        smaller = gram_det_similarity(model, ItemList(items[:2]), items[4])
        larger = gram_det_similarity(model, ItemList(items[:3]), items[4])
        assert larger <= smaller + 1e-9


def _toy_instance():
    reward = CoverageReward(
        {"x": 1.0, "y": 1.0, "z": 1.0},
        {0: {"x"}, 1: {"y"}, 2: {"x"}},
    )
    items = [
        Item(id=0, length=3, payload=("ape", "bat")),
        Item(id=1, length=2, payload=("cow",)),
        Item(id=2, length=3, payload=("ape", "bat")),
    ]
    return make_instance(items, reward, budget=10)


def test_assemble_empty_list_convention():
    instance = _toy_instance()
    item = instance.items[0]
    feats = assemble_features(instance, ItemList(), item)
    norm_sq = float(instance.features.tfidf.vector(0) @ instance.features.tfidf.vector(0))
    assert feats.similarity[0] == pytest.approx(norm_sq, abs=1e-9)
    assert feats.similarity[1] == pytest.approx(norm_sq * item.feature_vec.mean(), abs=1e-9)
    assert feats.similarity[2] == 1.0
    assert feats.assembled.shape == (FEATURE_DIM,)
    assert np.array_equal(feats.assembled[:QUALITY_DIM], feats.quality)


def test_assemble_duplicate_candidate_signature():
    # items 0 and 2 share tokens, length, and document position, so candidate
    # 2 after picking 0 is fully redundant: zero volume, product, and distance
    from sublist.listpred import ProblemInstance

    reward = CoverageReward({"x": 1.0, "y": 1.0}, {0: {"x"}, 1: {"y"}, 2: {"x"}})
    items = [
        Item(id=0, length=3, payload=("ape", "bat")),
        Item(id=1, length=2, payload=("cow",)),
        Item(id=2, length=3, payload=("ape", "bat")),
    ]
    context = build_feature_context(items, 10, rel_positions=[0.5, 0.0, 0.5])
    instance = ProblemInstance("dup", items, reward, context)
    feats = assemble_features(instance, ItemList([instance.items[0]]), instance.items[2])
    np.testing.assert_allclose(feats.similarity, [0.0, 0.0, 0.0], atol=1e-9)


def test_assemble_is_pure_in_list_order():
    instance = _toy_instance()
    a, b, c = instance.items
    one = assemble_features(instance, ItemList([a, b]), c)
    two = assemble_features(instance, ItemList([b, a]), c)
    np.testing.assert_allclose(one.assembled, two.assembled, atol=1e-9)


def test_build_feature_context_fills_quality():
    instance = _toy_instance()
    for item in instance.items:
        assert item.feature_vec is not None
        assert item.feature_vec.shape == (QUALITY_DIM,)
        assert np.isfinite(item.feature_vec).all()
    # token count sits at the documented slot
    assert instance.items[0].feature_vec[2] == 2.0
    assert instance.items[1].feature_vec[2] == 1.0
    # length / budget
    assert instance.items[0].feature_vec[0] == pytest.approx(3 / 10)


def test_assemble_requires_context():
    class Bare:
        features = None

    with pytest.raises(ValueError):
        assemble_features(Bare(), ItemList(), Item(id=0, length=1))
