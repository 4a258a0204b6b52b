"""Candidate featurization: tf-idf vectors, Gram-determinant diversity, and
the per-sentence quality block consumed by the rankers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .rewards import Item, ItemList

QUALITY_DIM = 6
SIMILARITY_DIM = 3
FEATURE_DIM = QUALITY_DIM + SIMILARITY_DIM
GRAM_JITTER = 1e-12

# indices into the assembled vector, in order:
#   quality: length/budget, position, token count, numeral fraction,
#            mean idf, cosine to centroid
#   similarity: gram det, gram det * mean quality, min L1 quality distance
TOKEN_COUNT_INDEX = 2
GRAM_DET_INDEX = QUALITY_DIM


class TfIdfModel:
    """Immutable tf-idf vectors for one item collection, L2-normalized per
    item (items with no in-vocabulary tokens keep the zero vector)."""

    def __init__(
        self,
        vocabulary: dict[str, int],
        idf: np.ndarray,
        matrix: np.ndarray,
        ids: Sequence[int],
    ):
        self.vocabulary = vocabulary
        self.idf = idf
        self._matrix = matrix
        self._row = {item_id: row for row, item_id in enumerate(ids)}
        self._centroid = matrix.mean(axis=0) if len(ids) else np.zeros(0)

    @property
    def n_items(self) -> int:
        return self._matrix.shape[0]

    def vector(self, item_id: int) -> np.ndarray:
        try:
            return self._matrix[self._row[item_id]]
        except KeyError as exc:
            raise KeyError(f"item id {item_id} not in tf-idf model") from exc

    def inner(self, first_id: int, second_id: int) -> float:
        return float(self.vector(first_id) @ self.vector(second_id))

    def centroid(self) -> np.ndarray:
        return self._centroid

    def mean_idf(self, tokens: Sequence[str]) -> float:
        if not tokens:
            return 0.0
        values = [
            self.idf[self.vocabulary[t]] if t in self.vocabulary else 0.0
            for t in tokens
        ]
        return float(np.mean(values))


def build_tfidf(
    corpus: Sequence[Sequence[str]], ids: Sequence[int] | None = None
) -> TfIdfModel:
    """tf-idf over one collection: idf(t) = ln(N / df(t)), rows L2-normalized.

    ``ids`` assigns an item id to each corpus entry (defaults to positions).
    """
    if not corpus:
        raise ValueError("corpus must be nonempty")
    if ids is None:
        ids = list(range(len(corpus)))
    if len(ids) != len(corpus):
        raise ValueError("ids and corpus lengths differ")
    n_docs = len(corpus)
    vocab = sorted({tok for doc in corpus for tok in doc})
    col = {tok: j for j, tok in enumerate(vocab)}
    df = np.zeros(len(vocab))
    for doc in corpus:
        for tok in set(doc):
            df[col[tok]] += 1
    idf = np.log(n_docs / df) if len(vocab) else np.zeros(0)
    matrix = np.zeros((n_docs, len(vocab)))
    for row, doc in enumerate(corpus):
        for tok in doc:
            matrix[row, col[tok]] += 1
        matrix[row] *= idf
        norm = np.linalg.norm(matrix[row])
        if norm > 0:
            matrix[row] /= norm
    return TfIdfModel(col, idf, matrix, ids)


def gram_det_similarity(model: TfIdfModel, lst: ItemList, item: Item) -> float:
    """Squared volume spanned by the tf-idf vectors of the list plus the
    candidate: det of their Gram matrix, clamped into [0, 1].

    Computed via Cholesky with a small diagonal jitter; a factorization
    failure means the vectors are linearly dependent, i.e. zero volume.
    """
    rows = [model.vector(member.id) for member in lst.items]
    rows.append(model.vector(item.id))
    stacked = np.stack(rows)
    gram = stacked @ stacked.T
    gram[np.diag_indices_from(gram)] += GRAM_JITTER
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError:
        return 0.0
    det = float(np.prod(np.diag(chol)) ** 2)
    return min(max(det, 0.0), 1.0)


def quality_vector(
    item: Item,
    rel_position: float,
    budget: int,
    model: TfIdfModel,
) -> np.ndarray:
    """Static per-sentence quality block (independent of the partial list)."""
    tokens = item.payload
    n_tokens = len(tokens)
    numeral_fraction = (
        sum(1 for t in tokens if t.isdigit()) / n_tokens if n_tokens else 0.0
    )
    vec = model.vector(item.id)
    centroid = model.centroid()
    centroid_norm = np.linalg.norm(centroid)
    vec_norm = np.linalg.norm(vec)
    cosine = (
        float(vec @ centroid / (vec_norm * centroid_norm))
        if vec_norm > 0 and centroid_norm > 0
        else 0.0
    )
    return np.array(
        [
            item.length / budget,
            rel_position,
            float(n_tokens),
            numeral_fraction,
            model.mean_idf(tokens),
            cosine,
        ]
    )


@dataclass
class CandidateFeatures:
    """Feature vector of one candidate in the context of a partial list."""

    quality: np.ndarray
    similarity: np.ndarray
    assembled: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        if self.quality.shape != (QUALITY_DIM,):
            raise ValueError(f"quality block must have length {QUALITY_DIM}")
        if self.similarity.shape != (SIMILARITY_DIM,):
            raise ValueError(f"similarity block must have length {SIMILARITY_DIM}")
        self.assembled = np.concatenate([self.quality, self.similarity])
        if not np.isfinite(self.assembled).all():
            raise ValueError("features must be finite")


@dataclass
class FeatureContext:
    """Per-instance featurization state shared by all candidates."""

    tfidf: TfIdfModel
    empty_list_distance: float = 1.0


def build_feature_context(
    items: Sequence[Item],
    budget: int,
    *,
    rel_positions: Sequence[float] | None = None,
    tfidf: TfIdfModel | None = None,
    empty_list_distance: float = 1.0,
) -> FeatureContext:
    """Build the tf-idf model and fill every item's quality block.

    ``rel_positions`` gives each item's relative position in its document
    (0..1); by default items are treated as one evenly spaced sequence.
    """
    if not items:
        raise ValueError("no items to featurize")
    if tfidf is None:
        tfidf = build_tfidf([it.payload for it in items], [it.id for it in items])
    if rel_positions is None:
        n = len(items)
        rel_positions = [i / (n - 1) if n > 1 else 0.0 for i in range(n)]
    if len(rel_positions) != len(items):
        raise ValueError("rel_positions and items lengths differ")
    for item, pos in zip(items, rel_positions):
        item.feature_vec = quality_vector(item, float(pos), budget, tfidf)
    return FeatureContext(tfidf=tfidf, empty_list_distance=empty_list_distance)


def assemble_features(instance, lst: ItemList, item: Item) -> CandidateFeatures:
    """Features of ``item`` as the next pick after ``lst`` on ``instance``.

    The similarity block is [gram det, gram det * mean quality, minimum L1
    distance between quality blocks]; for an empty list the distance slot
    takes the context's configured constant.
    """
    context: FeatureContext | None = getattr(instance, "features", None)
    if context is None:
        raise ValueError(f"instance {instance!r} has no feature context")
    if item.feature_vec is None:
        raise ValueError(f"item {item.id} has no quality features")
    quality = item.feature_vec
    det = gram_det_similarity(context.tfidf, lst, item)
    if len(lst) == 0:
        distance = context.empty_list_distance
    else:
        distance = min(
            float(np.abs(quality - member.feature_vec).sum()) for member in lst.items
        )
    similarity = np.array([det, det * float(quality.mean()), distance])
    return CandidateFeatures(quality=quality, similarity=similarity)
