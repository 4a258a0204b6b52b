"""Cluster files: the on-disk JSON schema, tokenization, ingestion into
problem instances, and seeded synthetic cluster generation.

A cluster file holds one selection task:

    {
      "cluster_id": "...",
      "documents": [
        {"doc_id": "...",
         "sentences": [
           {"sentence_id": "...", "text": "...", "byte_length": 9}, ...]},
        ...
      ],
      "references": ["reference summary text", ...]
    }

``byte_length`` is the UTF-8 byte count of the text, spaces included; when
present it is verified against the text, when absent it is computed.
"""

from __future__ import annotations

import itertools
import json
import re
import string
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .features import FEATURE_DIM, GRAM_DET_INDEX, TOKEN_COUNT_INDEX, build_feature_context
from .learners import LinearRanker
from .listpred import ProblemInstance
from .rewards import CoverageReward, Item, RougeRecallReward

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

REWARD_ROUGE = "rouge"
REWARD_COVERAGE = "coverage"


def tokenize(text: str) -> list[str]:
    """Lowercase and strip punctuation; tokens are alphanumeric runs."""
    return _TOKEN_RE.findall(text.lower())


def byte_length(text: str) -> int:
    return len(text.encode("utf-8"))


class IngestError(Exception):
    """Collected per-file ingestion problems."""

    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class SentenceRecord:
    sentence_id: str
    text: str
    byte_length: int


@dataclass
class DocumentRecord:
    doc_id: str
    sentences: list[SentenceRecord]


@dataclass
class ClusterDocument:
    cluster_id: str
    documents: list[DocumentRecord]
    references: list[str]


@dataclass
class IngestedCluster:
    """A cluster plus its learnable instance; ``locations`` maps each item
    id back to its (document position, sentence position)."""

    cluster: ClusterDocument
    instance: ProblemInstance
    locations: list[tuple[int, int]]

    def sentence(self, item_id: int) -> tuple[DocumentRecord, SentenceRecord]:
        doc_pos, sent_pos = self.locations[item_id]
        doc = self.cluster.documents[doc_pos]
        return doc, doc.sentences[sent_pos]


def parse_cluster(doc: dict, *, origin: str = "<memory>") -> ClusterDocument:
    errors: list[str] = []
    if not isinstance(doc, dict):
        raise IngestError([f"{origin}: cluster must be a JSON object"])
    cluster_id = doc.get("cluster_id")
    if not isinstance(cluster_id, str) or not cluster_id:
        errors.append(f"{origin}: missing or empty cluster_id")
        cluster_id = "?"
    documents = []
    for d, raw_doc in enumerate(doc.get("documents") or []):
        doc_id = raw_doc.get("doc_id")
        if not isinstance(doc_id, str) or not doc_id:
            errors.append(f"{origin}: document {d} missing doc_id")
            doc_id = f"doc-{d}"
        sentences = []
        for s, raw_sent in enumerate(raw_doc.get("sentences") or []):
            text = raw_sent.get("text")
            if not isinstance(text, str):
                errors.append(f"{origin}: {doc_id} sentence {s} missing text")
                continue
            computed = byte_length(text)
            declared = raw_sent.get("byte_length", computed)
            if declared != computed:
                errors.append(
                    f"{origin}: {doc_id} sentence {s} byte_length {declared} "
                    f"!= utf-8 length {computed}"
                )
            if computed == 0:
                errors.append(f"{origin}: {doc_id} sentence {s} has zero length")
                continue
            sentences.append(
                SentenceRecord(
                    sentence_id=str(raw_sent.get("sentence_id", f"s{s}")),
                    text=text,
                    byte_length=computed,
                )
            )
        documents.append(DocumentRecord(doc_id=doc_id, sentences=sentences))
    if not any(d.sentences for d in documents):
        errors.append(f"{origin}: cluster has no sentences")
    references = doc.get("references")
    if references is None or not isinstance(references, list):
        references = []
    if errors:
        raise IngestError(errors)
    return ClusterDocument(
        cluster_id=cluster_id,
        documents=documents,
        references=[str(r) for r in references],
    )


def build_instance(
    cluster: ClusterDocument,
    budget: int,
    *,
    reward_kind: str = REWARD_ROUGE,
    require_references: bool = True,
) -> IngestedCluster:
    """Turn one cluster into a featurized problem instance.

    Item ids follow (document, sentence) order; the reward is unigram recall
    against the references (or the coverage relaxation that scores each
    distinct reference unigram once).
    """
    errors: list[str] = []
    items: list[Item] = []
    locations: list[tuple[int, int]] = []
    rel_positions: list[float] = []
    for d, document in enumerate(cluster.documents):
        n_sent = len(document.sentences)
        for s, sentence in enumerate(document.sentences):
            items.append(
                Item(
                    id=len(items),
                    length=sentence.byte_length,
                    payload=tuple(tokenize(sentence.text)),
                )
            )
            locations.append((d, s))
            rel_positions.append(s / (n_sent - 1) if n_sent > 1 else 0.0)
    if not items:
        raise IngestError([f"{cluster.cluster_id}: no sentences"])
    reference_tokens = [tokenize(ref) for ref in cluster.references]
    reference_tokens = [toks for toks in reference_tokens if toks]
    reward = None
    if require_references and not reference_tokens:
        errors.append(f"{cluster.cluster_id}: no usable references")
    if errors:
        raise IngestError(errors)
    if reference_tokens:
        if reward_kind == REWARD_ROUGE:
            reward = RougeRecallReward(reference_tokens, items)
        elif reward_kind == REWARD_COVERAGE:
            vocab = sorted({tok for ref in reference_tokens for tok in ref})
            weights = {tok: 1.0 for tok in vocab}
            covers = {
                item.id: [tok for tok in set(item.payload) if tok in weights]
                for item in items
            }
            reward = CoverageReward(weights, covers)
        else:
            raise ValueError(f"unknown reward kind {reward_kind!r}")
    context = build_feature_context(items, budget, rel_positions=rel_positions)
    instance = ProblemInstance(
        state_id=cluster.cluster_id,
        items=items,
        reward=reward,
        features=context,
    )
    return IngestedCluster(cluster=cluster, instance=instance, locations=locations)


def ingest(
    directory: str | Path,
    budget: int = 665,
    *,
    reward_kind: str = REWARD_ROUGE,
    require_references: bool = True,
) -> list[IngestedCluster]:
    """Load every ``*.json`` cluster in the directory, collecting per-file
    errors into one IngestError so all problems surface at once."""
    directory = Path(directory)
    paths = sorted(directory.glob("*.json"))
    if not paths:
        raise IngestError([f"{directory}: no cluster files found"])
    clusters: list[IngestedCluster] = []
    errors: list[str] = []
    for path in paths:
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            errors.append(f"{path.name}: unreadable JSON ({exc})")
            continue
        try:
            cluster = parse_cluster(raw, origin=path.name)
            clusters.append(
                build_instance(
                    cluster,
                    budget,
                    reward_kind=reward_kind,
                    require_references=require_references,
                )
            )
        except IngestError as exc:
            errors.extend(exc.errors)
    if errors:
        raise IngestError(errors)
    return clusters


@dataclass
class SyntheticSpec:
    """Shape of a generated corpus.

    ``realizable`` plants an exactly rankable structure: items carry
    disjoint tokens, so the diversity determinant cleanly separates fresh
    items from already-picked ones and the token count orders fresh items by
    normalized benefit; see :func:`planted_ranker`.
    """

    clusters: int = 20
    documents: int = 2
    items: int = 16
    budget: int = 20
    seed: int = 0
    realizable: bool = False
    concepts: int = 12
    token_counts: tuple[int, ...] = (1, 2, 3, 4)


def _token_pool() -> list[str]:
    letters = string.ascii_lowercase
    return ["".join(pair) for pair in itertools.product(letters, repeat=2)]


def generate_clusters(spec: SyntheticSpec) -> list[ClusterDocument]:
    """Deterministically generate clusters whose recall reward is a planted
    unit-weight coverage function (each reference token appears once)."""
    rng = np.random.default_rng(spec.seed)
    pool = _token_pool()
    clusters = []
    for c in range(spec.clusters):
        token_counts = [
            spec.token_counts[i % len(spec.token_counts)] for i in range(spec.items)
        ]
        rng.shuffle(token_counts)
        if spec.realizable:
            cursor = 0
            sentences_tokens = []
            for k in token_counts:
                sentences_tokens.append(pool[cursor : cursor + k])
                cursor += k
        else:
            concepts = pool[: spec.concepts]
            sentences_tokens = [
                [
                    concepts[j]
                    for j in sorted(
                        rng.choice(
                            spec.concepts, size=min(k, spec.concepts), replace=False
                        )
                    )
                ]
                for k in token_counts
            ]
        used = sorted({tok for toks in sentences_tokens for tok in toks})
        documents = []
        per_doc = (spec.items + spec.documents - 1) // spec.documents
        for d in range(spec.documents):
            chunk = sentences_tokens[d * per_doc : (d + 1) * per_doc]
            sentences = []
            for s, tokens in enumerate(chunk):
                text = " ".join(tokens)
                sentences.append(
                    SentenceRecord(
                        sentence_id=f"s{s}",
                        text=text,
                        byte_length=byte_length(text),
                    )
                )
            if sentences:
                documents.append(DocumentRecord(doc_id=f"d{d}", sentences=sentences))
        clusters.append(
            ClusterDocument(
                cluster_id=f"cluster-{c:03d}",
                documents=documents,
                references=[" ".join(used)],
            )
        )
    return clusters


def cluster_to_dict(cluster: ClusterDocument) -> dict:
    return {
        "cluster_id": cluster.cluster_id,
        "documents": [
            {
                "doc_id": doc.doc_id,
                "sentences": [
                    {
                        "sentence_id": sent.sentence_id,
                        "text": sent.text,
                        "byte_length": sent.byte_length,
                    }
                    for sent in doc.sentences
                ],
            }
            for doc in cluster.documents
        ],
        "references": list(cluster.references),
    }


def write_clusters(
    clusters: Sequence[ClusterDocument], directory: str | Path
) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for cluster in clusters:
        path = directory / f"{cluster.cluster_id}.json"
        payload = json.dumps(cluster_to_dict(cluster), sort_keys=True, indent=2) + "\n"
        path.write_text(payload, encoding="utf-8")
        paths.append(path)
    return paths


def gen_synthetic(spec: SyntheticSpec, directory: str | Path) -> list[Path]:
    """Generate and write a synthetic corpus; fully determined by the spec."""
    return write_clusters(generate_clusters(spec), directory)


def planted_ranker(detector_weight: float = 8.0, count_weight: float = 2.0) -> LinearRanker:
    """The scorer that achieves zero pairwise hinge loss on realizable data.

    On disjoint-token clusters a fresh candidate has diversity determinant 1
    and an already-picked one has 0, while fewer tokens means a higher
    normalized benefit; rewarding the determinant and penalizing the token
    count therefore reproduces the cost ordering with margin >= 2.
    """
    weights = np.zeros(FEATURE_DIM)
    weights[GRAM_DET_INDEX] = detector_weight
    weights[TOKEN_COUNT_INDEX] = -count_weight
    return LinearRanker(weights=weights)
