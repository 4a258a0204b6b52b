"""Unigram overlap scoring between a candidate summary and one or more
reference summaries (a simplified in-repo scorer: lowercased tokens, no
stemming or stopword handling)."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class RougeScores:
    recall: float
    precision: float
    f1: float


def rouge1(
    candidate_tokens: Sequence[str], references: Sequence[Sequence[str]]
) -> RougeScores:
    """Multi-reference unigram recall / precision / F1.

    Overlap credits each unigram min(candidate count, reference count),
    summed over references.  Recall divides by the total reference tokens;
    precision divides by candidate tokens times the number of references;
    F1 is their harmonic mean (0 when both are 0).
    """
    if not references:
        raise ValueError("at least one reference is required")
    candidate = Counter(candidate_tokens)
    overlap = 0
    total_reference = 0
    for reference in references:
        counts = Counter(reference)
        total_reference += sum(counts.values())
        overlap += sum(min(candidate[tok], counts[tok]) for tok in counts)
    if total_reference == 0:
        raise ValueError("references contain no tokens")
    recall = overlap / total_reference
    denom = len(candidate_tokens) * len(references)
    precision = overlap / denom if denom else 0.0
    f1 = (
        2.0 * precision * recall / (precision + recall)
        if precision + recall > 0
        else 0.0
    )
    return RougeScores(recall=recall, precision=precision, f1=f1)
