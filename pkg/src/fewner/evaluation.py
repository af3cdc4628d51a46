"""Entity-set scoring: exact-match set intersection, micro-averaged.

An entity counts as correct only when both its segment (case-sensitive)
and its canonical label match a gold entity. Corpus scores sum the
per-example counts first, then compute the ratios; 0/0 is defined as 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .corpus import Entity

AGGREGATION = "micro"


@dataclass(frozen=True)
class EvalCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __add__(self, other: "EvalCounts") -> "EvalCounts":
        return EvalCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)


@dataclass(frozen=True)
class EvalResult:
    counts: EvalCounts
    precision: float
    recall: float
    f1: float


def compare(predicted: Iterable[Entity], expected: Iterable[Entity]) -> EvalCounts:
    """TP/FP/FN from the intersection of the two entity sets."""
    predicted_set = frozenset(predicted)
    expected_set = frozenset(expected)
    tp = len(predicted_set & expected_set)
    return EvalCounts(
        tp=tp,
        fp=len(predicted_set) - tp,
        fn=len(expected_set) - tp,
    )


def result_from_counts(counts: EvalCounts) -> EvalResult:
    precision = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else 0.0
    recall = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return EvalResult(counts=counts, precision=precision, recall=recall, f1=f1)


def aggregate(per_example: Iterable[EvalCounts]) -> EvalResult:
    """Micro-average: sum counts across examples, then take the ratios."""
    total = EvalCounts()
    for counts in per_example:
        total = total + counts
    return result_from_counts(total)


def result_row(result: EvalResult) -> dict:
    """Flat dict form used by report CSV/JSON emitters."""
    return {
        "tp": result.counts.tp,
        "fp": result.counts.fp,
        "fn": result.counts.fn,
        "precision": result.precision,
        "recall": result.recall,
        "f1": result.f1,
    }
