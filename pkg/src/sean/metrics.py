"""Evaluation metrics: F1, AUC, the Gini coefficient over creator
impressions, and C&C (the harmonic mean of F1 and 1-Gini), plus impression
accounting. Metrics that are undefined on an input return None so callers can
flag the day instead of silently averaging garbage."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

UserId = str

DEFAULT_THRESHOLD = 0.5


class DataError(ValueError):
    """Impression accounting hit a document with no known creator."""


def confusion(preds, labels, threshold: float = DEFAULT_THRESHOLD):
    """(tp, fp, fn, tn) with predicted-positive = (p >= threshold)."""
    tp = fp = fn = tn = 0
    for p, y in zip(preds, labels, strict=True):
        pos = p >= threshold
        if pos and y == 1:
            tp += 1
        elif pos:
            fp += 1
        elif y == 1:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn


def f1(preds, labels, threshold: float = DEFAULT_THRESHOLD) -> float | None:
    """Standard F1; 0 when precision+recall is 0, None on empty input."""
    if len(preds) == 0:
        return None
    if not 0 < threshold < 1:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    tp, fp, fn, _ = confusion(preds, labels, threshold)
    denom = 2 * tp + fp + fn
    if denom == 0:
        return 0.0
    return 2 * tp / denom


def auc(scores, labels) -> float | None:
    """Rank-sum AUC: the probability a random positive outranks a random
    negative, ties counted 0.5. None unless both classes are present."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have equal length")
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        return None
    order = np.argsort(scores, kind="stable")
    sorted_scores = scores[order]
    ranks = np.empty(len(scores), dtype=np.float64)
    i = 0
    while i < len(sorted_scores):
        j = i
        while j + 1 < len(sorted_scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        # midrank for the tie group occupying 1-based ranks i+1 .. j+1
        ranks[order[i : j + 1]] = (i + 1 + j + 1) / 2.0
        i = j + 1
    rank_sum_pos = ranks[labels == 1].sum()
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def gini(values) -> float | None:
    """Gini coefficient of a nonnegative vector by the ascending-rank formula
    sum((2i - n - 1) * x_i) / (n * sum(x)). None when the total is 0."""
    x = np.sort(np.asarray(values, dtype=np.float64))
    n = len(x)
    if n == 0:
        raise ValueError("gini of an empty vector")
    if np.any(x < 0):
        raise ValueError("gini requires nonnegative values")
    total = math.fsum(x)
    if total == 0:
        return None
    coefs = 2.0 * np.arange(1, n + 1) - n - 1
    num = math.fsum(coefs * x)
    return num / (n * total)


def cc(f1_value: float, gini_value: float) -> float:
    """Harmonic mean of F1 and (1 - Gini); 0 when the denominator is 0."""
    for name, v in (("f1", f1_value), ("gini", gini_value)):
        if not 0 <= v <= 1:
            raise ValueError(f"{name} must be in [0, 1], got {v}")
    equality = 1.0 - gini_value
    denom = equality + f1_value
    if denom == 0:
        return 0.0
    return 2.0 * equality * f1_value / denom


class ImpressionLedger:
    """Creator -> count of recommendation impressions. Merging is commutative
    addition, so per-shard ledgers can be combined safely."""

    def __init__(self, counts: dict[UserId, int] | None = None):
        self.counts: dict[UserId, int] = dict(counts or {})

    def add(self, creator: UserId, n: int = 1) -> None:
        self.counts[creator] = self.counts.get(creator, 0) + n

    def merge(self, other: "ImpressionLedger") -> None:
        for creator, n in other.counts.items():
            self.add(creator, n)

    def values(self) -> list[int]:
        return [self.counts[c] for c in sorted(self.counts)]

    def total(self) -> int:
        return sum(self.counts.values())

    def save_tsv(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            for creator in sorted(self.counts):
                fh.write(f"{creator}\t{self.counts[creator]}\n")


def record_impressions(
    test_preds,
    docs,
    threshold: float = DEFAULT_THRESHOLD,
) -> ImpressionLedger:
    """Tally one impression per predicted-positive (consumer, doc) pair,
    attributed to the doc's creator.

    `test_preds` is an iterable of (user, doc_id, probability). Creators of
    every document in the candidate set are included, at zero if they drew no
    impressions, so equality is measured over the day's active creators.
    """
    ledger = ImpressionLedger()
    for _user, doc_id, p in test_preds:
        try:
            creator = docs.creator_of(doc_id)
        except KeyError:
            raise DataError(f"document {doc_id!r} has no known creator") from None
        if creator not in ledger.counts:
            ledger.counts[creator] = 0
        if p >= threshold:
            ledger.add(creator)
    return ledger
