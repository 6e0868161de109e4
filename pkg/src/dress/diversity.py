"""Task diversity between partitions, by greedy subset matching.

Two partitions induce similar tasks when their subsets overlap heavily, so
similarity is an average intersection-over-union of matched subsets and
diversity is its complement. Matching is a single greedy pass: each subset
of the first partition takes the best still-unmatched subset of the second
with strictly positive IoU, in index order, ties to the earliest candidate.
The pass is order-dependent by construction; no symmetry is promised.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .clustering import Partition


@dataclass(frozen=True)
class DiversityScore:
    score: float
    pair: tuple[str, str]
    avg_iou: float

    def __post_init__(self):
        if not 0.0 <= self.avg_iou <= 1.0:
            raise ValueError(f"avg_iou out of [0, 1]: {self.avg_iou}")
        if abs(self.score - (1.0 - self.avg_iou)) > 1e-12:
            raise ValueError(f"score {self.score} is not 1 - avg_iou {self.avg_iou}")


def iou(a: set, b: set) -> float:
    """|a & b| / |a | b|, with two empty sets scoring 0."""
    if not a and not b:
        return 0.0
    return len(a & b) / len(a | b)


def pad_partitions(p1: Partition, p2: Partition) -> tuple[list[set], list[set]]:
    """Both partitions as index-set lists padded with empty sets to equal count."""
    if len(p1.labels) != len(p2.labels):
        raise ValueError(f"partitions cover {len(p1.labels)} vs {len(p2.labels)} items")
    k = max(p1.k, p2.k)
    sets1 = [set(map(int, s)) for s in p1.subsets()] + [set() for _ in range(k - p1.k)]
    sets2 = [set(map(int, s)) for s in p2.subsets()] + [set() for _ in range(k - p2.k)]
    return sets1, sets2


def _iou_matrix(p1: Partition, p2: Partition, k: int) -> np.ndarray:
    inter = np.zeros((k, k), dtype=np.int64)
    np.add.at(inter, (p1.labels, p2.labels), 1)
    sizes1 = np.bincount(p1.labels, minlength=k)
    sizes2 = np.bincount(p2.labels, minlength=k)
    union = sizes1[:, None] + sizes2[None, :] - inter
    out = np.zeros((k, k), dtype=np.float64)
    np.divide(inter, union, out=out, where=union > 0)
    return out


def diversity_score(p1: Partition, p2: Partition) -> DiversityScore:
    """1 minus the mean IoU of greedily matched subsets.

    Subsets of p1 are visited in index order; each takes the unmatched p2
    subset with the highest IoU, provided it beats 0, with the earliest
    candidate winning ties. Unmatched subsets (including the padding that
    equalizes subset counts) contribute IoU 0.
    """
    if len(p1.labels) != len(p2.labels):
        raise ValueError(f"partitions cover {len(p1.labels)} vs {len(p2.labels)} items")
    k = max(p1.k, p2.k)
    matrix = _iou_matrix(p1, p2, k)
    remaining = np.ones(k, dtype=bool)
    total = 0.0
    for i in range(k):
        candidates = np.where(remaining, matrix[i], -1.0)
        j = int(np.argmax(candidates))
        if candidates[j] > 0.0:
            remaining[j] = False
            total += candidates[j]
    avg = total / k
    return DiversityScore(score=1.0 - avg, pair=(p1.source, p2.source), avg_iou=avg)


def mean_pairwise_diversity(parts: Sequence[Partition]) -> float:
    """Mean diversity over all unordered partition pairs."""
    if len(parts) < 2:
        raise ValueError(f"need at least 2 partitions, got {len(parts)}")
    scores = [diversity_score(a, b).score for a, b in combinations(parts, 2)]
    return float(np.mean(scores))


def pairwise_scores(parts: Sequence[Partition]) -> list[DiversityScore]:
    """All unordered-pair scores, in combinations order."""
    if len(parts) < 2:
        raise ValueError(f"need at least 2 partitions, got {len(parts)}")
    return [diversity_score(a, b) for a, b in combinations(parts, 2)]
