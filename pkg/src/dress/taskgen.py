"""Few-shot episode construction.

Self-supervised episodes treat clusters of a partition as pseudo-classes:
pick N clusters, pick K+Kq members of each, and relabel classes by position
so cluster identities never leak out. Supervised episodes define two classes
by exact value combinations on a few ground-truth factors. Both feed the
same meta-learner.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .clustering import Partition
from .datagen import Dataset
from .seeding import rng_for, subseed

logger = logging.getLogger(__name__)


class TaskConstructionError(RuntimeError):
    """A partition or factor draw cannot supply a valid episode."""


@dataclass(frozen=True)
class TaskSetup:
    """Episode shape: N-way, K support and Kq query samples per class.

    min_cluster_size is the eligibility threshold for pseudo-class clusters;
    it defaults to K+Kq, the minimum that makes sampling possible.
    """

    way: int = 2
    shots: int = 5
    queries: int = 5
    min_cluster_size: int | None = None

    def __post_init__(self):
        if self.way < 2:
            raise ValueError(f"way must be >= 2, got {self.way}")
        if self.shots < 1 or self.queries < 1:
            raise ValueError(f"shots and queries must be >= 1, got {self.shots}, {self.queries}")
        need = self.shots + self.queries
        if self.min_cluster_size is None:
            object.__setattr__(self, "min_cluster_size", need)
        elif self.min_cluster_size < need:
            raise ValueError(f"min_cluster_size must be >= shots+queries={need}, got {self.min_cluster_size}")


@dataclass
class Episode:
    """One few-shot task: (image index, class) pairs for support and query."""

    support: list[tuple[int, int]]
    query: list[tuple[int, int]]
    way: int
    shots: int
    queries: int
    source: str

    def __post_init__(self):
        for name, pairs, per_class in (("support", self.support, self.shots),
                                       ("query", self.query, self.queries)):
            if len(pairs) != self.way * per_class:
                raise ValueError(f"{name} must hold way*{per_class} samples, got {len(pairs)}")
            counts = np.zeros(self.way, dtype=int)
            for idx, cls in pairs:
                if idx < 0:
                    raise ValueError(f"negative image index {idx} in {name}")
                if not 0 <= cls < self.way:
                    raise ValueError(f"class {cls} out of range [0, {self.way}) in {name}")
                counts[cls] += 1
            if not np.all(counts == per_class):
                raise ValueError(f"{name} classes are unbalanced: {counts.tolist()}")
        s_idx = {idx for idx, _ in self.support}
        q_idx = {idx for idx, _ in self.query}
        if s_idx & q_idx:
            raise ValueError(f"support and query share image indices {sorted(s_idx & q_idx)}")

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(support_idx, support_cls, query_idx, query_cls) as int64 arrays."""
        s = np.asarray(self.support, dtype=np.int64)
        q = np.asarray(self.query, dtype=np.int64)
        return s[:, 0], s[:, 1], q[:, 0], q[:, 1]


def sample_task_from_partition(part: Partition, setup: TaskSetup, seed: int) -> Episode:
    """Episode with N clusters as pseudo-classes.

    Eligible clusters (size >= min_cluster_size) are sampled uniformly
    without replacement; within each, K+Kq member indices are drawn without
    replacement, the first K forming the support set. Class labels are the
    positions 0..N-1 in sampling order, never the cluster ids themselves.
    """
    sizes = part.sizes()
    eligible = np.nonzero(sizes >= setup.min_cluster_size)[0]
    if len(eligible) < setup.way:
        raise TaskConstructionError(
            f"partition '{part.source}': {len(eligible)} clusters of size >= "
            f"{setup.min_cluster_size}, need {setup.way}")

    rng = np.random.default_rng(seed)
    chosen = rng.choice(eligible, size=setup.way, replace=False)
    subsets = part.subsets()
    support = []
    query = []
    for cls, cluster in enumerate(chosen):
        picked = rng.choice(subsets[cluster], size=setup.shots + setup.queries, replace=False)
        support.extend((int(i), cls) for i in picked[:setup.shots])
        query.extend((int(i), cls) for i in picked[setup.shots:])
    return Episode(support=support, query=query, way=setup.way,
                   shots=setup.shots, queries=setup.queries, source=part.source)


def sample_supervised_task(d: Dataset, factor_subset: Sequence[int], setup: TaskSetup,
                           max_attrs: int = 2, seed: int = 0,
                           max_attempts: int = 100) -> Episode:
    """Binary episode defined by two value combinations on sampled factors.

    Draws m in [1, max_attrs] factors from factor_subset and two distinct
    value combinations over them; images matching the first combination
    exactly form the positive class, the second the negative class. Matching
    constrains only the picked factors. Draws that leave either class short
    of K+Kq images are retried with fresh randomness up to max_attempts.
    """
    if setup.way != 2:
        raise ValueError(f"supervised tasks are binary; way must be 2, got {setup.way}")
    factor_subset = list(factor_subset)
    if not factor_subset:
        raise ValueError("factor_subset must be nonempty")
    if len(set(factor_subset)) != len(factor_subset):
        raise ValueError(f"factor_subset has duplicates: {factor_subset}")
    for f in factor_subset:
        if not 0 <= f < len(d.spec):
            raise ValueError(f"factor index {f} out of range [0, {len(d.spec)})")
    if max_attrs < 1:
        raise ValueError(f"max_attrs must be >= 1, got {max_attrs}")

    need = setup.shots + setup.queries
    rng = np.random.default_rng(seed)
    hi = min(max_attrs, len(factor_subset))
    for _ in range(max_attempts):
        m = int(rng.integers(1, hi + 1))
        picked = [factor_subset[i] for i in rng.choice(len(factor_subset), size=m, replace=False)]
        cards = [d.spec[f].cardinality for f in picked]
        combo_a = tuple(int(rng.integers(0, c)) for c in cards)
        combo_b = tuple(int(rng.integers(0, c)) for c in cards)
        if combo_a == combo_b:
            continue
        mask_a = np.ones(len(d), dtype=bool)
        mask_b = np.ones(len(d), dtype=bool)
        for f, va, vb in zip(picked, combo_a, combo_b):
            mask_a &= d.labels[:, f] == va
            mask_b &= d.labels[:, f] == vb
        pool_a = np.nonzero(mask_a)[0]
        pool_b = np.nonzero(mask_b)[0]
        if len(pool_a) < need or len(pool_b) < need:
            continue
        support = []
        query = []
        for cls, pool in enumerate((pool_a, pool_b)):
            sel = rng.choice(pool, size=need, replace=False)
            support.extend((int(i), cls) for i in sel[:setup.shots])
            query.extend((int(i), cls) for i in sel[setup.shots:])
        sides = [",".join(f"{d.spec[f].name}={v}" for f, v in zip(picked, combo))
                 for combo in (combo_a, combo_b)]
        return Episode(support=support, query=query, way=2, shots=setup.shots,
                       queries=setup.queries, source=f"supervised:{sides[0]} vs {sides[1]}")
    raise TaskConstructionError(
        f"no valid factor combination found in {max_attempts} attempts "
        f"(need {need} images per class)")


def eligible_partitions(partitions: Sequence[Partition], setup: TaskSetup) -> list[Partition]:
    """Partitions able to supply episodes; the rest are dropped with a warning."""
    if not partitions:
        raise ValueError("no partitions given")
    usable = []
    for p in partitions:
        if int(np.sum(p.sizes() >= setup.min_cluster_size)) >= setup.way:
            usable.append(p)
        else:
            logger.warning("partition '%s' has fewer than %d clusters of size >= %d; excluded",
                           p.source, setup.way, setup.min_cluster_size)
    return usable


def build_task_stream(partitions: Sequence[Partition], setup: TaskSetup,
                      tasks_per_epoch: int, seed: int,
                      num_epochs: int | None = None) -> Iterator[Episode]:
    """Deterministic episode stream mixing all usable partitions.

    Episode e picks a partition uniformly and samples from it, both under
    sub-seeds of (seed, e), so the stream can be resumed from any position.
    Yields tasks_per_epoch episodes per epoch, endlessly if num_epochs is
    None.
    """
    if tasks_per_epoch < 1:
        raise ValueError(f"tasks_per_epoch must be >= 1, got {tasks_per_epoch}")
    usable = eligible_partitions(partitions, setup)
    if not usable:
        raise TaskConstructionError("no partition has enough eligible clusters")

    def generate():
        e = 0
        total = None if num_epochs is None else num_epochs * tasks_per_epoch
        while total is None or e < total:
            pick = rng_for(seed, "pick", e).integers(len(usable))
            yield sample_task_from_partition(usable[pick], setup, seed=subseed(seed, "task", e))
            e += 1

    return generate()
