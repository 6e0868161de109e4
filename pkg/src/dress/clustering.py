"""Partition construction: PCA, k-means, and the two clustering routes.

The main route clusters each latent group separately (PCA down to a few
components, then k-means), yielding one partition of the dataset per group.
The whole-space baseline clusters random diagonal rescalings of the full
latent vector instead. Ground-truth factor labels can also be read off as
partitions so all three sources feed the same task builder.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .seeding import subseed

SIGN_TOL = 1e-12


@dataclass
class PCAProjection:
    """Centered orthogonal projection onto the top principal components."""

    mean: np.ndarray         # (d,)
    components: np.ndarray   # (p, d), one unit row per component
    eigenvalues: np.ndarray  # (p,) descending, >= 0


def pca_fit(x: np.ndarray, num_components: int) -> PCAProjection:
    """Eigendecomposition of the sample covariance (denominator n - 1).

    Components are ordered by descending eigenvalue; each row's sign is fixed
    so its first entry larger than a small tolerance is positive, which makes
    the decomposition deterministic.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected (n, d) data, got shape {x.shape}")
    n, d = x.shape
    if n < 2:
        raise ValueError(f"need at least 2 rows to fit, got {n}")
    if not 1 <= num_components <= d:
        raise ValueError(f"num_components must be in [1, {d}], got {num_components}")

    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (n - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(-evals, kind="stable")[:num_components]
    evals = np.maximum(evals[order], 0.0)
    comps = evecs[:, order].T.copy()
    for row in comps:
        nonzero = np.nonzero(np.abs(row) > SIGN_TOL)[0]
        if len(nonzero) and row[nonzero[0]] < 0:
            row *= -1.0
    return PCAProjection(mean=mean, components=comps, eigenvalues=evals)


def pca_transform(proj: PCAProjection, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != proj.mean.shape[0]:
        raise ValueError(f"expected (n, {proj.mean.shape[0]}) data, got shape {x.shape}")
    return (x - proj.mean) @ proj.components.T


@dataclass
class KMeansResult:
    centroids: np.ndarray       # (k, d)
    labels: np.ndarray          # (n,) int
    inertia: float
    n_iter: int
    inertia_trace: list = field(default_factory=list)


def _sq_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """(n, k) squared Euclidean distances without materializing (n, k, d)."""
    p2 = np.einsum("ij,ij->i", points, points)[:, None]
    c2 = np.einsum("ij,ij->i", centroids, centroids)[None, :]
    d2 = p2 - 2.0 * points @ centroids.T + c2
    np.maximum(d2, 0.0, out=d2)
    return d2


def _plusplus_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: squared-distance weighted draws, uniform fallback."""
    n = len(points)
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = rng.integers(n)
    best_d2 = _sq_distances(points, points[chosen[:1]])[:, 0]
    for i in range(1, k):
        total = best_d2.sum()
        if total > 0:
            probs = best_d2 / total
            chosen[i] = rng.choice(n, p=probs)
        else:
            chosen[i] = rng.integers(n)
        new_d2 = _sq_distances(points, points[chosen[i:i + 1]])[:, 0]
        np.minimum(best_d2, new_d2, out=best_d2)
    return points[chosen].copy()


def kmeans(points: np.ndarray, k: int, seed: int, max_iters: int = 100) -> KMeansResult:
    """Seeded k-means++ plus Lloyd iterations.

    Runs until assignments stop changing or max_iters passes. Distance ties
    go to the lower centroid index. Clusters emptied by an update are repaired
    by stealing, per empty cluster in ascending id, the point farthest from
    its current centroid; the stolen point becomes the new centroid, so every
    cluster in the result is non-empty.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError(f"expected (n, d) points, got shape {points.shape}")
    n = len(points)
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    if max_iters < 1:
        raise ValueError(f"max_iters must be >= 1, got {max_iters}")

    rng = np.random.default_rng(seed)
    centroids = _plusplus_init(points, k, rng)
    labels = np.full(n, -1, dtype=np.int64)
    trace = []
    n_iter = 0
    for n_iter in range(1, max_iters + 1):
        d2 = _sq_distances(points, centroids)
        new_labels = np.argmin(d2, axis=1)

        counts = np.bincount(new_labels, minlength=k)
        empty = np.nonzero(counts == 0)[0]
        if len(empty):
            dist_to_own = d2[np.arange(n), new_labels].copy()
            for cluster in empty:
                donor = int(np.argmax(dist_to_own))
                new_labels[donor] = cluster
                centroids[cluster] = points[donor]
                dist_to_own[donor] = -1.0  # a stolen point cannot be stolen again
            d2 = _sq_distances(points, centroids)
        trace.append(float(d2[np.arange(n), new_labels].sum()))

        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(k):
            centroids[c] = points[labels == c].mean(axis=0)

    inertia = float(_sq_distances(points, centroids)[np.arange(n), labels].sum())
    return KMeansResult(centroids=centroids, labels=labels, inertia=inertia,
                        n_iter=n_iter, inertia_trace=trace)


@dataclass
class Partition:
    """A grouping of all n dataset items into k disjoint subsets."""

    labels: np.ndarray  # (n,) int in [0, k)
    k: int
    source: str

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.ndim != 1 or len(self.labels) == 0:
            raise ValueError(f"labels must be a non-empty vector, got shape {self.labels.shape}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.labels.min() < 0 or self.labels.max() >= self.k:
            raise ValueError(f"labels must lie in [0, {self.k})")

    def __len__(self) -> int:
        return len(self.labels)

    def subsets(self) -> list[np.ndarray]:
        """Member indices per subset id; some may be empty."""
        order = np.argsort(self.labels, kind="stable")
        bounds = np.searchsorted(self.labels[order], np.arange(self.k + 1))
        return [order[bounds[i]:bounds[i + 1]] for i in range(self.k)]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)


def cluster_per_dimension(groups: Sequence[np.ndarray], k: int | Sequence[int],
                          seed: int, max_components: int = 8,
                          max_iters: int = 100,
                          names: Sequence[str] | None = None) -> list[Partition]:
    """One partition per latent group: PCA to at most max_components, k-means.

    `k` may be a single cluster count or one per group. Each group gets an
    independent seeded stream, so dropping or reordering groups does not
    perturb the others.
    """
    groups = list(groups)
    if not groups:
        raise ValueError("need at least one latent group")
    if names is None:
        names = [f"group{g}" for g in range(len(groups))]
    if len(names) != len(groups):
        raise ValueError(f"{len(groups)} groups but {len(names)} names")
    ks = [int(k)] * len(groups) if np.isscalar(k) else [int(v) for v in k]
    if len(ks) != len(groups):
        raise ValueError(f"{len(groups)} groups but {len(ks)} cluster counts")

    partitions = []
    for g, z in enumerate(groups):
        z = np.asarray(z, dtype=np.float64)
        if z.ndim != 2:
            raise ValueError(f"group {g} must be (n, d), got shape {z.shape}")
        proj = pca_fit(z, min(z.shape[1], max_components))
        reduced = pca_transform(proj, z)
        result = kmeans(reduced, ks[g], seed=subseed(seed, "cluster", g), max_iters=max_iters)
        partitions.append(Partition(labels=result.labels, k=ks[g], source=f"dress:{names[g]}"))
    return partitions


def cactus_partitions(latents: np.ndarray, num_scalings: int, k: int, seed: int,
                      max_iters: int = 100) -> list[Partition]:
    """Whole-space baseline: k-means over random diagonal rescalings.

    Each of the num_scalings runs draws a uniform [0, 1) scale per latent
    dimension, stretches the space by it, and clusters all dimensions jointly.
    """
    latents = np.asarray(latents, dtype=np.float64)
    if latents.ndim != 2:
        raise ValueError(f"expected (n, d) latents, got shape {latents.shape}")
    if num_scalings < 1:
        raise ValueError(f"num_scalings must be >= 1, got {num_scalings}")

    partitions = []
    for s in range(num_scalings):
        rng = np.random.default_rng(subseed(seed, "scaling", s))
        scale = rng.uniform(0.0, 1.0, size=latents.shape[1])
        result = kmeans(latents * scale, k, seed=subseed(seed, "cactus", s), max_iters=max_iters)
        partitions.append(Partition(labels=result.labels, k=k, source=f"cactus:{s}"))
    return partitions


def factor_partitions(labels: np.ndarray, cardinalities: Sequence[int],
                      names: Sequence[str]) -> list[Partition]:
    """Ground-truth partitions, one per factor column."""
    labels = np.asarray(labels)
    if labels.ndim != 2 or labels.shape[1] != len(cardinalities) or len(names) != len(cardinalities):
        raise ValueError("labels, cardinalities, and names disagree on factor count")
    return [Partition(labels=labels[:, f], k=int(cardinalities[f]), source=f"factor:{names[f]}")
            for f in range(labels.shape[1])]
