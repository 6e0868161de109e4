import numpy as np
import pytest

from dress.clustering import (
    KMeansResult,
    Partition,
    cactus_partitions,
    cluster_per_dimension,
    factor_partitions,
    kmeans,
    pca_fit,
    pca_transform,
)

from _oracles import adjusted_rand_index, inertia, nearest_centroid_labels


def test_pca_matches_svd_oracle():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(40, 6)) @ rng.normal(size=(6, 6))
    proj = pca_fit(x, 6)

    centered = x - x.mean(axis=0)
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    want_evals = svals ** 2 / (len(x) - 1)
    assert np.allclose(proj.eigenvalues, want_evals)
    for got, want in zip(proj.components, vt):
        if want[np.nonzero(np.abs(want) > 1e-12)[0][0]] < 0:
            want = -want
        assert np.allclose(got, want)


def test_pca_eigenvalues_descending_and_variance_matches():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(200, 5)) * np.array([5.0, 2.0, 1.0, 0.5, 0.1])
    proj = pca_fit(x, 5)
    assert np.all(np.diff(proj.eigenvalues) <= 1e-12)
    y = pca_transform(proj, x)
    cov = y.T @ (y - y.mean(0)) / (len(x) - 1)
    assert np.allclose(np.diag(cov), proj.eigenvalues, atol=1e-9)
    assert np.allclose(cov - np.diag(np.diag(cov)), 0, atol=1e-9)


def test_pca_recovers_planted_direction():
    rng = np.random.default_rng(1)
    direction = np.array([3.0, 4.0]) / 5.0
    x = rng.normal(size=(500, 1)) * 10 @ direction[None, :] + rng.normal(size=(500, 2)) * 0.01
    proj = pca_fit(x, 1)
    assert abs(abs(proj.components[0] @ direction) - 1.0) < 1e-3


def test_pca_sign_rule_and_determinism():
    rng = np.random.default_rng(7)
    x = rng.normal(size=(30, 4))
    p1 = pca_fit(x, 3)
    p2 = pca_fit(x, 3)
    assert np.array_equal(p1.components, p2.components)
    for row in p1.components:
        first = row[np.nonzero(np.abs(row) > 1e-12)[0][0]]
        assert first > 0


def test_pca_constant_column_is_harmless():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(50, 3))
    x[:, 1] = 4.2
    proj = pca_fit(x, 3)
    assert np.all(np.isfinite(proj.components))
    assert proj.eigenvalues[-1] < 1e-20
    assert np.all(np.isfinite(pca_transform(proj, x)))


def test_pca_validation():
    with pytest.raises(ValueError):
        pca_fit(np.zeros((1, 3)), 1)
    with pytest.raises(ValueError):
        pca_fit(np.zeros((5, 3)), 4)
    with pytest.raises(ValueError):
        pca_fit(np.zeros((5, 3)), 0)
    proj = pca_fit(np.random.default_rng(0).normal(size=(5, 3)), 2)
    with pytest.raises(ValueError):
        pca_transform(proj, np.zeros((4, 2)))


def _blobs(rng, centers, per, spread=0.05):
    pts = np.concatenate([c + rng.normal(scale=spread, size=(per, len(c))) for c in centers])
    truth = np.repeat(np.arange(len(centers)), per)
    return pts, truth


def test_kmeans_recovers_separated_blobs():
    rng = np.random.default_rng(0)
    centers = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0], [10.0, 10.0]])
    pts, truth = _blobs(rng, centers, per=25)
    res = kmeans(pts, 4, seed=1)
    assert adjusted_rand_index(res.labels, truth) == 1.0


def test_kmeans_fixpoint_matches_exhaustive_assignment():
    for seed in range(5):
        rng = np.random.default_rng(seed)
        pts = rng.normal(size=(60, 3))
        res = kmeans(pts, 5, seed=seed, max_iters=500)
        assert np.array_equal(res.labels, nearest_centroid_labels(pts, res.centroids))
        assert np.isclose(res.inertia, inertia(pts, res.centroids, res.labels))


def test_kmeans_centroids_are_cluster_means():
    rng = np.random.default_rng(4)
    pts = rng.normal(size=(80, 2))
    res = kmeans(pts, 6, seed=0, max_iters=500)
    for c in range(6):
        members = pts[res.labels == c]
        assert len(members) > 0
        assert np.allclose(res.centroids[c], members.mean(axis=0))


def test_kmeans_inertia_trace_non_increasing():
    for seed in range(5):
        pts = np.random.default_rng(seed).normal(size=(100, 4))
        res = kmeans(pts, 7, seed=seed)
        trace = np.array(res.inertia_trace)
        assert len(trace) == res.n_iter
        assert np.all(np.diff(trace) <= 1e-9)
        assert res.inertia <= trace[-1] + 1e-9


def test_kmeans_deterministic_and_seed_sensitive():
    pts = np.random.default_rng(10).normal(size=(50, 2))
    a = kmeans(pts, 4, seed=3)
    b = kmeans(pts, 4, seed=3)
    assert np.array_equal(a.labels, b.labels)
    assert np.array_equal(a.centroids, b.centroids)
    diverged = any(not np.array_equal(kmeans(pts, 4, seed=s).labels, a.labels)
                   for s in range(4, 10))
    assert diverged


def test_kmeans_duplicates_still_fill_every_cluster():
    pts = np.zeros((6, 2))
    pts[5] = [1.0, 1.0]
    res = kmeans(pts, 3, seed=0)
    assert np.all(np.bincount(res.labels, minlength=3) > 0)

    same = np.zeros((4, 3))
    res2 = kmeans(same, 2, seed=1)
    assert np.all(np.bincount(res2.labels, minlength=2) > 0)


def test_kmeans_k_equals_n():
    pts = np.random.default_rng(5).normal(size=(8, 2))
    res = kmeans(pts, 8, seed=0)
    assert sorted(res.labels) == list(range(8))
    assert res.inertia < 1e-12


def test_kmeans_validation():
    pts = np.zeros((5, 2))
    with pytest.raises(ValueError):
        kmeans(pts, 6, seed=0)
    with pytest.raises(ValueError):
        kmeans(pts, 0, seed=0)
    with pytest.raises(ValueError):
        kmeans(np.zeros(5), 2, seed=0)
    with pytest.raises(ValueError):
        kmeans(pts, 2, seed=0, max_iters=0)


def test_partition_subsets_disjoint_cover():
    labels = np.array([2, 0, 1, 2, 0, 0])
    p = Partition(labels=labels, k=4, source="t")
    subs = p.subsets()
    assert len(subs) == 4
    assert [len(s) for s in subs] == [3, 1, 2, 0]
    assert np.array_equal(p.sizes(), [3, 1, 2, 0])
    combined = np.sort(np.concatenate(subs))
    assert np.array_equal(combined, np.arange(6))
    for s, members in enumerate(subs):
        assert np.all(labels[members] == s)


def test_partition_validation():
    with pytest.raises(ValueError):
        Partition(labels=np.array([0, 3]), k=3, source="t")
    with pytest.raises(ValueError):
        Partition(labels=np.array([-1, 0]), k=2, source="t")
    with pytest.raises(ValueError):
        Partition(labels=np.array([]), k=1, source="t")


def _grouped_latents(rng, n, cards, sigma=0.02):
    """Latent groups that each encode one discrete factor value plus noise."""
    factors = np.stack([rng.integers(0, c, size=n) for c in cards], axis=1)
    groups = []
    for f, c in enumerate(cards):
        base = factors[:, f] / (c - 1)
        group = np.stack([base, base * 0.5], axis=1) + rng.normal(scale=sigma, size=(n, 2))
        groups.append(group)
    return groups, factors


def test_cluster_per_dimension_recovers_planted_factors():
    rng = np.random.default_rng(0)
    cards = [4, 3, 5]
    groups, factors = _grouped_latents(rng, 400, cards)
    parts = cluster_per_dimension(groups, k=cards, seed=9)
    assert len(parts) == 3
    for f, p in enumerate(parts):
        assert p.k == cards[f]
        assert len(p) == 400
        assert adjusted_rand_index(p.labels, factors[:, f]) == 1.0


def test_cluster_per_dimension_scalar_k_and_names():
    rng = np.random.default_rng(1)
    groups, _ = _grouped_latents(rng, 100, [4, 4])
    parts = cluster_per_dimension(groups, k=4, seed=0, names=["hue", "scale"])
    assert [p.source for p in parts] == ["dress:hue", "dress:scale"]
    assert all(p.k == 4 for p in parts)


def test_cluster_per_dimension_groups_are_independent():
    rng = np.random.default_rng(2)
    groups, _ = _grouped_latents(rng, 150, [4, 3, 5])
    base = cluster_per_dimension(groups, k=[4, 3, 5], seed=5)
    groups2 = [groups[0], np.random.default_rng(99).normal(size=(150, 2)), groups[2]]
    changed = cluster_per_dimension(groups2, k=[4, 3, 5], seed=5)
    assert np.array_equal(base[0].labels, changed[0].labels)
    assert np.array_equal(base[2].labels, changed[2].labels)
    assert not np.array_equal(base[1].labels, changed[1].labels)


def test_cluster_per_dimension_reduces_wide_groups():
    rng = np.random.default_rng(3)
    wide = rng.normal(size=(60, 20))
    parts = cluster_per_dimension([wide], k=3, seed=1, max_components=8)
    assert parts[0].k == 3 and len(parts[0]) == 60


def test_cluster_per_dimension_validation():
    with pytest.raises(ValueError):
        cluster_per_dimension([], k=3, seed=0)
    g = np.random.default_rng(0).normal(size=(20, 2))
    with pytest.raises(ValueError):
        cluster_per_dimension([g, g], k=[3], seed=0)
    with pytest.raises(ValueError):
        cluster_per_dimension([g], k=3, seed=0, names=["a", "b"])


def test_cactus_partitions_shape_and_determinism():
    rng = np.random.default_rng(4)
    latents = rng.normal(size=(120, 6)) * np.array([10, 5, 2, 1, 0.5, 0.1])
    parts = cactus_partitions(latents, num_scalings=4, k=6, seed=2)
    assert len(parts) == 4
    assert all(p.k == 6 and len(p) == 120 for p in parts)
    assert [p.source for p in parts] == [f"cactus:{s}" for s in range(4)]
    again = cactus_partitions(latents, num_scalings=4, k=6, seed=2)
    for a, b in zip(parts, again):
        assert np.array_equal(a.labels, b.labels)
    assert any(not np.array_equal(parts[0].labels, p.labels) for p in parts[1:])


def test_cactus_validation():
    with pytest.raises(ValueError):
        cactus_partitions(np.zeros((10, 2)), num_scalings=0, k=2, seed=0)
    with pytest.raises(ValueError):
        cactus_partitions(np.zeros(10), num_scalings=1, k=2, seed=0)


def test_factor_partitions_round_trip():
    labels = np.array([[0, 2], [1, 0], [2, 1], [0, 2]])
    parts = factor_partitions(labels, [3, 3], ["color", "size"])
    assert [p.source for p in parts] == ["factor:color", "factor:size"]
    assert np.array_equal(parts[0].labels, labels[:, 0])
    assert np.array_equal(parts[1].labels, labels[:, 1])
    with pytest.raises(ValueError):
        factor_partitions(labels, [3], ["color"])
