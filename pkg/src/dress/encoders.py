"""Latent encoders: disentangled, entangled, and permuted-slot variants.

These stand in for trained disentanglement encoders so the downstream
pipeline can be exercised against exact ground truth. The oracle encoder
emits one latent group per factor with the normalized factor value in
coordinate 0 and noise elsewhere. The mixed encoder deliberately entangles
all groups through a random orthogonal map. The slot encoder shuffles the
groups per image behind noisy signature vectors, and alignment recovers a
consistent order by clustering the signatures.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .clustering import kmeans
from .seeding import rng_for, subseed


@dataclass
class LatentRep:
    """One image's latent code: an ordered list of per-dimension vectors."""

    groups: list[np.ndarray]
    group_names: list[str]


@dataclass
class SlotRep:
    """One image's slot code: (signature, content) pairs in shuffled order.

    permutation[j] is the original group index stored at slot position j;
    it is ground truth for evaluating alignment, not an input to it.
    """

    slots: list[tuple[np.ndarray, np.ndarray]]
    permutation: np.ndarray


class AlignmentError(RuntimeError):
    """Slot alignment found two slots of one image in the same cluster."""

    def __init__(self, image_index: int, message: str):
        super().__init__(message)
        self.image_index = image_index


def stack_groups(reps: Sequence[LatentRep]) -> list[np.ndarray]:
    """Per-group (n, group_dim) matrices; validates cross-image consistency."""
    if not reps:
        raise ValueError("no latent representations given")
    names = reps[0].group_names
    dims = [len(g) for g in reps[0].groups]
    if len(names) != len(dims):
        raise ValueError(f"{len(dims)} groups but {len(names)} names")
    for i, rep in enumerate(reps):
        if rep.group_names != names or [len(g) for g in rep.groups] != dims:
            raise ValueError(f"image {i} disagrees with image 0 on group layout")
    stacked = [np.stack([rep.groups[g] for rep in reps]).astype(np.float64)
               for g in range(len(names))]
    for name, arr in zip(names, stacked):
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"group '{name}' contains non-finite values")
    return stacked


def concat_latents(reps: Sequence[LatentRep]) -> np.ndarray:
    """(n, total_dim) matrix of all groups concatenated in order."""
    return np.concatenate(stack_groups(reps), axis=1)


def encode_oracle(d, group_dim: int, noise_sigma: float, seed: int) -> list[LatentRep]:
    """Disentangled latents straight from the ground-truth labels.

    Group g of image i holds labels[i, g] / (cardinality_g - 1) in
    coordinate 0; coordinates 1.. are i.i.d. Gaussian(0, noise_sigma^2) so
    dimensionality reduction has something to discard.
    """
    if group_dim < 1:
        raise ValueError(f"group_dim must be >= 1, got {group_dim}")
    if noise_sigma < 0:
        raise ValueError(f"noise_sigma must be >= 0, got {noise_sigma}")
    n = len(d)
    num_groups = len(d.spec)
    names = [f.name for f in d.spec]
    cards = np.array([f.cardinality for f in d.spec], dtype=np.float64)
    values = d.labels / (cards - 1.0)

    rng = rng_for(seed, "oracle-noise")
    noise = rng.normal(0.0, noise_sigma, size=(n, num_groups, group_dim - 1))
    reps = []
    for i in range(n):
        groups = []
        for g in range(num_groups):
            vec = np.empty(group_dim, dtype=np.float64)
            vec[0] = values[i, g]
            vec[1:] = noise[i, g]
            groups.append(vec)
        reps.append(LatentRep(groups=groups, group_names=list(names)))
    return reps


def mixing_matrix(dim: int, seed: int) -> np.ndarray:
    """Seeded random orthogonal (dim, dim) matrix (QR with positive R diag)."""
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    a = rng_for(seed, "mixing").normal(size=(dim, dim))
    q, r = np.linalg.qr(a)
    return q * np.sign(np.diag(r))


def encode_mixed(reps: Sequence[LatentRep], seed: int,
                 matrix: np.ndarray | None = None) -> list[LatentRep]:
    """Entangle everything: concatenate all groups, rotate by one fixed
    orthogonal matrix, and return the result as a single group per image.

    The default matrix is mixing_matrix(total_dim, seed); passing
    np.eye(total_dim) reduces the op to plain concatenation.
    """
    flat = concat_latents(reps)
    dim = flat.shape[1]
    if matrix is None:
        matrix = mixing_matrix(dim, seed)
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.shape != (dim, dim):
        raise ValueError(f"matrix must be ({dim}, {dim}), got {matrix.shape}")
    if np.max(np.abs(matrix.T @ matrix - np.eye(dim))) > 1e-8:
        raise ValueError("matrix is not orthogonal")
    mixed = flat @ matrix.T
    return [LatentRep(groups=[mixed[i]], group_names=["mixed"]) for i in range(len(mixed))]


def slot_anchors(num_slots: int, signature_dim: int, signature_sigma: float,
                 seed: int) -> np.ndarray:
    """Seeded per-group signature anchors, pairwise distance >= 10 * sigma."""
    anchors = rng_for(seed, "anchors").normal(size=(num_slots, signature_dim))
    if signature_sigma > 0 and num_slots > 1:
        gaps = [np.linalg.norm(anchors[i] - anchors[j])
                for i in range(num_slots) for j in range(i + 1, num_slots)]
        min_gap = min(gaps)
        if min_gap == 0:
            raise ValueError("degenerate anchors; use a different seed")
        needed = 10.0 * signature_sigma
        if min_gap < needed:
            anchors *= needed / min_gap
    return anchors


def encode_slots(reps: Sequence[LatentRep], signature_sigma: float, seed: int,
                 signature_dim: int = 8) -> list[SlotRep]:
    """Turn each group into a slot and shuffle slot order per image.

    A slot's signature is its group's anchor plus Gaussian(0, sigma^2) noise
    drawn per image; its content is the group vector unchanged. The applied
    permutation is recorded on the SlotRep for evaluation only.
    """
    if signature_sigma < 0:
        raise ValueError(f"signature_sigma must be >= 0, got {signature_sigma}")
    grouped = stack_groups(reps)
    num_slots = len(grouped)
    n = grouped[0].shape[0]
    anchors = slot_anchors(num_slots, signature_dim, signature_sigma, seed)

    perm_rng = rng_for(seed, "slot-perms")
    noise_rng = rng_for(seed, "slot-noise")
    out = []
    for i in range(n):
        perm = perm_rng.permutation(num_slots)
        slots = []
        for j in range(num_slots):
            g = perm[j]
            sig = anchors[g] + noise_rng.normal(0.0, signature_sigma, size=signature_dim)
            slots.append((sig, grouped[g][i].copy()))
        out.append(SlotRep(slots=slots, permutation=perm))
    return out


def _check_slot_reps(slot_reps: Sequence[SlotRep]) -> int:
    if not slot_reps:
        raise ValueError("no slot representations given")
    num_slots = len(slot_reps[0].slots)
    for i, rep in enumerate(slot_reps):
        if len(rep.slots) != num_slots:
            raise ValueError(f"image {i} has {len(rep.slots)} slots, expected {num_slots}")
    return num_slots


def _slot_cluster_ids(slot_reps: Sequence[SlotRep], seed: int) -> np.ndarray:
    """(n, S) cluster id per slot via K-Means over all pooled signatures."""
    num_slots = _check_slot_reps(slot_reps)
    n = len(slot_reps)
    if num_slots == 1:
        return np.zeros((n, 1), dtype=np.int64)
    pooled = np.stack([sig for rep in slot_reps for sig, _ in rep.slots])
    result = kmeans(pooled, num_slots, seed=subseed(seed, "align"))
    return result.labels.reshape(n, num_slots)


def align_slots(slot_reps: Sequence[SlotRep], seed: int) -> list[LatentRep]:
    """Recover a consistent group order by clustering slot signatures.

    All signatures are pooled and K-Means clustered with k equal to the slot
    count; each image's slots are then reordered by cluster id. If two slots
    of one image land in the same cluster there is no consistent order, and
    an AlignmentError carrying that image index is raised.
    """
    ids = _slot_cluster_ids(slot_reps, seed)
    num_slots = ids.shape[1]
    reps = []
    for i, rep in enumerate(slot_reps):
        if len(set(ids[i])) != num_slots:
            dupes = sorted(int(c) for c in ids[i] if list(ids[i]).count(c) > 1)
            raise AlignmentError(i, f"image {i}: multiple slots fell in cluster(s) {sorted(set(dupes))}")
        groups: list = [None] * num_slots
        for j in range(num_slots):
            groups[ids[i, j]] = rep.slots[j][1]
        reps.append(LatentRep(groups=groups, group_names=[f"slot{c}" for c in range(num_slots)]))
    return reps


def alignment_accuracy(slot_reps: Sequence[SlotRep], seed: int) -> float:
    """Fraction of images whose recovered order matches the recorded truth.

    Cluster ids are arbitrary, so clusters are first mapped to original group
    indices by majority vote; an image counts as aligned when every slot's
    cluster maps to exactly the group it came from.
    """
    ids = _slot_cluster_ids(slot_reps, seed)
    n, num_slots = ids.shape
    votes = np.zeros((num_slots, num_slots), dtype=np.int64)
    for i, rep in enumerate(slot_reps):
        for j in range(num_slots):
            votes[ids[i, j], rep.permutation[j]] += 1
    modal = np.argmax(votes, axis=1)
    correct = 0
    for i, rep in enumerate(slot_reps):
        if all(modal[ids[i, j]] == rep.permutation[j] for j in range(num_slots)):
            correct += 1
    return correct / n
