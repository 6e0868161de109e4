"""Inspect the three latent encoders on one small dataset.

The disentangled encoder stores each ground-truth factor in its own group:
coordinate 0 tracks the factor value exactly, the remaining coordinates are
distractor noise for PCA to throw away. The entangled variant rotates the
concatenation of all groups by a fixed orthogonal matrix, which preserves
every distance but smears each factor across all coordinates. The slot
encoder shuffles the groups per image and alignment has to undo that from
signature vectors alone. This script prints the evidence for all three.
"""

from __future__ import annotations

import argparse

import numpy as np

from dress import (alignment_accuracy, align_slots, concat_latents,
                   default_factor_specs, encode_mixed, encode_oracle,
                   encode_slots, generate_dataset, stack_groups)


def corr(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.corrcoef(a, b)[0, 1])


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--count", type=int, default=3000)
    parser.add_argument("--resolution", type=int, default=16)
    parser.add_argument("--group-dim", type=int, default=2)
    parser.add_argument("--noise-sigma", type=float, default=0.05)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    spec = default_factor_specs()
    d = generate_dataset(spec, args.count, args.resolution, args.seed)
    print(f"dataset: {len(d)} images, {len(spec)} factors\n")

    print(f"disentangled oracle (group_dim={args.group_dim}, "
          f"sigma={args.noise_sigma})")
    reps = encode_oracle(d, args.group_dim, args.noise_sigma, args.seed)
    groups = stack_groups(reps)
    print(f"{'group':<18} {'corr(coord 0, factor)':>22} {'corr(coord 1, factor)':>22}")
    for g, f in enumerate(spec):
        c0 = corr(groups[g][:, 0], d.labels[:, g])
        c1 = corr(groups[g][:, 1], d.labels[:, g]) if args.group_dim > 1 else float("nan")
        print(f"{f.name:<18} {c0:>22.4f} {c1:>22.4f}")
    print("coordinate 0 is the factor; the rest is noise.\n")

    print("entangled variant (same groups, one orthogonal rotation)")
    mixed = encode_mixed(reps, args.seed)
    z = concat_latents(reps)
    zm = concat_latents(mixed)
    norm_drift = np.max(np.abs(np.linalg.norm(zm, axis=1) - np.linalg.norm(z, axis=1)))
    print(f"single group of dim {zm.shape[1]}; "
          f"max per-image norm change {norm_drift:.2e} (isometry)")
    print(f"{'factor':<18} {'best |corr|, any coordinate':>28}")
    for g, f in enumerate(spec):
        best = max(abs(corr(zm[:, j], d.labels[:, g])) for j in range(zm.shape[1]))
        print(f"{f.name:<18} {best:>28.4f}")
    print("exact single-coordinate readout is gone; factors survive only as\n"
          "directions of the rotated space, which per-dimension clustering\n"
          "cannot see (the partition demo quantifies the damage).\n")

    print("slot encoder (groups shuffled per image) and alignment")
    slot_reps = encode_slots(reps, signature_sigma=0.01, seed=args.seed)
    perm = slot_reps[0].permutation
    print(f"image 0 stores its groups in shuffled order {perm.tolist()}")
    aligned = align_slots(slot_reps, args.seed)
    acc = alignment_accuracy(slot_reps, args.seed)
    print(f"alignment recovers the ground-truth order for {100 * acc:.2f}% of images")
    merged = stack_groups(aligned)
    match = [max(abs(corr(merged[s][:, 0], d.labels[:, g])) for g in range(len(spec)))
             for s in range(len(merged))]
    print("after alignment each slot again tracks exactly one factor: "
          + ", ".join(f"slot{s}->|corr|={m:.3f}" for s, m in enumerate(match)))


if __name__ == "__main__":
    main()
