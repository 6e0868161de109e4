"""Compare the three partition families feeding the task sampler.

Per-dimension clustering (PCA to one component, then k-means inside each
latent group) should produce one partition per factor whose clusters are
nearly pure in that factor and uninformative about the others. Clustering
the entangled rotation of the same latents yields one partition locked to a
single blended direction, so the remaining factors lose their dedicated
partitions. The whole-space baseline (k-means over random diagonal
rescalings of the concatenated latents) lands in between and its partitions
resemble each other, which the pairwise diversity score picks up.

Purity of a partition with respect to a factor: assign every cluster its
majority value of that factor, then count the fraction of images matching
their cluster's majority. 1.0 means the partition never mixes two values.
"""

from __future__ import annotations

import argparse

import numpy as np

from dress import (cactus_partitions, cluster_per_dimension, concat_latents,
                   default_factor_specs, desk_profile, diversity_score,
                   encode_mixed, encode_oracle, factor_partitions,
                   generate_dataset, mean_pairwise_diversity, stack_groups)


def majority_purity(cluster_labels: np.ndarray, values: np.ndarray) -> float:
    total = 0
    for c in np.unique(cluster_labels):
        total += np.bincount(values[cluster_labels == c]).max()
    return total / len(values)


def purity_row(part, d) -> str:
    return " ".join(f"{majority_purity(part.labels, d.labels[:, f]):>9.3f}"
                    for f in range(d.labels.shape[1]))


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--count", type=int, default=4000)
    parser.add_argument("--resolution", type=int, default=16)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    cfg = desk_profile()
    spec = default_factor_specs()
    names = [f.name for f in spec]
    d = generate_dataset(spec, args.count, args.resolution, args.seed)
    reps = encode_oracle(d, cfg.encoder.group_dim, cfg.encoder.noise_sigma, args.seed)

    header = " ".join(f"{n[:9]:>9}" for n in names)
    print(f"cluster purity with respect to each factor "
          f"(k={cfg.cluster.k}, {args.count} images)")
    print(f"{'partition':<22} {header}")

    dress = cluster_per_dimension(stack_groups(reps), cfg.cluster.k, args.seed,
                                  max_components=cfg.cluster.max_components,
                                  names=names)
    for part in dress:
        print(f"{part.source:<22} {purity_row(part, d)}")
    print("each per-dimension partition is pure in exactly its own factor.\n")

    mixed = encode_mixed(reps, args.seed)
    (mixed_part,) = cluster_per_dimension(stack_groups(mixed), cfg.cluster.k,
                                          args.seed,
                                          max_components=cfg.cluster.max_components,
                                          names=["all"])
    print(f"{'entangled:all-in-one':<22} {purity_row(mixed_part, d)}")
    print("the entangled rotation leaves one partition along one blended\n"
          "direction (here it happens to track the largest-variance factor);\n"
          "the other factors no longer have any partition of their own.\n")

    cactus = cactus_partitions(concat_latents(reps), cfg.cluster.cactus_scalings,
                               cfg.cluster.cactus_k, args.seed)
    for part in cactus[:3]:
        print(f"{part.source:<22} {purity_row(part, d)}")
    print(f"... {len(cactus)} whole-space partitions total; every rescaling "
          f"mixes several factors.\n")

    factors = factor_partitions(d.labels, [f.cardinality for f in spec], names)
    same = diversity_score(dress[0], dress[0])
    print(f"diversity anchor: a partition against itself scores {same.score:.1f}")
    print(f"mean pairwise task diversity")
    for label, parts in (("per-dimension", dress), ("whole-space", cactus),
                         ("ground-truth factors", factors)):
        print(f"  {label:<22} {mean_pairwise_diversity(parts):.4f}")
    print("per-dimension partitions are at least as diverse as the factors\n"
          "themselves; the whole-space family repeats itself and scores lower.")


if __name__ == "__main__":
    main()
