"""End-to-end pipeline orchestration shared by the CLI and the test suite.

Each stage derives its own seed from the master seed and a stage name, so a
stage rerun in isolation (for example through the CLI from files on disk)
produces bit-identical results to the same stage inside a full in-memory
run. The desk-scale experiment matrix compares three methods on held-out
supervised tasks: per-dimension clustering of disentangled latents, the
same pipeline on entangled (mixed) latents, and direct adaptation from a
fresh initialization. Task diversity is measured on the training-side
partitions of the first two against whole-space baseline partitions and
ground-truth factor partitions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import Partition, cactus_partitions, cluster_per_dimension, factor_partitions
from .config import RunConfig
from .datagen import Dataset, default_factor_specs, generate_dataset, split_dataset
from .diversity import mean_pairwise_diversity
from .encoders import (LatentRep, align_slots, concat_latents, encode_mixed,
                       encode_oracle, encode_slots, stack_groups)
from .metalearn import EvalReport, MetaState, evaluate, fsda_evaluate, meta_train
from .nncore import MLPArch, default_arch
from .seeding import subseed
from .taskgen import Episode, TaskSetup, build_task_stream, sample_supervised_task

ENCODER_MODES = ("oracle", "mixed", "slots")
PARTITION_MODES = ("dress", "cactus")
SUPERVISED_MODES = ("supervised-original", "supervised-all", "supervised-oracle")


def task_setup(cfg: RunConfig) -> TaskSetup:
    return TaskSetup(way=cfg.tasks.way, shots=cfg.tasks.shots, queries=cfg.tasks.queries)


def make_dataset(cfg: RunConfig, master_seed: int) -> Dataset:
    return generate_dataset(default_factor_specs(), cfg.data.count,
                            cfg.data.resolution, subseed(master_seed, "data"))


def make_splits(cfg: RunConfig, d: Dataset, master_seed: int) -> tuple[Dataset, Dataset]:
    return split_dataset(d, cfg.data.train_fraction, subseed(master_seed, "split"))


def model_inputs(d: Dataset) -> np.ndarray:
    """Flattened pixels centered by the dataset's per-feature mean.

    Raw pixels are non-negative (backdrop features even sit in a narrow
    bright band), so every first-layer pre-activation would share the sign
    of its weight row's input sum; a rectified unit that drifts negative
    then has zero gradient on every image and stays dead for the rest of
    meta-training. Mean-centering each feature removes that absorbing state
    regardless of the palette.
    """
    flat = d.flat_images()
    return flat - flat.mean(axis=0)


def encode_slot_reps(cfg: RunConfig, d: Dataset, master_seed: int):
    """Per-image slot codes in a randomly permuted, unaligned order."""
    seed = subseed(master_seed, "encode")
    reps = encode_oracle(d, cfg.encoder.group_dim, cfg.encoder.noise_sigma, seed)
    return encode_slots(reps, cfg.encoder.signature_sigma, seed,
                        signature_dim=cfg.encoder.signature_dim)


def encode_dataset(cfg: RunConfig, d: Dataset, mode: str, master_seed: int) -> list[LatentRep]:
    """Latent representations for every image, already aligned."""
    if mode not in ENCODER_MODES:
        raise ValueError(f"unknown encoder mode {mode!r}; expected one of {ENCODER_MODES}")
    if mode == "slots":
        return align_slots(encode_slot_reps(cfg, d, master_seed),
                           subseed(master_seed, "align"))
    seed = subseed(master_seed, "encode")
    reps = encode_oracle(d, cfg.encoder.group_dim, cfg.encoder.noise_sigma, seed)
    if mode == "oracle":
        return reps
    return encode_mixed(reps, seed)


def build_partitions(cfg: RunConfig, reps: list[LatentRep], mode: str,
                     master_seed: int) -> list[Partition]:
    if mode == "dress":
        groups = stack_groups(reps)
        return cluster_per_dimension(groups, cfg.cluster.k, subseed(master_seed, "cluster"),
                                     max_components=cfg.cluster.max_components,
                                     names=reps[0].group_names)
    if mode == "cactus":
        return cactus_partitions(concat_latents(reps), cfg.cluster.cactus_scalings,
                                 cfg.cluster.cactus_k, subseed(master_seed, "cactus"))
    raise ValueError(f"unknown partition mode {mode!r}; expected one of {PARTITION_MODES}")


def ground_truth_partitions(d: Dataset) -> list[Partition]:
    return factor_partitions(d.labels, [f.cardinality for f in d.spec],
                             [f.name for f in d.spec])


def factor_indices(d: Dataset, names) -> list[int]:
    return [d.factor_index(n) for n in names]


def supervised_factor_names(cfg: RunConfig, mode: str) -> list:
    """Factor subsets for the three supervised task modes: factors held out
    from meta-testing, all factors, or exactly the meta-testing factors."""
    if mode == "supervised-original":
        return cfg.meta_train_factors()
    if mode == "supervised-all":
        return [f.name for f in default_factor_specs()]
    if mode == "supervised-oracle":
        return list(cfg.tasks.meta_test_factors)
    raise ValueError(f"unknown supervised mode {mode!r}; expected one of {SUPERVISED_MODES}")


def training_episodes(cfg: RunConfig, partitions: list[Partition],
                      master_seed: int, count: int | None = None) -> list[Episode]:
    """Materialized self-supervised episode list for meta-training."""
    if count is None:
        count = cfg.train.epochs * cfg.train.meta_batch
    stream = build_task_stream(partitions, task_setup(cfg), cfg.train.meta_batch,
                               subseed(master_seed, "tasks"), num_epochs=None)
    return [next(stream) for _ in range(count)]


def supervised_episodes(cfg: RunConfig, d: Dataset, factor_names, count: int,
                        master_seed: int, stage: str = "test-tasks") -> list[Episode]:
    setup = task_setup(cfg)
    subset = factor_indices(d, factor_names)
    seed = subseed(master_seed, stage)
    return [sample_supervised_task(d, subset, setup, max_attrs=cfg.tasks.max_attrs,
                                   seed=subseed(seed, "task", t))
            for t in range(count)]


def train_model(cfg: RunConfig, episodes, inputs: np.ndarray, master_seed: int,
                arch: MLPArch | None = None,
                initial_state: MetaState | None = None,
                on_checkpoint=None, on_progress=None) -> tuple[MetaState, MLPArch]:
    if arch is None:
        arch = default_arch(inputs.shape[1], cfg.tasks.way)
    state = meta_train(episodes, inputs, arch, subseed(master_seed, "train"),
                       epochs=cfg.train.epochs, meta_batch=cfg.train.meta_batch,
                       inner_steps=cfg.train.inner_steps, inner_lr=cfg.train.inner_lr,
                       outer_lr=cfg.train.outer_lr,
                       checkpoint_every=cfg.train.checkpoint_every,
                       on_checkpoint=on_checkpoint, on_progress=on_progress,
                       initial_state=initial_state)
    return state, arch


@dataclass(frozen=True)
class SeedResult:
    """One master seed's slice of the experiment matrix."""
    seed: int
    dress: EvalReport
    mixed: EvalReport
    fsda: EvalReport
    dress_diversity: float
    cactus_diversity: float
    factor_diversity: float


def run_seed(cfg: RunConfig, master_seed: int, hash_tag: str = "",
             on_progress=None) -> SeedResult:
    """Full pipeline for one master seed.

    The disentangled and mixed variants share the dataset, the split, the
    meta-test episodes, and every stage seed; only the encoding differs, so
    accuracy deltas isolate the effect of entangling the latents.
    """
    d = make_dataset(cfg, master_seed)
    train_d, test_d = make_splits(cfg, d, master_seed)
    del d
    train_inputs = model_inputs(train_d)
    test_inputs = model_inputs(test_d)
    setup_meta = {"config_hash": hash_tag, "seed": master_seed}

    test_eps = supervised_episodes(cfg, test_d, cfg.tasks.meta_test_factors,
                                   cfg.eval.tasks, master_seed)

    reports = {}
    partitions = {}
    for mode in ("oracle", "mixed"):
        reps = encode_dataset(cfg, train_d, mode, master_seed)
        partitions[mode] = build_partitions(cfg, reps, "dress", master_seed)
        if mode == "oracle":
            cactus = build_partitions(cfg, reps, "cactus", master_seed)
        del reps
        episodes = training_episodes(cfg, partitions[mode], master_seed)
        state, arch = train_model(cfg, episodes, train_inputs, master_seed,
                                  on_progress=on_progress)
        reports[mode] = evaluate(state.phi, arch, test_eps, test_inputs,
                                 cfg.train.inner_steps, cfg.train.inner_lr,
                                 metadata=dict(setup_meta, method=f"dress-{mode}"))

    arch = default_arch(train_inputs.shape[1], cfg.tasks.way)
    fsda = fsda_evaluate(arch, test_eps, test_inputs, cfg.train.inner_steps,
                         cfg.train.inner_lr, subseed(master_seed, "fsda"),
                         metadata=dict(setup_meta, method="fsda"))

    factors = ground_truth_partitions(train_d)
    return SeedResult(
        seed=master_seed,
        dress=reports["oracle"],
        mixed=reports["mixed"],
        fsda=fsda,
        dress_diversity=mean_pairwise_diversity(partitions["oracle"]),
        cactus_diversity=mean_pairwise_diversity(cactus),
        factor_diversity=mean_pairwise_diversity(factors),
    )


@dataclass(frozen=True)
class MatrixResult:
    config_hash: str
    seeds: tuple
    results: tuple  # SeedResult per seed, in seed order

    def method_means(self, method: str) -> list:
        return [getattr(r, method).mean for r in self.results]

    def summary(self) -> dict:
        out = {"config_hash": self.config_hash, "seeds": list(self.seeds),
               "methods": {}, "diversity": {}}
        for method in ("dress", "mixed", "fsda"):
            means = self.method_means(method)
            out["methods"][method] = {
                "per_seed": means,
                "mean": float(np.mean(means)),
                "std": float(np.std(means)),
            }
        for family in ("dress_diversity", "cactus_diversity", "factor_diversity"):
            values = [getattr(r, family) for r in self.results]
            out["diversity"][family] = {
                "per_seed": values,
                "mean": float(np.mean(values)),
            }
        return out


METHOD_TITLES = {
    "dress": "DRESS (per-dimension clustering)",
    "mixed": "DRESS on mixed latents (ablation)",
    "fsda": "Few-shot direct adaptation",
}

DIVERSITY_TITLES = {
    "dress_diversity": "DRESS partitions",
    "cactus_diversity": "Whole-space baseline partitions",
    "factor_diversity": "Ground-truth factor partitions",
}


def run_matrix(cfg: RunConfig, hash_tag: str = "", on_progress=None) -> MatrixResult:
    results = [run_seed(cfg, s, hash_tag, on_progress=on_progress) for s in cfg.seeds]
    return MatrixResult(config_hash=hash_tag, seeds=tuple(cfg.seeds),
                        results=tuple(results))


def task_grid_image(d: Dataset, episode: Episode, pad: int = 2) -> np.ndarray:
    """Composite uint8 image of one episode: a row per class, support cells
    left of a doubled gap, query cells right, white padding throughout."""
    res = d.resolution
    cols = episode.shots + episode.queries
    height = episode.way * res + (episode.way + 1) * pad
    width = cols * res + (cols + 1) * pad + 2 * pad
    grid = np.full((height, width, 3), 255, dtype=np.uint8)
    by_class: dict = {c: [] for c in range(episode.way)}
    for idx, cls in episode.support:
        by_class[cls].append((idx, 0))
    for idx, cls in episode.query:
        by_class[cls].append((idx, 1))
    for cls in range(episode.way):
        top = pad + cls * (res + pad)
        col = 0
        for idx, is_query in by_class[cls]:
            left = pad + col * (res + pad) + (2 * pad if is_query else 0)
            cell = np.clip(d.images[idx] * 255.0, 0, 255).astype(np.uint8)
            grid[top:top + res, left:left + res] = cell
            col += 1
    return grid


def summary_table(matrix: MatrixResult) -> str:
    """Accuracy rows as mean +/- std over per-seed means, then the task
    diversity block."""
    s = matrix.summary()
    width = max(len(t) for t in list(METHOD_TITLES.values()) + list(DIVERSITY_TITLES.values()))
    lines = [f"{'Method':<{width}}  Accuracy (mean +/- std over seeds)"]
    for method, title in METHOD_TITLES.items():
        m = s["methods"][method]
        lines.append(f"{title:<{width}}  {100 * m['mean']:.2f}% +/- {100 * m['std']:.2f}%")
    lines.append("")
    lines.append(f"{'Task source':<{width}}  Mean pairwise task diversity")
    for family, title in DIVERSITY_TITLES.items():
        lines.append(f"{title:<{width}}  {s['diversity'][family]['mean']:.4f}")
    return "\n".join(lines) + "\n"
