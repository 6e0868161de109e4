"""Meta-train on self-supervised tasks and watch the few-shot gain appear.

A scaled-down run of the full pipeline: render a dataset, build pseudo-class
episodes from per-dimension partitions of the disentangled latents, and
meta-train the usual two-layer network, snapshotting the initialization
every few epochs. Each snapshot is then scored on the same held-out
supervised episodes, so the printed curve shows query accuracy as a pure
function of meta-training progress. The entangled-latent ablation and the
fresh-initialization baseline are scored on identical episodes for
reference.

Well under a minute on one core at the default sizes.
"""

from __future__ import annotations

import argparse
from dataclasses import replace

from dress import desk_profile, evaluate, fsda_evaluate, subseed
from dress.config import DataConfig, EvalConfig, TrainConfig
from dress.experiments import (build_partitions, encode_dataset, make_dataset,
                               make_splits, model_inputs, supervised_episodes,
                               training_episodes, train_model)
from dress.nncore import default_arch


def bar(acc: float, lo: float = 0.45, hi: float = 1.0, width: int = 40) -> str:
    filled = round(width * max(0.0, acc - lo) / (hi - lo))
    return "#" * filled


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--count", type=int, default=3000)
    parser.add_argument("--resolution", type=int, default=16)
    parser.add_argument("--epochs", type=int, default=400)
    parser.add_argument("--snapshot-every", type=int, default=50)
    parser.add_argument("--eval-tasks", type=int, default=60)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    base = desk_profile()
    cfg = replace(base,
                  data=DataConfig(count=args.count, resolution=args.resolution),
                  train=replace(base.train, epochs=args.epochs),
                  eval=EvalConfig(tasks=args.eval_tasks))

    d = make_dataset(cfg, args.seed)
    train_d, test_d = make_splits(cfg, d, args.seed)
    train_x, test_x = model_inputs(train_d), model_inputs(test_d)
    test_eps = supervised_episodes(cfg, test_d, cfg.tasks.meta_test_factors,
                                   cfg.eval.tasks, args.seed)
    print(f"{len(train_d)} training images, {len(test_eps)} held-out episodes "
          f"on factors {', '.join(cfg.tasks.meta_test_factors)}\n")

    snapshots = {}

    def keep(state):
        if state.epoch % args.snapshot_every == 0 or state.epoch == cfg.train.epochs:
            snapshots[state.epoch] = state.phi.copy()

    arms = {}
    for mode in ("oracle", "mixed"):
        reps = encode_dataset(cfg, train_d, mode, args.seed)
        parts = build_partitions(cfg, reps, "dress", args.seed)
        episodes = training_episodes(cfg, parts, args.seed)
        state, arch = train_model(cfg, episodes, train_x, args.seed,
                                  on_progress=keep if mode == "oracle" else None)
        arms[mode] = evaluate(state.phi, arch, test_eps, test_x,
                              cfg.train.inner_steps, cfg.train.inner_lr)
        if mode == "oracle":
            curve = {e: evaluate(phi, arch, test_eps, test_x,
                                 cfg.train.inner_steps, cfg.train.inner_lr).mean
                     for e, phi in sorted(snapshots.items())}

    arch = default_arch(train_x.shape[1], cfg.tasks.way)
    fsda = fsda_evaluate(arch, test_eps, test_x, cfg.train.inner_steps,
                         cfg.train.inner_lr, subseed(args.seed, "fsda"))

    print("meta-training on disentangled pseudo-class episodes:")
    for epoch, acc in curve.items():
        print(f"  epoch {epoch:>4}  {acc:.3f} |{bar(acc)}")
    print(f"\nfinal query accuracy on the same held-out episodes")
    print(f"  disentangled episodes   {arms['oracle'].mean:.3f} |{bar(arms['oracle'].mean)}")
    print(f"  entangled ablation      {arms['mixed'].mean:.3f} |{bar(arms['mixed'].mean)}")
    print(f"  fresh-init baseline     {fsda.mean:.3f} |{bar(fsda.mean)}")
    print("\nthe initialization earns its gap before adaptation ever sees a "
          "labeled task.")


if __name__ == "__main__":
    main()
