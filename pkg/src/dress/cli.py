"""Command line interface: one subcommand per pipeline stage.

Stages communicate through files only, so any stage can be rerun, cached,
or inspected in isolation. Every output embeds the sha256 hash of the
config that produced it; subcommands refuse input files whose embedded
hash differs from the active config. Exit codes: 0 success, 2 validation
error (bad flags, bad config, missing inputs, hash mismatch), 1 runtime
error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from . import experiments, fileio
from .config import (ConfigError, RunConfig, config_hash, desk_profile,
                     load_config, paper_profile, save_config)
from .diversity import pairwise_scores
from .encoders import align_slots, alignment_accuracy
from .metalearn import evaluate, fsda_evaluate
from .nncore import default_arch, num_params
from .seeding import subseed

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_VALIDATION = 2


class ValidationFailure(Exception):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid invocation:\n" + "\n".join(f"  - {p}" for p in self.problems))


def _require(problems: list, paths_exist=(), flags=()):
    """Collect every validation problem, then fail once."""
    for path in paths_exist:
        if path is not None and not os.path.exists(path):
            problems.append(f"input not found: {path}")
    problems.extend(flags)
    if problems:
        raise ValidationFailure(problems)


def _check_hashes(active_hash: str, *loaded):
    """loaded: (path, trailer) pairs; a None trailer (foreign file) passes."""
    bad = [f"{path}: written under config {trailer[:12]}..., current config is "
           f"{active_hash[:12]}... (regenerate the file or fix --config)"
           for path, trailer in loaded
           if trailer is not None and trailer != active_hash]
    if bad:
        raise ValidationFailure(bad)


def _load_partition_dir(path: str) -> list:
    files = sorted(f for f in os.listdir(path) if f.endswith(".drsp"))
    if not files:
        raise ValidationFailure([f"{path}: no .drsp partition files"])
    loaded = [fileio.load_partition(os.path.join(path, f)) for f in files]
    return [(os.path.join(path, f), part, trailer)
            for f, (part, trailer) in zip(files, loaded)]


def cmd_gen_data(args, cfg: RunConfig, h: str, seed: int) -> int:
    _require([], flags=[] if (args.out or args.train_out or args.test_out)
             else ["nothing to write: pass --out, --train-out, or --test-out"])
    d = experiments.make_dataset(cfg, seed)
    if args.out:
        fileio.save_dataset(args.out, d, config_hash=h)
        print(f"wrote {args.out}: {len(d)} images at {d.resolution}x{d.resolution}")
    if args.train_out or args.test_out:
        train_d, test_d = experiments.make_splits(cfg, d, seed)
        if args.train_out:
            fileio.save_dataset(args.train_out, train_d, config_hash=h)
            print(f"wrote {args.train_out}: {len(train_d)} training images")
        if args.test_out:
            fileio.save_dataset(args.test_out, test_d, config_hash=h)
            print(f"wrote {args.test_out}: {len(test_d)} held-out images")
    return EXIT_OK


def cmd_encode(args, cfg: RunConfig, h: str, seed: int) -> int:
    _require([], paths_exist=[args.data])
    d, trailer = fileio.load_dataset(args.data)
    _check_hashes(h, (args.data, trailer))
    if args.mode == "slots":
        slot_reps = experiments.encode_slot_reps(cfg, d, seed)
        fileio.save_slots(args.out, slot_reps, config_hash=h)
        print(f"wrote {args.out}: {len(slot_reps)} slot codes, "
              f"{len(slot_reps[0].slots)} slots each (unaligned)")
    else:
        reps = experiments.encode_dataset(cfg, d, args.mode, seed)
        fileio.save_latents(args.out, reps, config_hash=h)
        print(f"wrote {args.out}: {len(reps)} latents, groups {reps[0].group_names}")
    return EXIT_OK


def cmd_align(args, cfg: RunConfig, h: str, seed: int) -> int:
    _require([], paths_exist=[args.slots])
    slot_reps, trailer = fileio.load_slots(args.slots)
    _check_hashes(h, (args.slots, trailer))
    align_seed = subseed(seed, "align")
    reps = align_slots(slot_reps, align_seed)
    fileio.save_latents(args.out, reps, config_hash=h)
    accuracy = alignment_accuracy(slot_reps, align_seed)
    report = {"images": len(reps), "alignment_accuracy": accuracy, "config_hash": h}
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    print(f"wrote {args.out}: aligned {len(reps)} images, "
          f"ground-truth order recovered for {100 * accuracy:.2f}%")
    return EXIT_OK


def cmd_cluster(args, cfg: RunConfig, h: str, seed: int) -> int:
    _require([], paths_exist=[args.latents])
    reps, trailer = fileio.load_latents(args.latents)
    _check_hashes(h, (args.latents, trailer))
    partitions = experiments.build_partitions(cfg, reps, args.mode, seed)
    os.makedirs(args.out, exist_ok=True)
    for i, part in enumerate(partitions):
        fileio.save_partition(os.path.join(args.out, f"partition-{i:03d}.drsp"),
                              part, config_hash=h)
    print(f"wrote {len(partitions)} partition files to {args.out}")
    return EXIT_OK


def cmd_make_tasks(args, cfg: RunConfig, h: str, seed: int) -> int:
    problems = []
    if args.mode == "dress" and not args.partitions:
        problems.append("--mode dress requires --partitions DIR")
    if args.mode != "dress" and not args.data:
        problems.append(f"--mode {args.mode} requires --data PATH")
    _require(problems, paths_exist=[args.partitions, args.data])
    if args.mode == "dress":
        entries = _load_partition_dir(args.partitions)
        _check_hashes(h, *[(p, t) for p, _, t in entries])
        partitions = [part for _, part, _ in entries]
        count = args.count or cfg.train.epochs * cfg.train.meta_batch
        episodes = experiments.training_episodes(cfg, partitions, seed, count)
    else:
        d, trailer = fileio.load_dataset(args.data)
        _check_hashes(h, (args.data, trailer))
        names = experiments.supervised_factor_names(cfg, args.mode)
        count = args.count or cfg.eval.tasks
        episodes = experiments.supervised_episodes(cfg, d, names, count, seed)
    fileio.save_episodes(args.out, episodes, config_hash=h)
    print(f"wrote {args.out}: {len(episodes)} episodes ({args.mode})")
    return EXIT_OK


def cmd_meta_train(args, cfg: RunConfig, h: str, seed: int) -> int:
    _require([], paths_exist=[args.data, args.tasks, args.resume])
    d, d_trailer = fileio.load_dataset(args.data)
    episodes, e_trailer = fileio.load_episodes(args.tasks)
    _check_hashes(h, (args.data, d_trailer), (args.tasks, e_trailer))
    needed = cfg.train.epochs * cfg.train.meta_batch
    if len(episodes) < needed:
        raise ValidationFailure([
            f"{args.tasks}: {len(episodes)} episodes, but "
            f"{cfg.train.epochs} epochs x {cfg.train.meta_batch} per batch needs {needed}"])
    inputs = experiments.model_inputs(d)
    arch = default_arch(inputs.shape[1], cfg.tasks.way)
    initial_state = None
    if args.resume:
        ck_arch, phi, adam, ck_trailer = fileio.load_checkpoint(args.resume)
        _check_hashes(h, (args.resume, ck_trailer))
        if ck_arch != arch:
            raise ValidationFailure([
                f"{args.resume}: checkpoint architecture {ck_arch.layer_sizes} "
                f"does not match data/config architecture {arch.layer_sizes}"])
        initial_state = fileio.checkpoint_to_state(
            ck_arch, phi, adam,
            {"inner_steps": cfg.train.inner_steps, "inner_lr": cfg.train.inner_lr,
             "outer_lr": cfg.train.outer_lr})
        print(f"resuming from {args.resume} at epoch {initial_state.epoch}")
    trace = []

    def on_progress(state):
        trace.append((state.epoch, state.query_loss))
        if args.progress_every and state.epoch % args.progress_every == 0:
            print(f"epoch {state.epoch}/{cfg.train.epochs} "
                  f"query loss {state.query_loss:.4f}", file=sys.stderr)

    def on_checkpoint(state):
        fileio.save_checkpoint(args.out, arch, state.phi, state.adam, config_hash=h)

    state, arch = experiments.train_model(cfg, episodes, inputs, seed, arch=arch,
                                          initial_state=initial_state,
                                          on_checkpoint=on_checkpoint,
                                          on_progress=on_progress)
    fileio.save_checkpoint(args.out, arch, state.phi, state.adam, config_hash=h)
    trace_path = args.loss_trace or args.out + ".loss.csv"
    with open(trace_path, "w", encoding="utf-8") as fh:
        fh.write(f"# config_hash={h}\n")
        fh.write("epoch,query_loss\n")
        for epoch, loss in trace:
            fh.write(f"{epoch},{loss!r}\n")
    print(f"wrote {args.out}: {num_params(arch)} parameters after epoch {state.epoch}; "
          f"loss trace in {trace_path}")
    return EXIT_OK


def cmd_evaluate(args, cfg: RunConfig, h: str, seed: int) -> int:
    problems = []
    if args.baseline == "none" and not args.checkpoint:
        problems.append("--baseline none requires --checkpoint PATH")
    if args.baseline == "fsda" and args.checkpoint:
        problems.append("contradictory flags: --baseline fsda ignores meta-training, "
                        "so --checkpoint must not be given")
    _require(problems, paths_exist=[args.data, args.tasks, args.checkpoint])
    d, d_trailer = fileio.load_dataset(args.data)
    episodes, e_trailer = fileio.load_episodes(args.tasks)
    _check_hashes(h, (args.data, d_trailer), (args.tasks, e_trailer))
    inputs = experiments.model_inputs(d)
    meta = {"config_hash": h, "seed": seed}
    if args.baseline == "none":
        arch, phi, _, ck_trailer = fileio.load_checkpoint(args.checkpoint)
        _check_hashes(h, (args.checkpoint, ck_trailer))
        report = evaluate(phi, arch, episodes, inputs, cfg.train.inner_steps,
                          cfg.train.inner_lr, metadata=dict(meta, method="meta-trained"))
    else:
        arch = default_arch(inputs.shape[1], cfg.tasks.way)
        report = fsda_evaluate(arch, episodes, inputs, cfg.train.inner_steps,
                               cfg.train.inner_lr, subseed(seed, "fsda"),
                               metadata=dict(meta, method="fsda"))
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(report.to_jsonl())
    print(f"wrote {args.out}: mean accuracy {100 * report.mean:.2f}% "
          f"+/- {100 * report.std:.2f}% over {report.task_count} tasks")
    return EXIT_OK


def cmd_diversity(args, cfg: RunConfig, h: str, seed: int) -> int:
    entries = _load_partition_dir(args.partitions)
    _check_hashes(h, *[(p, t) for p, _, t in entries])
    partitions = [part for _, part, _ in entries]
    if len(partitions) < 2:
        raise ValidationFailure([f"{args.partitions}: need at least 2 partitions, "
                                 f"found {len(partitions)}"])
    scores = pairwise_scores(partitions)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(f"# config_hash={h}\n")
        fh.write("source1,source2,avg_iou,score\n")
        for s in scores:
            fh.write(f"{s.pair[0]},{s.pair[1]},{s.avg_iou!r},{s.score!r}\n")
        mean_iou = float(np.mean([s.avg_iou for s in scores]))
        mean_score = float(np.mean([s.score for s in scores]))
        fh.write(f"mean,,{mean_iou!r},{mean_score!r}\n")
    print(f"wrote {args.out}: {len(scores)} pairs, "
          f"mean pairwise diversity {mean_score:.4f}")
    return EXIT_OK


def cmd_export_task_grid(args, cfg: RunConfig, h: str, seed: int) -> int:
    _require([], paths_exist=[args.data, args.tasks])
    d, d_trailer = fileio.load_dataset(args.data)
    episodes, e_trailer = fileio.load_episodes(args.tasks)
    _check_hashes(h, (args.data, d_trailer), (args.tasks, e_trailer))
    if not 0 <= args.index < len(episodes):
        raise ValidationFailure([f"--index {args.index} out of range "
                                 f"(file has {len(episodes)} episodes)"])
    episode = episodes[args.index]
    grid = experiments.task_grid_image(d, episode)
    fileio.save_ppm(args.out, grid, comment=f"config_hash={h}")
    print(f"wrote {args.out}: {grid.shape[1]}x{grid.shape[0]} grid of "
          f"episode {args.index} ({episode.source})")
    return EXIT_OK


def cmd_repro(args, cfg: RunConfig, h: str, seed: int) -> int:
    os.makedirs(args.out, exist_ok=True)
    summary_path = os.path.join(args.out, "summary.json")
    if os.path.exists(summary_path):
        with open(summary_path, "r", encoding="utf-8") as fh:
            previous = json.load(fh).get("config_hash")
        if previous != h:
            raise ValidationFailure([
                f"{args.out}: holds results for config {str(previous)[:12]}..., "
                f"current config is {h[:12]}...; clean the directory or fix --config"])
    results = []
    for s in cfg.seeds:
        r = experiments.run_seed(cfg, s, hash_tag=h)
        results.append(r)
        print(f"seed {s}: dress {100 * r.dress.mean:.2f}%  "
              f"mixed {100 * r.mixed.mean:.2f}%  fsda {100 * r.fsda.mean:.2f}%  "
              f"diversity d/c/f {r.dress_diversity:.3f}/"
              f"{r.cactus_diversity:.3f}/{r.factor_diversity:.3f}", file=sys.stderr)
        for method in ("dress", "mixed", "fsda"):
            path = os.path.join(args.out, f"{method}-seed{s}.jsonl")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(getattr(r, method).to_jsonl())
    matrix = experiments.MatrixResult(config_hash=h, seeds=tuple(cfg.seeds),
                                      results=tuple(results))
    save_config(os.path.join(args.out, "config.json"), cfg)
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(matrix.summary(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    table = experiments.summary_table(matrix)
    with open(os.path.join(args.out, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write(f"config {h}\n\n{table}")
    with open(os.path.join(args.out, "diversity.csv"), "w", encoding="utf-8") as fh:
        fh.write(f"# config_hash={h}\n")
        fh.write("seed,partition_family,mean_pairwise_diversity\n")
        for r in results:
            fh.write(f"{r.seed},dress,{r.dress_diversity!r}\n")
            fh.write(f"{r.seed},cactus,{r.cactus_diversity!r}\n")
            fh.write(f"{r.seed},factors,{r.factor_diversity!r}\n")
    print(table)
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dress",
        description="Self-supervised few-shot task construction from "
                    "disentangled latents, with meta-training and baselines.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help="JSON run configuration (default: desk profile)")
    common.add_argument("--profile", choices=("desk", "paper"),
                        help="built-in profile; cannot be combined with --config")
    common.add_argument("--seed", type=int, metavar="U64",
                        help="master seed (default: first seed in the config)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", parents=[common],
                       help="render the procedural dataset")
    p.add_argument("--out", metavar="PATH", help="full dataset file")
    p.add_argument("--train-out", metavar="PATH", help="training split file")
    p.add_argument("--test-out", metavar="PATH", help="held-out split file")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("encode", parents=[common],
                       help="compute latent representations")
    p.add_argument("--data", required=True, metavar="PATH")
    p.add_argument("--mode", required=True, choices=experiments.ENCODER_MODES)
    p.add_argument("--out", required=True, metavar="PATH")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("align", parents=[common],
                       help="order slot codes consistently across images")
    p.add_argument("--slots", required=True, metavar="PATH")
    p.add_argument("--out", required=True, metavar="PATH", help="aligned latent file")
    p.add_argument("--report", metavar="PATH", help="alignment accuracy JSON")
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("cluster", parents=[common],
                       help="build pseudo-class partitions from latents")
    p.add_argument("--latents", required=True, metavar="PATH")
    p.add_argument("--mode", required=True, choices=experiments.PARTITION_MODES)
    p.add_argument("--out", required=True, metavar="DIR")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("make-tasks", parents=[common],
                       help="sample few-shot episodes")
    p.add_argument("--mode", required=True,
                   choices=("dress",) + experiments.SUPERVISED_MODES)
    p.add_argument("--partitions", metavar="DIR", help="partition dir (dress mode)")
    p.add_argument("--data", metavar="PATH", help="dataset file (supervised modes)")
    p.add_argument("--count", type=int, metavar="N",
                   help="episodes to write (default: epochs x meta-batch for "
                        "dress, evaluation task count for supervised modes)")
    p.add_argument("--out", required=True, metavar="PATH")
    p.set_defaults(func=cmd_make_tasks)

    p = sub.add_parser("meta-train", parents=[common],
                       help="first-order meta-training over an episode file")
    p.add_argument("--data", required=True, metavar="PATH")
    p.add_argument("--tasks", required=True, metavar="PATH")
    p.add_argument("--out", required=True, metavar="PATH", help="checkpoint file")
    p.add_argument("--resume", metavar="PATH", help="checkpoint to continue from")
    p.add_argument("--loss-trace", metavar="PATH",
                   help="query-loss CSV (default: OUT.loss.csv)")
    p.add_argument("--progress-every", type=int, default=0, metavar="N",
                   help="print query loss every N epochs")
    p.set_defaults(func=cmd_meta_train)

    p = sub.add_parser("evaluate", parents=[common],
                       help="score a model on an episode file")
    p.add_argument("--data", required=True, metavar="PATH")
    p.add_argument("--tasks", required=True, metavar="PATH")
    p.add_argument("--checkpoint", metavar="PATH")
    p.add_argument("--baseline", choices=("none", "fsda"), default="none")
    p.add_argument("--out", required=True, metavar="PATH", help="JSON lines report")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("diversity", parents=[common],
                       help="pairwise task diversity of a partition set")
    p.add_argument("--partitions", required=True, metavar="DIR")
    p.add_argument("--out", required=True, metavar="PATH", help="CSV report")
    p.set_defaults(func=cmd_diversity)

    p = sub.add_parser("export-task-grid", parents=[common],
                       help="render one episode as a portable pixmap")
    p.add_argument("--data", required=True, metavar="PATH")
    p.add_argument("--tasks", required=True, metavar="PATH")
    p.add_argument("--index", type=int, default=0, metavar="N")
    p.add_argument("--out", required=True, metavar="PATH")
    p.set_defaults(func=cmd_export_task_grid)

    p = sub.add_parser("repro", parents=[common],
                       help="run the full desk-scale experiment matrix")
    p.add_argument("--seeds", type=int, metavar="N",
                   help="use master seeds 0..N-1 instead of the config's list")
    p.add_argument("--out", required=True, metavar="DIR")
    p.set_defaults(func=cmd_repro)
    return parser


def _resolve_config(args) -> RunConfig:
    if args.config and args.profile:
        raise ValidationFailure(["contradictory flags: --config and --profile "
                                 "both set; the config file already names a profile"])
    if args.config:
        return load_config(args.config)
    if args.profile == "paper":
        return paper_profile()
    return desk_profile()


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s",
                        stream=sys.stderr)
    args = _build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
        if getattr(args, "seeds", None):
            if args.seeds < 1:
                raise ValidationFailure(["--seeds must be at least 1"])
            cfg = replace(cfg, seeds=tuple(range(args.seeds)))
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise ValidationFailure(["--seed must be in [0, 2^64)"])
        seed = args.seed if args.seed is not None else cfg.seeds[0]
        return args.func(args, cfg, config_hash(cfg), seed)
    except (ConfigError, ValidationFailure) as exc:
        print(exc, file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # runtime failures map to a distinct exit code
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
