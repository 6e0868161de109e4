"""Run configuration: profiles, JSON round-trip, and config hashing.

A run is described by one JSON document with nested per-stage keys. Two
profiles exist: "desk" runs the full pipeline in minutes on a laptop-class
machine, "paper" uses the full-scale hyperparameters (480k images at 64x64,
200 clusters per dimension, 50 random scalings with 300 clusters each,
30,000 meta-training epochs, 1,000 evaluation tasks). Every stage output
embeds the sha256 of the canonical config JSON so downstream stages can
detect mismatched inputs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

from .datagen import default_factor_specs

PROFILES = ("desk", "paper")


class ConfigError(ValueError):
    """Carries every validation problem found, not just the first."""

    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {p}" for p in self.problems))


@dataclass(frozen=True)
class DataConfig:
    count: int = 20000
    resolution: int = 32
    train_fraction: float = 0.8


@dataclass(frozen=True)
class EncoderConfig:
    group_dim: int = 4
    noise_sigma: float = 0.05
    signature_dim: int = 8
    signature_sigma: float = 0.01


@dataclass(frozen=True)
class ClusterConfig:
    k: int = 40
    max_components: int = 8
    cactus_scalings: int = 10
    cactus_k: int = 40


@dataclass(frozen=True)
class TaskConfig:
    way: int = 2
    shots: int = 5
    queries: int = 5
    max_attrs: int = 2
    meta_test_factors: tuple = ("floor-hue", "wall-hue", "object-x-offset")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 2000
    meta_batch: int = 8
    inner_steps: int = 5
    inner_lr: float = 0.05
    outer_lr: float = 0.001
    checkpoint_every: int = 500


@dataclass(frozen=True)
class EvalConfig:
    tasks: int = 200


@dataclass(frozen=True)
class RunConfig:
    profile: str = "desk"
    seeds: tuple = (0, 1, 2, 3)
    data: DataConfig = field(default_factory=DataConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    tasks: TaskConfig = field(default_factory=TaskConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def meta_train_factors(self) -> list:
        return [f.name for f in default_factor_specs()
                if f.name not in self.tasks.meta_test_factors]


def desk_profile() -> RunConfig:
    # One distractor coordinate per group, one kept component: PCA still has
    # noise to discard, and the entangled ablation collapses to a single
    # blended direction instead of riding twelve near-intact signal axes.
    return RunConfig(
        encoder=EncoderConfig(group_dim=2),
        cluster=ClusterConfig(max_components=1),
    )


def paper_profile() -> RunConfig:
    return RunConfig(
        profile="paper",
        data=DataConfig(count=480000, resolution=64, train_fraction=400000 / 480000),
        cluster=ClusterConfig(k=200, max_components=8, cactus_scalings=50, cactus_k=300),
        train=TrainConfig(epochs=30000, meta_batch=8, inner_steps=5,
                          inner_lr=0.05, outer_lr=0.001, checkpoint_every=1000),
        eval=EvalConfig(tasks=1000),
    )


def _profile_config(name: str) -> RunConfig:
    return paper_profile() if name == "paper" else desk_profile()


_SECTIONS = {
    "data": DataConfig,
    "encoder": EncoderConfig,
    "cluster": ClusterConfig,
    "tasks": TaskConfig,
    "train": TrainConfig,
    "eval": EvalConfig,
}


def config_from_dict(doc: dict) -> RunConfig:
    """Build a RunConfig from a JSON document. Unknown keys and malformed
    values are all reported at once."""
    problems = []
    if not isinstance(doc, dict):
        raise ConfigError(["config document must be a JSON object"])
    profile = doc.get("profile", "desk")
    if profile not in PROFILES:
        problems.append(f"profile must be one of {list(PROFILES)}, got {profile!r}")
        profile = "desk"
    cfg = _profile_config(profile)
    for key in doc:
        if key not in ("profile", "seeds") and key not in _SECTIONS:
            problems.append(f"unknown config section {key!r}")
    if "seeds" in doc:
        seeds = doc["seeds"]
        if (not isinstance(seeds, list) or not seeds
                or not all(isinstance(s, int) and 0 <= s < 2 ** 64 for s in seeds)):
            problems.append("seeds must be a non-empty list of integers in [0, 2^64)")
        else:
            cfg = replace(cfg, seeds=tuple(seeds))
    for section, cls in _SECTIONS.items():
        if section not in doc:
            continue
        sub = doc[section]
        if not isinstance(sub, dict):
            problems.append(f"section {section!r} must be an object")
            continue
        current = getattr(cfg, section)
        updates = {}
        for key, value in sub.items():
            if key not in cls.__dataclass_fields__:
                problems.append(f"unknown key {section}.{key}")
                continue
            default = getattr(current, key)
            if isinstance(value, list):
                value = tuple(value)
            if isinstance(default, int) and not isinstance(value, int):
                problems.append(f"{section}.{key} must be an integer, got {value!r}")
            elif isinstance(default, float) and not isinstance(value, (int, float)):
                problems.append(f"{section}.{key} must be a number, got {value!r}")
            elif isinstance(default, tuple) and not isinstance(value, tuple):
                problems.append(f"{section}.{key} must be a list, got {value!r}")
            else:
                updates[key] = value
        try:
            cfg = replace(cfg, **{section: replace(current, **updates)})
        except TypeError as exc:
            problems.append(f"section {section!r}: {exc}")
    problems += _validate(cfg)
    if problems:
        raise ConfigError(problems)
    return cfg


def _validate(cfg: RunConfig) -> list:
    p = []
    factor_names = [f.name for f in default_factor_specs()]

    def require(ok: bool, message: str):
        if not ok:
            p.append(message)

    require(cfg.data.count >= 1, "data.count must be at least 1")
    require(cfg.data.resolution >= 4, "data.resolution must be at least 4")
    require(0.0 < cfg.data.train_fraction < 1.0, "data.train_fraction must be in (0, 1)")
    require(cfg.encoder.group_dim >= 1, "encoder.group_dim must be at least 1")
    require(cfg.encoder.noise_sigma >= 0.0, "encoder.noise_sigma must be non-negative")
    require(cfg.encoder.signature_dim >= 1, "encoder.signature_dim must be at least 1")
    require(cfg.encoder.signature_sigma > 0.0, "encoder.signature_sigma must be positive")
    require(cfg.cluster.k >= 2, "cluster.k must be at least 2")
    require(cfg.cluster.max_components >= 1, "cluster.max_components must be at least 1")
    require(cfg.cluster.cactus_scalings >= 1, "cluster.cactus_scalings must be at least 1")
    require(cfg.cluster.cactus_k >= 2, "cluster.cactus_k must be at least 2")
    require(cfg.tasks.way >= 2, "tasks.way must be at least 2")
    require(cfg.tasks.shots >= 1, "tasks.shots must be at least 1")
    require(cfg.tasks.queries >= 1, "tasks.queries must be at least 1")
    require(cfg.tasks.max_attrs >= 1, "tasks.max_attrs must be at least 1")
    for name in cfg.tasks.meta_test_factors:
        require(name in factor_names,
                f"tasks.meta_test_factors: {name!r} is not a renderer factor")
    require(len(cfg.tasks.meta_test_factors) >= 1,
            "tasks.meta_test_factors must name at least one factor")
    require(len(set(cfg.tasks.meta_test_factors)) < len(factor_names),
            "tasks.meta_test_factors must leave at least one training factor")
    require(cfg.train.epochs >= 1, "train.epochs must be at least 1")
    require(cfg.train.meta_batch >= 1, "train.meta_batch must be at least 1")
    require(cfg.train.inner_steps >= 1, "train.inner_steps must be at least 1")
    require(cfg.train.inner_lr > 0.0, "train.inner_lr must be positive")
    require(cfg.train.outer_lr > 0.0, "train.outer_lr must be positive")
    require(cfg.train.checkpoint_every >= 0, "train.checkpoint_every must be non-negative")
    require(cfg.eval.tasks >= 1, "eval.tasks must be at least 1")
    require(cfg.profile in PROFILES, f"profile must be one of {list(PROFILES)}")
    require(bool(cfg.seeds), "seeds must be non-empty")
    return p


def load_config(path: str) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"{path}: not valid JSON ({exc})"])
    return config_from_dict(doc)


def config_to_dict(cfg: RunConfig) -> dict:
    doc = asdict(cfg)
    doc["seeds"] = list(cfg.seeds)
    doc["tasks"]["meta_test_factors"] = list(cfg.tasks.meta_test_factors)
    return doc


def config_hash(cfg: RunConfig) -> str:
    canonical = json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def save_config(path: str, cfg: RunConfig) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")
