"""First-order MAML meta-training, episode evaluation, and the
train-from-scratch baseline.

Meta-parameters are an initialization: each episode adapts a copy by
full-batch SGD on its support set, and the meta-gradient is the mean of the
query-loss gradients taken at the adapted parameters (first-order
approximation; adaptation is not differentiated through). The baseline skips
meta-training entirely and adapts a fresh random init per episode.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from . import nncore
from .nncore import AdamState, MLPArch, adam_init, adam_step, init_params
from .seeding import subseed
from .taskgen import Episode

ADAPTATION_MODE = "maml-first-order"


@dataclass
class MetaState:
    """Meta-parameters plus optimizer state; epoch counts outer steps taken."""

    phi: np.ndarray
    adam: AdamState
    epoch: int
    config: dict
    query_loss: float | None = None

    def __post_init__(self):
        if not np.all(np.isfinite(self.phi)):
            raise ValueError("phi contains non-finite values")
        if self.epoch < 0:
            raise ValueError(f"epoch must be >= 0, got {self.epoch}")


@dataclass
class EvalReport:
    """Per-episode post-adaptation query accuracies with summary stats."""

    accuracies: list[float]
    sources: list[str]
    mean: float
    std: float
    task_count: int
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.task_count != len(self.accuracies) or self.task_count != len(self.sources):
            raise ValueError("task_count disagrees with accuracy/source lists")
        if self.task_count and abs(self.mean - float(np.mean(self.accuracies))) > 1e-12:
            raise ValueError("mean is not the arithmetic mean of the accuracies")

    @classmethod
    def from_accuracies(cls, accuracies: Sequence[float], sources: Sequence[str],
                        metadata: dict | None = None) -> "EvalReport":
        accs = [float(a) for a in accuracies]
        return cls(accuracies=accs, sources=list(sources),
                   mean=float(np.mean(accs)), std=float(np.std(accs)),
                   task_count=len(accs), metadata=dict(metadata or {}))

    def to_jsonl(self) -> str:
        """One JSON record per task plus a trailing summary record."""
        lines = [json.dumps({"task_id": t, "source": s, "accuracy": a})
                 for t, (s, a) in enumerate(zip(self.sources, self.accuracies))]
        summary = {"summary": True, "mean": self.mean, "std": self.std,
                   "task_count": self.task_count, **self.metadata}
        lines.append(json.dumps(summary))
        return "\n".join(lines) + "\n"


def init_meta_state(arch: MLPArch, seed: int, inner_steps: int = 5,
                    inner_lr: float = 0.05, outer_lr: float = 0.001,
                    dtype=np.float32) -> MetaState:
    phi = init_params(arch, subseed(seed, "init"), dtype=dtype)
    config = {"inner_steps": int(inner_steps), "inner_lr": float(inner_lr),
              "outer_lr": float(outer_lr)}
    return MetaState(phi=phi, adam=adam_init(phi.size), epoch=0, config=config)


def inner_adapt(phi: np.ndarray, arch: MLPArch, x_support: np.ndarray,
                y_support: np.ndarray, steps: int, lr: float) -> np.ndarray:
    """Task adaptation: `steps` full-batch SGD steps from phi; phi untouched."""
    if steps < 0:
        raise ValueError(f"steps must be >= 0, got {steps}")
    theta = phi.copy()
    for _ in range(steps):
        _, grad = nncore.loss_and_grad(arch, theta, x_support, y_support)
        theta = nncore.sgd_step(theta, grad, lr)
    return theta


def meta_train_step(state: MetaState, episodes: Sequence[Episode],
                    inputs: np.ndarray, arch: MLPArch) -> MetaState:
    """One outer step over a meta-batch of episodes.

    Per episode the query-loss gradient is evaluated at the adapted
    parameters; gradients are averaged in episode order and applied to phi
    with one Adam step.
    """
    if not episodes:
        raise ValueError("meta-batch is empty")
    cfg = state.config
    grad_sum = np.zeros_like(state.phi)
    loss_sum = 0.0
    for ep in episodes:
        s_idx, s_y, q_idx, q_y = ep.arrays()
        theta = inner_adapt(state.phi, arch, inputs[s_idx], s_y,
                            cfg["inner_steps"], cfg["inner_lr"])
        q_loss, q_grad = nncore.loss_and_grad(arch, theta, inputs[q_idx], q_y)
        grad_sum += q_grad
        loss_sum += q_loss
    meta_grad = grad_sum / np.asarray(len(episodes), dtype=grad_sum.dtype)
    phi, adam = adam_step(state.adam, state.phi, meta_grad, cfg["outer_lr"])
    return MetaState(phi=phi, adam=adam, epoch=state.epoch + 1, config=dict(cfg),
                     query_loss=loss_sum / len(episodes))


def meta_train(stream: Iterable[Episode], inputs: np.ndarray, arch: MLPArch,
               seed: int, epochs: int, meta_batch: int = 8,
               inner_steps: int = 5, inner_lr: float = 0.05,
               outer_lr: float = 0.001,
               checkpoint_every: int = 0,
               on_checkpoint: Callable[[MetaState], None] | None = None,
               on_progress: Callable[[MetaState], None] | None = None,
               initial_state: MetaState | None = None) -> MetaState:
    """Run meta-training for `epochs` outer steps, meta_batch episodes each.

    Passing a previously checkpointed state resumes exactly: the stream is
    fast-forwarded past the episodes already consumed, so the result is
    bit-identical to an uninterrupted run over the same stream.
    """
    if epochs < 0:
        raise ValueError(f"epochs must be >= 0, got {epochs}")
    if meta_batch < 1:
        raise ValueError(f"meta_batch must be >= 1, got {meta_batch}")
    if initial_state is None:
        state = init_meta_state(arch, seed, inner_steps, inner_lr, outer_lr)
    else:
        state = initial_state
        if state.phi.size != nncore.num_params(arch):
            raise ValueError("checkpointed parameters do not fit the architecture")

    it: Iterator[Episode] = iter(stream)
    for _ in range(state.epoch * meta_batch):  # fast-forward after a resume
        next(it)
    while state.epoch < epochs:
        batch = [next(it) for _ in range(meta_batch)]
        state = meta_train_step(state, batch, inputs, arch)
        if on_progress is not None:
            on_progress(state)
        if checkpoint_every > 0 and on_checkpoint is not None and state.epoch % checkpoint_every == 0:
            on_checkpoint(state)
    return state


def evaluate(phi: np.ndarray, arch: MLPArch, episodes: Sequence[Episode],
             inputs: np.ndarray, steps: int, lr: float,
             metadata: dict | None = None) -> EvalReport:
    """Adapt on each episode's support set and score its query set."""
    if not episodes:
        raise ValueError("no evaluation episodes")
    accs = []
    sources = []
    for ep in episodes:
        s_idx, s_y, q_idx, q_y = ep.arrays()
        theta = inner_adapt(phi, arch, inputs[s_idx], s_y, steps, lr)
        accs.append(nncore.accuracy(arch, theta, inputs[q_idx], q_y))
        sources.append(ep.source)
    meta = {"mode": ADAPTATION_MODE, "steps": steps, "lr": lr}
    meta.update(metadata or {})
    return EvalReport.from_accuracies(accs, sources, meta)


def fsda_evaluate(arch: MLPArch, episodes: Sequence[Episode], inputs: np.ndarray,
                  steps: int, lr: float, seed: int,
                  metadata: dict | None = None) -> EvalReport:
    """Baseline with no meta-training: fresh seeded init per episode, then the
    same adaptation and scoring as evaluate."""
    if not episodes:
        raise ValueError("no evaluation episodes")
    accs = []
    sources = []
    for t, ep in enumerate(episodes):
        phi = init_params(arch, subseed(seed, "fsda", t))
        s_idx, s_y, q_idx, q_y = ep.arrays()
        theta = inner_adapt(phi, arch, inputs[s_idx], s_y, steps, lr)
        accs.append(nncore.accuracy(arch, theta, inputs[q_idx], q_y))
        sources.append(ep.source)
    meta = {"mode": "fsda", "steps": steps, "lr": lr, "seed": seed}
    meta.update(metadata or {})
    return EvalReport.from_accuracies(accs, sources, meta)
