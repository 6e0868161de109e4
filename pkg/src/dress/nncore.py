"""Minimal dense-network engine on flat parameter vectors.

A small ReLU MLP with manual backprop, plain SGD steps, and Adam. Parameters
live in one flat vector so optimizer state, checkpoints, and the inner loop of
meta-training can treat a model as a single array. Matrix work runs in the
parameter dtype; loss reductions and optimizer moments use float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MLPArch:
    """Fully connected ReLU net; layer_sizes = (input, hidden..., classes)."""

    layer_sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2:
            raise ValueError(f"need at least input and output sizes, got {sizes}")
        if any(s < 1 for s in sizes):
            raise ValueError(f"layer sizes must be positive, got {sizes}")
        object.__setattr__(self, "layer_sizes", sizes)

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def num_classes(self) -> int:
        return self.layer_sizes[-1]

    @property
    def num_layers(self) -> int:
        return len(self.layer_sizes) - 1


def default_arch(input_dim: int, num_classes: int) -> MLPArch:
    """Two hidden layers of 64 units."""
    return MLPArch((input_dim, 64, 64, num_classes))


def num_params(arch: MLPArch) -> int:
    sizes = arch.layer_sizes
    return sum(sizes[i] * sizes[i + 1] + sizes[i + 1] for i in range(arch.num_layers))


def unpack(arch: MLPArch, params: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Views (W, b) per layer into the flat vector; layout is W row-major then b."""
    if params.ndim != 1 or params.size != num_params(arch):
        raise ValueError(f"params must be a flat vector of {num_params(arch)} values, got shape {params.shape}")
    layers = []
    pos = 0
    sizes = arch.layer_sizes
    for i in range(arch.num_layers):
        n_in, n_out = sizes[i], sizes[i + 1]
        w = params[pos:pos + n_in * n_out].reshape(n_in, n_out)
        pos += n_in * n_out
        b = params[pos:pos + n_out]
        pos += n_out
        layers.append((w, b))
    return layers


def init_params(arch: MLPArch, seed: int, dtype=np.float32) -> np.ndarray:
    """He-uniform weights (limit sqrt(6 / fan_in)), zero biases."""
    rng = np.random.default_rng(seed)
    params = np.zeros(num_params(arch), dtype=dtype)
    for i, (w, b) in enumerate(unpack(arch, params)):
        limit = np.sqrt(6.0 / arch.layer_sizes[i])
        w[:] = rng.uniform(-limit, limit, size=w.shape).astype(dtype)
    return params


def _forward_cached(arch: MLPArch, params: np.ndarray, x: np.ndarray):
    layers = unpack(arch, params)
    x = np.ascontiguousarray(x, dtype=params.dtype)
    if x.ndim != 2 or x.shape[1] != arch.input_dim:
        raise ValueError(f"inputs must be (n, {arch.input_dim}), got {x.shape}")
    acts = [x]
    pre = []
    for i, (w, b) in enumerate(layers):
        z = acts[-1] @ w + b
        pre.append(z)
        acts.append(np.maximum(z, 0) if i < arch.num_layers - 1 else z)
    return layers, acts, pre


def forward(arch: MLPArch, params: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Logits (n, num_classes)."""
    return _forward_cached(arch, params, x)[1][-1]


def predict(arch: MLPArch, params: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Argmax class per row; ties resolve to the lowest class index."""
    return np.argmax(forward(arch, params, x), axis=1)


def accuracy(arch: MLPArch, params: np.ndarray, x: np.ndarray, y: np.ndarray) -> float:
    y = _check_targets(arch, x, y)
    return float(np.mean(predict(arch, params, x) == y))


def _check_targets(arch: MLPArch, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    y = np.asarray(y)
    if len(x) == 0:
        raise ValueError("empty batch")
    if y.shape != (x.shape[0],):
        raise ValueError(f"targets must be ({x.shape[0]},), got {y.shape}")
    if y.min() < 0 or y.max() >= arch.num_classes:
        raise ValueError(f"targets must lie in [0, {arch.num_classes})")
    return y.astype(np.int64)


def _softmax_ce(logits: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    # log-sum-exp in float64 regardless of the compute dtype
    z = logits.astype(np.float64)
    m = z.max(axis=1, keepdims=True)
    ex = np.exp(z - m)
    total = ex.sum(axis=1, keepdims=True)
    log_z = np.log(total) + m
    n = len(y)
    loss = float(np.mean(log_z[:, 0] - z[np.arange(n), y]))
    dlogits = ex / total
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    return loss, dlogits


def loss(arch: MLPArch, params: np.ndarray, x: np.ndarray, y: np.ndarray) -> float:
    """Mean softmax cross-entropy."""
    y = _check_targets(arch, x, y)
    return _softmax_ce(forward(arch, params, x), y)[0]


def loss_and_grad(arch: MLPArch, params: np.ndarray, x: np.ndarray,
                  y: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy and its gradient as a flat vector like `params`."""
    y = _check_targets(arch, x, y)
    layers, acts, pre = _forward_cached(arch, params, x)
    loss_value, dlogits = _softmax_ce(acts[-1], y)

    grad = np.zeros_like(params)
    grad_layers = unpack(arch, grad)
    delta = dlogits.astype(params.dtype)
    for i in range(arch.num_layers - 1, -1, -1):
        gw, gb = grad_layers[i]
        gw[:] = acts[i].T @ delta
        gb[:] = delta.sum(axis=0)
        if i > 0:  # no input gradient needed, stop one layer early
            delta = (delta @ layers[i][0].T) * (pre[i - 1] > 0)
    return loss_value, grad


def sgd_step(params: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
    if params.shape != grad.shape:
        raise ValueError(f"shape mismatch: params {params.shape} vs grad {grad.shape}")
    return params - params.dtype.type(lr) * grad


@dataclass
class AdamState:
    """First/second moment accumulators (float64) and the step counter."""

    step: int
    m: np.ndarray
    v: np.ndarray


def adam_init(n: int) -> AdamState:
    return AdamState(step=0, m=np.zeros(n, dtype=np.float64), v=np.zeros(n, dtype=np.float64))


def adam_step(state: AdamState, params: np.ndarray, grad: np.ndarray, lr: float,
              beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update; returns new params and new state."""
    if params.shape != grad.shape or params.shape != state.m.shape:
        raise ValueError("params, grad, and moments must share a shape")
    t = state.step + 1
    g = grad.astype(np.float64)
    m = beta1 * state.m + (1.0 - beta1) * g
    v = beta2 * state.v + (1.0 - beta2) * g * g
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    update = lr * m_hat / (np.sqrt(v_hat) + eps)
    new_params = (params.astype(np.float64) - update).astype(params.dtype)
    return new_params, AdamState(step=t, m=m, v=v)
