"""Fixed point-wise classifier: shared per-point MLP, masked max-pool, head.

Architecture (64-bit floats throughout):

    per point : 7 -> 64 -> 128 -> 256, ReLU after each layer
    pool      : channel-wise max over the pillar's valid rows only
    head      : 256 -> 128 (ReLU) -> 2, softmax

Backpropagation is written out by hand; the max-pool routes gradient to the
arg-max row per channel with ties broken to the lowest row index, which keeps
training bit-deterministic. Padding rows never enter the computation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyPillarError, NumericsError
from .features import PillarFeatures

MLP_SIZES = (7, 64, 128, 256)
HEAD_SIZES = (256, 128, 2)
# W1,b1,W2,b2,W3,b3 (per-point), W4,b4,W5,b5 (head)
LAYER_SHAPES = [(7, 64), (64, 128), (128, 256), (256, 128), (128, 2)]

PROB_CLAMP = 1e-12  # keeps log(p) finite without visibly biasing training


@dataclass
class LopNetwork:
    weights: list  # five (fan_in, fan_out) float64 matrices
    biases: list  # five (fan_out,) float64 vectors

    def copy(self) -> "LopNetwork":
        return LopNetwork([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def param_count(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)


def init_network(rng: np.random.Generator) -> LopNetwork:
    """Glorot-uniform weights, zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in LAYER_SHAPES:
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return LopNetwork(weights, biases)


def zero_network() -> LopNetwork:
    return LopNetwork(
        [np.zeros(shape) for shape in LAYER_SHAPES],
        [np.zeros(shape[1]) for shape in LAYER_SHAPES],
    )


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


class _ForwardCache:
    __slots__ = ("x", "offsets", "z1", "h1", "z2", "h2", "z3", "h3",
                 "pooled", "arg_rows", "z4", "g1", "logits", "probs")


def _forward_stack(net: LopNetwork, feats: list) -> _ForwardCache:
    """Run the network over a batch of pillars with all valid rows stacked."""
    counts = []
    blocks = []
    for k, f in enumerate(feats):
        if f.valid_count == 0:
            raise EmptyPillarError(f"pillar {k} has no valid points")
        counts.append(f.valid_count)
        blocks.append(f.valid)
    cache = _ForwardCache()
    cache.x = np.concatenate(blocks, axis=0)
    cache.offsets = np.concatenate(([0], np.cumsum(counts)))
    w, b = net.weights, net.biases

    cache.z1 = cache.x @ w[0] + b[0]
    cache.h1 = np.maximum(cache.z1, 0.0)
    cache.z2 = cache.h1 @ w[1] + b[1]
    cache.h2 = np.maximum(cache.z2, 0.0)
    cache.z3 = cache.h2 @ w[2] + b[2]
    cache.h3 = np.maximum(cache.z3, 0.0)

    n = len(feats)
    channels = MLP_SIZES[-1]
    cache.pooled = np.empty((n, channels))
    cache.arg_rows = np.empty((n, channels), dtype=np.int64)
    for k in range(n):
        lo, hi = cache.offsets[k], cache.offsets[k + 1]
        block = cache.h3[lo:hi]
        arg = block.argmax(axis=0)  # ties: lowest row index
        cache.arg_rows[k] = lo + arg
        cache.pooled[k] = block[arg, np.arange(channels)]

    cache.z4 = cache.pooled @ w[3] + b[3]
    cache.g1 = np.maximum(cache.z4, 0.0)
    cache.logits = cache.g1 @ w[4] + b[4]
    if not np.isfinite(cache.logits).all():
        raise NumericsError("non-finite logits in forward pass")
    cache.probs = _softmax_rows(cache.logits)
    return cache


def forward(net: LopNetwork, feat: PillarFeatures) -> tuple[float, float]:
    """Class probabilities (p0, p1) for one pillar."""
    cache = _forward_stack(net, [feat])
    p = cache.probs[0]
    return float(p[0]), float(p[1])


def focal_loss(p, y: int, alpha_fl: float, gamma_fl: float) -> float:
    """-alpha * (1 - p_y)^gamma * log(p_y), with p_y clamped to >= 1e-12."""
    py = max(float(p[y]), PROB_CLAMP)
    return float(-alpha_fl * (1.0 - py) ** gamma_fl * np.log(py))


def _focal_loss_grad_py(py: float, alpha_fl: float, gamma_fl: float) -> float:
    """d(loss)/d(p_y); zero in the clamped region below 1e-12."""
    if py < PROB_CLAMP:
        return 0.0
    one_m = 1.0 - py
    term = one_m**gamma_fl / py
    if gamma_fl != 0.0 and one_m > 0.0:
        term -= gamma_fl * one_m ** (gamma_fl - 1.0) * np.log(py)
    return -alpha_fl * term


@dataclass
class Gradients:
    weights: list
    biases: list

    @staticmethod
    def zeros() -> "Gradients":
        return Gradients(
            [np.zeros(shape) for shape in LAYER_SHAPES],
            [np.zeros(shape[1]) for shape in LAYER_SHAPES],
        )


def _backward_stack(net: LopNetwork, cache: _ForwardCache, dlogits: np.ndarray,
                    want_input_grad: bool = False):
    """Backprop from d(loss)/d(logits); optionally also return d/d(input rows)."""
    w = net.weights
    grads = Gradients([None] * 5, [None] * 5)

    grads.weights[4] = cache.g1.T @ dlogits
    grads.biases[4] = dlogits.sum(axis=0)
    dg1 = dlogits @ w[4].T
    dz4 = dg1 * (cache.z4 > 0.0)

    grads.weights[3] = cache.pooled.T @ dz4
    grads.biases[3] = dz4.sum(axis=0)
    dpooled = dz4 @ w[3].T

    dh3 = np.zeros_like(cache.h3)
    n, channels = dpooled.shape
    cols = np.tile(np.arange(channels), n)
    np.add.at(dh3, (cache.arg_rows.ravel(), cols), dpooled.ravel())

    dz3 = dh3 * (cache.z3 > 0.0)
    grads.weights[2] = cache.h2.T @ dz3
    grads.biases[2] = dz3.sum(axis=0)
    dh2 = dz3 @ w[2].T

    dz2 = dh2 * (cache.z2 > 0.0)
    grads.weights[1] = cache.h1.T @ dz2
    grads.biases[1] = dz2.sum(axis=0)
    dh1 = dz2 @ w[1].T

    dz1 = dh1 * (cache.z1 > 0.0)
    grads.weights[0] = cache.x.T @ dz1
    grads.biases[0] = dz1.sum(axis=0)

    for g in grads.weights + grads.biases:
        if not np.isfinite(g).all():
            raise NumericsError("non-finite gradient")
    if want_input_grad:
        return grads, dz1 @ w[0].T
    return grads, None


def batch_loss(net: LopNetwork, batch: list, alpha_fl: float, gamma_fl: float):
    """Mean focal loss and per-sample probabilities for (features, label) pairs."""
    feats = [f for f, _ in batch]
    labels = np.array([y for _, y in batch], dtype=np.int64)
    cache = _forward_stack(net, feats)
    py = np.maximum(cache.probs[np.arange(len(batch)), labels], PROB_CLAMP)
    losses = -alpha_fl * (1.0 - py) ** gamma_fl * np.log(py)
    return float(losses.mean()), cache, labels


def backward(net: LopNetwork, batch: list, alpha_fl: float, gamma_fl: float):
    """Gradients of the mean focal loss over a batch of (features, label).

    Returns (mean_loss, Gradients). The max-pool routes gradient to the
    arg-max row per channel; duplicated samples leave the mean untouched.
    """
    if not batch:
        raise ValueError("batch must be non-empty")
    mean_loss, cache, labels = batch_loss(net, batch, alpha_fl, gamma_fl)
    n = len(batch)
    rows = np.arange(n)
    py = np.maximum(cache.probs[rows, labels], PROB_CLAMP)
    dlosses_dpy = np.array(
        [_focal_loss_grad_py(float(p), alpha_fl, gamma_fl) for p in py]
    )
    # Through the softmax: dL/dz_j = dL/dp_y * p_y * (delta_yj - p_j).
    dlogits = -cache.probs * cache.probs[rows, labels][:, None]
    dlogits[rows, labels] += cache.probs[rows, labels]
    dlogits *= dlosses_dpy[:, None] / n
    grads, _ = _backward_stack(net, cache, dlogits)
    return mean_loss, grads


def grad_of_input(net: LopNetwork, feat: PillarFeatures) -> np.ndarray:
    """d(p1)/d(features) as an (m_pc, 7) matrix; padding rows stay zero."""
    cache = _forward_stack(net, [feat])
    p = cache.probs[0]
    # dp1/dz = p1 * ([0, 1] - p)
    dlogits = (p[1] * (np.array([0.0, 1.0]) - p)).reshape(1, 2)
    _, dx = _backward_stack(net, cache, dlogits, want_input_grad=True)
    out = np.zeros((feat.m_pc, feat.valid.shape[1]))
    out[: feat.valid_count] = dx
    return out


@dataclass
class AdamState:
    """Bias-corrected adaptive-moment estimation (standard defaults)."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Gradients = field(default_factory=Gradients.zeros)
    v: Gradients = field(default_factory=Gradients.zeros)


def adam_step(state: AdamState, net: LopNetwork, grads: Gradients) -> LopNetwork:
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**state.step
    bc2 = 1.0 - b2**state.step
    for kind, params in (("weights", net.weights), ("biases", net.biases)):
        ms = getattr(state.m, kind)
        vs = getattr(state.v, kind)
        gs = getattr(grads, kind)
        for p, m, v, g in zip(params, ms, vs, gs):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return net


@dataclass
class SgdState:
    lr: float = 1e-3


def sgd_step(state: SgdState, net: LopNetwork, grads: Gradients) -> LopNetwork:
    for params, gs in ((net.weights, grads.weights), (net.biases, grads.biases)):
        for p, g in zip(params, gs):
            p -= state.lr * g
    return net
