"""Train, persist and apply the local objectness predictor (LOP).

The model assigns each occupied pillar a probability of holding a piece of a
real object and thresholds it into a 0/1 objectness score. Training minimizes
mean focal loss with Adam over shuffled mini-batches, early-stopping on a
scene-held-out validation split.

Model file layout:

    magic b"LOPNET01", '<I' version,
    '<I' n_mlp sizes, n_mlp * '<I',
    '<I' n_head sizes, n_head * '<I',
    parameters as little-endian float64 in order W1,b1,...,W5,b5
    (W row-major with shape (fan_in, fan_out)),
    UTF-8 JSON trailer with threshold, m_pc, train config and metadata.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, EmptyPillarError
from .features import PillarFeatures
from .network import (
    HEAD_SIZES,
    MLP_SIZES,
    AdamState,
    LopNetwork,
    SgdState,
    adam_step,
    backward,
    forward,
    init_network,
    sgd_step,
)

MODEL_MAGIC = b"LOPNET01"
MODEL_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    m_pc: int = 1024
    alpha_fl: float = 1.0
    gamma_fl: float = 2.0
    lr: float = 1e-3
    lr_decay: float = 0.3  # multiplied in every lr_step epochs
    lr_step: int = 15
    batch_size: int = 64
    max_epochs: int = 60
    patience: int = 12  # epochs of non-improving validation loss
    val_fraction: float = 0.1
    optimizer: str = "adam"  # or "sgd"
    decision_threshold: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.decision_threshold < 1.0):
            raise ValueError("decision_threshold must be in (0, 1)")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    train_accuracy: float
    val_loss: float


@dataclass
class LopModel:
    network: LopNetwork
    decision_threshold: float
    m_pc: int
    train_config: TrainConfig
    metadata: dict = field(default_factory=dict)


def _split_train_val(samples, val_fraction: float, rng: np.random.Generator):
    """Hold out whole scenes when sources are known, else plain samples."""
    frames = sorted({s.source[0] for s in samples if s.source is not None})
    if len(frames) >= 2 and all(s.source is not None for s in samples):
        order = rng.permutation(len(frames))
        n_val = max(1, int(round(val_fraction * len(frames))))
        val_frames = {frames[i] for i in order[:n_val]}
        train = [s for s in samples if s.source[0] not in val_frames]
        val = [s for s in samples if s.source[0] in val_frames]
        if train and val:
            return train, val
    order = rng.permutation(len(samples))
    n_val = max(1, int(round(val_fraction * len(samples))))
    val_idx = set(order[:n_val].tolist())
    train = [s for i, s in enumerate(samples) if i not in val_idx]
    val = [s for i, s in enumerate(samples) if i in val_idx]
    return train, val


def _mean_loss_and_accuracy(net, samples, cfg) -> tuple[float, float]:
    from .network import batch_loss

    total, correct = 0.0, 0
    for lo in range(0, len(samples), cfg.batch_size):
        chunk = samples[lo : lo + cfg.batch_size]
        pairs = [(s.features, s.label) for s in chunk]
        loss, cache, labels = batch_loss(net, pairs, cfg.alpha_fl, cfg.gamma_fl)
        total += loss * len(chunk)
        correct += int(((cache.probs[:, 1] >= 0.5).astype(int) == labels).sum())
    return total / len(samples), correct / len(samples)


def train(dataset, config: TrainConfig = TrainConfig()) -> tuple[LopModel, list[EpochStats]]:
    """Fit the predictor; returns the model and a per-epoch training log."""
    labels = {s.label for s in dataset}
    if labels != {0, 1}:
        raise DataError(f"training needs both classes, got labels {sorted(labels)}")
    rng = np.random.default_rng(config.seed)
    net = init_network(rng)
    if config.optimizer == "adam":
        opt_state, step_fn = AdamState(lr=config.lr), adam_step
    else:
        opt_state, step_fn = SgdState(lr=config.lr), sgd_step

    train_set, val_set = _split_train_val(dataset, config.val_fraction, rng)
    history: list[EpochStats] = []
    best_val = np.inf
    best_net = net.copy()
    best_epoch = 0
    for epoch in range(1, config.max_epochs + 1):
        opt_state.lr = config.lr * config.lr_decay ** ((epoch - 1) // config.lr_step)
        order = rng.permutation(len(train_set))
        epoch_loss, correct = 0.0, 0
        for lo in range(0, len(order), config.batch_size):
            chunk = [train_set[i] for i in order[lo : lo + config.batch_size]]
            pairs = [(s.features, s.label) for s in chunk]
            loss, grads = backward(net, pairs, config.alpha_fl, config.gamma_fl)
            step_fn(opt_state, net, grads)
            epoch_loss += loss * len(chunk)
        train_loss = epoch_loss / len(train_set)
        _, train_acc = _mean_loss_and_accuracy(net, train_set, config)
        val_loss, _ = _mean_loss_and_accuracy(net, val_set, config)
        history.append(EpochStats(epoch, train_loss, train_acc, val_loss))
        if val_loss < best_val - 1e-9:
            best_val = val_loss
            best_net = net.copy()
            best_epoch = epoch
        elif epoch - best_epoch >= config.patience:
            break

    model = LopModel(
        network=best_net,
        decision_threshold=config.decision_threshold,
        m_pc=config.m_pc,
        train_config=config,
        metadata={
            "seed": config.seed,
            "epochs_run": history[-1].epoch,
            "best_epoch": best_epoch,
            "final_train_loss": history[-1].train_loss,
            "best_val_loss": best_val,
        },
    )
    return model, history


def predict(model: LopModel, feat: PillarFeatures) -> tuple[int, float]:
    """(0/1 objectness score, probability); score 1 iff prob >= threshold."""
    _, p1 = forward(model.network, feat)
    return (1 if p1 >= model.decision_threshold else 0), p1


def predict_batch(model: LopModel, feats) -> list[tuple[int, float]]:
    """Element-wise identical to predict, order preserved."""
    out = []
    for k, feat in enumerate(feats):
        try:
            out.append(predict(model, feat))
        except EmptyPillarError as exc:
            raise EmptyPillarError(f"batch element {k}: {exc}") from exc
    return out


def save_model(model: LopModel, path) -> None:
    path = Path(path)
    parts = [MODEL_MAGIC, struct.pack("<I", MODEL_VERSION)]
    parts.append(struct.pack("<I", len(MLP_SIZES)))
    parts.append(struct.pack(f"<{len(MLP_SIZES)}I", *MLP_SIZES))
    parts.append(struct.pack("<I", len(HEAD_SIZES)))
    parts.append(struct.pack(f"<{len(HEAD_SIZES)}I", *HEAD_SIZES))
    for w, b in zip(model.network.weights, model.network.biases):
        parts.append(w.astype("<f8").tobytes())
        parts.append(b.astype("<f8").tobytes())
    trailer = {
        "decision_threshold": model.decision_threshold,
        "m_pc": model.m_pc,
        "train_config": asdict(model.train_config),
        "metadata": model.metadata,
    }
    parts.append(json.dumps(trailer, sort_keys=True).encode("utf-8"))
    path.write_bytes(b"".join(parts))


def load_model(path) -> LopModel:
    raw = Path(path).read_bytes()
    if raw[: len(MODEL_MAGIC)] != MODEL_MAGIC:
        raise DataError(f"{path}: not a model file")
    offset = len(MODEL_MAGIC)
    (version,) = struct.unpack_from("<I", raw, offset)
    offset += 4
    if version != MODEL_VERSION:
        raise DataError(f"{path}: unsupported model version {version}")
    (n_mlp,) = struct.unpack_from("<I", raw, offset)
    offset += 4
    mlp = struct.unpack_from(f"<{n_mlp}I", raw, offset)
    offset += 4 * n_mlp
    (n_head,) = struct.unpack_from("<I", raw, offset)
    offset += 4
    head = struct.unpack_from(f"<{n_head}I", raw, offset)
    offset += 4 * n_head
    if mlp != MLP_SIZES or head != HEAD_SIZES:
        raise DataError(f"{path}: unexpected architecture {mlp}/{head}")
    sizes = list(zip(mlp[:-1], mlp[1:])) + list(zip(head[:-1], head[1:]))
    weights, biases = [], []
    for fan_in, fan_out in sizes:
        w = np.frombuffer(raw, dtype="<f8", count=fan_in * fan_out, offset=offset)
        offset += 8 * fan_in * fan_out
        weights.append(w.astype(np.float64).reshape(fan_in, fan_out))
        b = np.frombuffer(raw, dtype="<f8", count=fan_out, offset=offset)
        offset += 8 * fan_out
        biases.append(b.astype(np.float64))
    trailer = json.loads(raw[offset:].decode("utf-8"))
    config = TrainConfig(**trailer["train_config"])
    return LopModel(
        network=LopNetwork(weights, biases),
        decision_threshold=float(trailer["decision_threshold"]),
        m_pc=int(trailer["m_pc"]),
        train_config=config,
        metadata=trailer.get("metadata", {}),
    )
