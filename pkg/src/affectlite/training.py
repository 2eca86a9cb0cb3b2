"""Losses, the Adam optimiser, image augmentation and the epoch loop.

Classification trains with class-weighted cross-entropy against softmax
outputs; valence/arousal regression trains with mean squared error. A
fixed seed makes an entire run reproducible: shuffling, augmentation and
dropout all draw from one Philox stream in a fixed order.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .architectures import HEAD_EMOTION, HEAD_VA, REFERENCE_BATCH_SIZE, Model
from .data import apply_affine
from .tensor import Rng, Tensor, as_array

LOSS_WCE = "weighted-cross-entropy"
LOSS_MSE = "mean-squared-error"

_PROB_FLOOR = 1e-12


class TrainingError(ValueError):
    pass


def class_weights(counts) -> np.ndarray:
    """Inverse-frequency weights w_c = N / (K * n_c); balanced counts give ones."""
    n = np.asarray(counts, dtype=np.float64)
    if np.any(n <= 0):
        raise TrainingError(f"every class needs at least one sample, got counts {list(counts)}")
    return n.sum() / (len(n) * n)


def weighted_cross_entropy(probs, label, weights):
    """Loss -w_label * log(p_label) and its gradient w.r.t. the logits."""
    p = np.asarray(as_array(probs), dtype=np.float64)
    w = np.asarray(as_array(weights), dtype=np.float64)
    label = int(label)
    if not 0 <= label < p.shape[-1]:
        raise TrainingError(f"label {label} out of range for {p.shape[-1]} classes")
    p_label = p[label]
    if p_label < _PROB_FLOOR:
        warnings.warn("predicted probability underflowed; clamped for the log", stacklevel=2)
        p_label = _PROB_FLOOR
    loss = float(-w[label] * math.log(p_label))
    onehot = np.zeros_like(p)
    onehot[label] = 1.0
    dlogits = w[label] * (p - onehot)
    return loss, dlogits


def _wce_batch(probs, labels, weights):
    n = probs.shape[0]
    idx = np.arange(n)
    p = probs[idx, labels]
    if np.any(p < _PROB_FLOOR):
        warnings.warn("predicted probability underflowed; clamped for the log", stacklevel=2)
        p = np.maximum(p, _PROB_FLOOR)
    w = weights[labels]
    loss = float(np.mean(-w * np.log(p)))
    onehot = np.zeros_like(probs)
    onehot[idx, labels] = 1.0
    dlogits = (w[:, None] * (probs - onehot) / n).astype(probs.dtype)
    return loss, dlogits


def mse_loss(pred, target):
    """Mean squared error over the output vector, with gradient."""
    p = np.asarray(as_array(pred), dtype=np.float64)
    t = np.asarray(as_array(target), dtype=np.float64)
    if p.shape != t.shape:
        raise TrainingError(f"prediction shape {p.shape} does not match target {t.shape}")
    diff = p - t
    loss = float(np.mean(diff**2))
    return loss, 2.0 * diff / diff.size


def _mse_batch(pred, target):
    diff = pred - target
    loss = float(np.mean(diff**2))
    return loss, (2.0 * diff / diff.size).astype(pred.dtype)


class Adam:
    """Bias-corrected Adam with per-parameter moment tensors."""

    def __init__(self, alpha=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
        if alpha <= 0:
            raise TrainingError("alpha must be positive")
        if not (0 <= beta1 < 1 and 0 <= beta2 < 1):
            raise TrainingError("beta1 and beta2 must lie in [0, 1)")
        if eps <= 0:
            raise TrainingError("epsilon must be positive")
        self.alpha = alpha
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.timestep = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self, params: dict, grads: dict) -> dict:
        self.timestep += 1
        t = self.timestep
        bc1 = 1.0 - self.beta1**t
        bc2 = 1.0 - self.beta2**t
        out = {}
        for key, p in params.items():
            pv = as_array(p)
            g = np.asarray(as_array(grads[key]), dtype=pv.dtype)
            if g.shape != pv.shape:
                raise TrainingError(
                    f"gradient shape {g.shape} does not match parameter {key!r} {pv.shape}"
                )
            m = self._m.get(key)
            v = self._v.get(key)
            if m is None:
                m = np.zeros_like(pv)
                v = np.zeros_like(pv)
            m = self.beta1 * m + (1.0 - self.beta1) * g
            v = self.beta2 * v + (1.0 - self.beta2) * (g * g)
            self._m[key] = m
            self._v[key] = v
            update = self.alpha * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            out[key] = Tensor.wrap((pv - update).astype(pv.dtype))
        return out


def adam_step(params: dict, grads: dict, optimizer: Adam) -> dict:
    return optimizer.step(params, grads)


@dataclass
class AugmentConfig:
    max_rotation_deg: float = 20.0
    max_translate_frac: float = 0.1
    hflip: bool = True


def augment(image, rng: Rng, config: AugmentConfig | None = None) -> np.ndarray:
    """Random rotation, translation and horizontal flip with bilinear resampling.

    Draws are taken in a fixed order (angle, tx, ty, flip) so a seeded run
    is reproducible regardless of the configuration values.
    """
    cfg = config or AugmentConfig()
    img = np.asarray(as_array(image))
    h, w = img.shape[:2]
    angle = float(rng.uniform(-cfg.max_rotation_deg, cfg.max_rotation_deg))
    tx = float(rng.uniform(-cfg.max_translate_frac * w, cfg.max_translate_frac * w))
    ty = float(rng.uniform(-cfg.max_translate_frac * h, cfg.max_translate_frac * h))
    flip = bool(rng.random() < 0.5) and cfg.hflip
    return apply_affine(img, angle, tx, ty, flip)


@dataclass
class TrainConfig:
    epochs: int = 24
    batch_size: int | None = None  # None: the architecture's reference size
    loss: str = LOSS_WCE
    class_weights: np.ndarray | None = None
    augment: AugmentConfig | None = field(default_factory=AugmentConfig)
    seed: int = 0
    learning_rate: float = 0.001


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float | None = None
    val_metrics: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "epoch": self.epoch,
                "train_loss": self.train_loss,
                "val_loss": self.val_loss,
                **self.val_metrics,
            }
        )


@dataclass
class TrainLog:
    records: list = field(default_factory=list)

    def to_jsonl(self) -> str:
        return "".join(r.to_json() + "\n" for r in self.records)

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_jsonl())


def _check_loss_head(model: Model, loss: str):
    if loss not in (LOSS_WCE, LOSS_MSE):
        raise TrainingError(f"unknown loss {loss!r}")
    if model.head == HEAD_EMOTION and loss != LOSS_WCE:
        raise TrainingError("classification head requires the weighted cross-entropy loss")
    if model.head == HEAD_VA and loss != LOSS_MSE:
        raise TrainingError("valence/arousal head requires the mean-squared-error loss")


def _predict_batched(model: Model, x: np.ndarray, batch: int) -> np.ndarray:
    outs = [model.forward(x[i : i + batch]).array for i in range(0, len(x), batch)]
    return np.concatenate(outs, axis=0)


def _validate(model, xv, yv, loss, weights, batch):
    out = _predict_batched(model, xv, batch)
    if loss == LOSS_WCE:
        val_loss, _ = _wce_batch(out, yv, weights)
        acc = float(np.mean(out.argmax(axis=1) == yv))
        return val_loss, {"accuracy": acc}
    val_loss, _ = _mse_batch(out, yv)
    per_dim = np.sqrt(np.mean((out - yv) ** 2, axis=0))
    return val_loss, {"rmse_valence": float(per_dim[0]), "rmse_arousal": float(per_dim[1])}


def train(model: Model, data, config: TrainConfig, val=None) -> TrainLog:
    """Run the epoch loop and return one record per completed epoch.

    ``data`` and ``val`` are (images, targets) pairs: images as float32
    arrays in [0, 1] shaped (N,) + model.input_shape, targets as integer
    labels (classification) or (N, 2) valence/arousal pairs (regression).
    Augmentation touches training batches only; validation is deterministic.
    """
    _check_loss_head(model, config.loss)
    x, y = data
    x = np.asarray(x, dtype=np.float32)
    n = len(x)
    if n == 0 and config.epochs > 0:
        raise TrainingError("training dataset is empty")
    if config.loss == LOSS_WCE:
        y = np.asarray(y, dtype=np.int64)
    else:
        y = np.asarray(y, dtype=np.float32)

    batch = config.batch_size or REFERENCE_BATCH_SIZE.get(model.arch_id, 32)
    rng = Rng(config.seed)
    if config.learning_rate < 0:
        raise TrainingError("learning rate must be non-negative")
    # A zero learning rate degenerates to "evaluate but never update".
    optimizer = Adam(alpha=config.learning_rate) if config.learning_rate > 0 else None
    params = model.named_params()

    weights = None
    if config.loss == LOSS_WCE:
        if config.class_weights is not None:
            weights = np.asarray(config.class_weights, dtype=np.float64)
            if np.any(weights <= 0):
                raise TrainingError("class weights must all be positive")
        else:
            weights = np.ones(8, dtype=np.float64)

    log = TrainLog()
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch):
            idx = order[start : start + batch]
            xb = x[idx]
            if config.augment is not None:
                xb = np.stack([augment(im, rng, config.augment) for im in xb])
            out, ctx = model.forward_train(xb, rng)
            if config.loss == LOSS_WCE:
                loss, dlast = _wce_batch(out.array, y[idx], weights)
                grads = model.backward(dlast, ctx, from_logits=True)
            else:
                loss, dlast = _mse_batch(out.array, y[idx])
                grads = model.backward(dlast, ctx)
            if optimizer is not None:
                params = optimizer.step(params, grads)
                model.set_params(params)
            total += loss * len(idx)
        record = EpochRecord(epoch=epoch, train_loss=total / n)
        if val is not None:
            xv, yv = val
            xv = np.asarray(xv, dtype=np.float32)
            yv = (
                np.asarray(yv, dtype=np.int64)
                if config.loss == LOSS_WCE
                else np.asarray(yv, dtype=np.float32)
            )
            record.val_loss, record.val_metrics = _validate(
                model, xv, yv, config.loss, weights, batch
            )
        log.records.append(record)
    return log
