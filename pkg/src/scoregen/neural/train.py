"""Mini-batch training loop with SGD or Adam and global-norm clipping."""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from ..errors import NumericError, ShapeError, ValidationError
from ..seeding import rng_stream
from .lstm import backward_batch, batch_loss, forward_batch, init_weights

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 64
    learning_rate: float = 1e-3
    gradient_clip_norm: Optional[float] = 5.0
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    rng_seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValidationError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValidationError(f"batch size must be >= 1, got {self.batch_size}")
        if not self.learning_rate >= 0:
            raise ValidationError(f"learning rate must be non-negative, got {self.learning_rate}")
        if self.optimizer not in ("sgd", "adam"):
            raise ValidationError(f"unknown optimizer {self.optimizer!r}")

    def to_dict(self):
        return asdict(self)


class Adam:
    def __init__(self, weights, cfg):
        self.cfg = cfg
        self.m = [np.zeros_like(a) for _, a in weights.named_tensors()]
        self.v = [np.zeros_like(a) for _, a in weights.named_tensors()]
        self.t = 0

    def step(self, weights, grads):
        cfg = self.cfg
        self.t += 1
        c1 = 1.0 - cfg.beta1 ** self.t
        c2 = 1.0 - cfg.beta2 ** self.t
        for (_, w), (_, g), m, v in zip(weights.named_tensors(), grads.named_tensors(), self.m, self.v):
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * g * g
            w -= cfg.learning_rate * (m / c1) / (np.sqrt(v / c2) + cfg.epsilon)


class SGD:
    def __init__(self, weights, cfg):
        self.cfg = cfg

    def step(self, weights, grads):
        for (_, w), (_, g) in zip(weights.named_tensors(), grads.named_tensors()):
            w -= self.cfg.learning_rate * g


def clip_gradients(grads, max_norm):
    """Rescale ``grads`` in place so their global norm is at most ``max_norm``."""
    norm = grads.global_norm()
    if max_norm and norm > max_norm:
        scale = max_norm / norm
        for _, g in grads.named_tensors():
            g *= scale
    return norm


def check_compatible(model_config, dataset):
    if dataset.sequence_length != model_config.sequence_length:
        raise ShapeError(
            f"dataset windows have length {dataset.sequence_length}, "
            f"model expects {model_config.sequence_length}")
    if dataset.vocab_size != model_config.vocab_size:
        raise ShapeError(
            f"dataset vocabulary has {dataset.vocab_size} tokens, "
            f"model expects {model_config.vocab_size}")


def train(dataset, model_config, train_config, weights=None):
    """Fit a model; returns (weights, per-epoch mean training loss).

    Batches are reshuffled every epoch from ``train_config.rng_seed``; with
    equal configs and seeds the result is bit-identical.
    """
    if len(dataset) == 0:
        raise ValidationError("cannot train on an empty dataset")
    check_compatible(model_config, dataset)
    if weights is None:
        weights = init_weights(model_config, rng_stream(model_config.rng_seed, "init"))
    else:
        weights = weights.copy()
    shuffle_rng = rng_stream(train_config.rng_seed, "shuffle")
    dropout_rng = rng_stream(train_config.rng_seed, "dropout")
    opt = (Adam if train_config.optimizer == "adam" else SGD)(weights, train_config)

    inputs, targets = dataset.inputs, dataset.target_indices
    n = len(dataset)
    history = []
    for epoch in range(train_config.epochs):
        order = shuffle_rng.permutation(n)
        losses = []
        for b, start in enumerate(range(0, n, train_config.batch_size)):
            idx = order[start:start + train_config.batch_size]
            try:
                probs, cache = forward_batch(weights, inputs[idx], "train", dropout_rng)
                batch = batch_loss(probs, targets[idx])
                if not np.all(np.isfinite(batch)):
                    raise NumericError("loss is not finite")
                grads = backward_batch(weights, cache, targets[idx])
            except NumericError as exc:
                raise NumericError(f"training diverged at epoch {epoch + 1}, batch {b + 1}: {exc}") from exc
            for _, g in grads.named_tensors():
                g /= len(idx)
            clip_gradients(grads, train_config.gradient_clip_norm)
            opt.step(weights, grads)
            losses.extend(batch.tolist())
        mean = math.fsum(losses) / n
        history.append(mean)
        log.debug("epoch %d mean loss %.6f", epoch + 1, mean)
    return weights, history


def predict_indices(weights, dataset):
    probs, _ = forward_batch(weights, dataset.inputs, "infer")
    return np.argmax(probs, axis=1)


def accuracy(weights, dataset):
    return float(np.mean(predict_indices(weights, dataset) == dataset.target_indices))


def mean_loss(weights, dataset):
    probs, _ = forward_batch(weights, dataset.inputs, "infer")
    return math.fsum(batch_loss(probs, dataset.target_indices).tolist()) / len(dataset)
