"""Cross-entropy loss and mini-batch SGD with the halving schedule."""

import math
from dataclasses import dataclass, field

import numpy as np

CLAMP_EPS = 1e-12


class NumericError(RuntimeError):
    """Raised when training produces a non-finite loss."""


@dataclass(frozen=True)
class TrainSchedule:
    epochs: int = 100
    batch_size: int = 256
    initial_lr: float = 1e-4
    halving_period: int = 20

    def validate(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.initial_lr <= 0:
            raise ValueError(f"initial_lr must be positive, got {self.initial_lr}")
        if self.halving_period < 1:
            raise ValueError(f"halving_period must be >= 1, got {self.halving_period}")

    def lr_at(self, epoch):
        return self.initial_lr * 2.0 ** (-(epoch // self.halving_period))


def cross_entropy(prediction, label):
    """-[y ln f + (1-y) ln(1-f)] with f clamped to [eps, 1-eps]."""
    if label not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {label}")
    f = min(max(float(prediction), CLAMP_EPS), 1.0 - CLAMP_EPS)
    return -(label * math.log(f) + (1 - label) * math.log(1.0 - f))


def cross_entropy_batch(predictions, labels):
    """Summed cross-entropy over a batch."""
    predictions = np.asarray(predictions, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if predictions.shape != labels.shape:
        raise ValueError(f"predictions shape {predictions.shape} != labels shape "
                         f"{labels.shape}")
    if not np.isin(labels, (0.0, 1.0)).all():
        raise ValueError("labels must be 0 or 1")
    f = np.clip(predictions, CLAMP_EPS, 1.0 - CLAMP_EPS)
    return float(-(labels * np.log(f) + (1.0 - labels) * np.log1p(-f)).sum())


@dataclass
class TrainLog:
    train_losses: list = field(default_factory=list)   # per-epoch mean per sample
    val_losses: list = field(default_factory=list)


def sgd_train(network, inputs, labels, schedule, rng,
              val_inputs=None, val_labels=None, epoch_hook=None):
    """Train `network` in place with mini-batch SGD.

    Shuffles each epoch with `rng`; effective batch size is
    min(schedule.batch_size, n); the learning rate at epoch e is
    initial_lr * 2^(-floor(e / halving_period)); the update is
    w <- w - lr * g with g the summed batch gradient; frozen tensors are
    untouched.  Recorded losses are per-sample means.
    """
    schedule.validate()
    inputs = np.asarray(inputs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    n = inputs.shape[0]
    if n == 0:
        raise ValueError("training set is empty")
    batch = min(schedule.batch_size, n)
    store = network.store
    log = TrainLog()
    for epoch in range(schedule.epochs):
        lr = schedule.lr_at(epoch)
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch):
            take = perm[start:start + batch]
            loss, grads = network.loss_and_gradients(inputs[take], labels[take])
            if not math.isfinite(loss):
                raise NumericError(f"non-finite training loss at epoch {epoch}")
            total += loss
            for name in store.names:
                if not store.frozen(name):
                    store[name] -= lr * grads[name]
        log.train_losses.append(total / n)
        if val_inputs is not None and len(val_inputs):
            log.val_losses.append(network.loss(val_inputs, val_labels) / len(val_inputs))
        if epoch_hook is not None:
            epoch_hook(epoch, network)
    return log
