"""Seeded training loop: LR schedule, early stopping, best-checkpoint return.

Datasets are kept as uint8 arrays (N, C, H, W) with values in 0..255 and
converted to float64 in [0, 1] one batch at a time. Runs are bit-reproducible
for a fixed config.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .adam import AdamHyper, AdamState, adam_step
from .loss import bce_loss
from .network import Network


@dataclass(frozen=True)
class TrainConfig:
    initial_lr: float = 0.1
    lr_factor: float = 0.5
    lr_period_epochs: int = 12
    batch_size: int = 102
    max_epochs: int = 120
    patience: int = 20
    loss: str = "bce"  # bce | weighted_bce
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.initial_lr <= 0 or self.lr_factor <= 0 or self.lr_period_epochs < 1:
            raise ValueError("learning-rate schedule parameters must be positive")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ValueError("batch_size, max_epochs and patience must be >= 1")
        if self.loss not in ("bce", "weighted_bce"):
            raise ValueError(f"unknown loss {self.loss!r}")


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    lr: list = field(default_factory=list)
    best_epoch: int = -1
    best_val_loss: float = math.inf
    pos_weight: float = 1.0
    stopped_early: bool = False


def lr_at_epoch(cfg, epoch):
    """Step schedule: initial_lr * lr_factor ** floor(epoch / period), 0-indexed."""
    return cfg.initial_lr * cfg.lr_factor ** (epoch // cfg.lr_period_epochs)


def steps_per_epoch(n_train, batch_size):
    return math.ceil(n_train / batch_size)


def _batches(order, batch_size):
    for start in range(0, len(order), batch_size):
        yield order[start : start + batch_size]


def _to_float(u8):
    return u8.astype(np.float64) / 255.0


def pos_weight_from_targets(targets_u8):
    """Bulk-to-boundary pixel ratio of the training targets."""
    ones = int((targets_u8 > 0).sum())
    zeros = targets_u8.size - ones
    if ones == 0:
        raise ValueError("training targets contain no boundary pixels")
    return zeros / ones


def evaluate_loss(net, x_u8, y_u8, batch_size, pos_weight):
    """Mean BCE over a split, forward passes in infer mode."""
    total = 0.0
    for idx in _batches(np.arange(len(x_u8)), batch_size):
        pred = net.forward(_to_float(x_u8[idx]), mode="infer")
        loss, _ = bce_loss(pred, _to_float(y_u8[idx]), pos_weight)
        total += loss * len(idx)
    return total / len(x_u8)


def predict(net, x_u8, batch_size=16):
    """Thresholded {0,255} masks for a stack of inputs, infer mode."""
    out = np.empty((len(x_u8), x_u8.shape[2], x_u8.shape[3]), dtype=np.uint8)
    for idx in _batches(np.arange(len(x_u8)), batch_size):
        pred = net.forward(_to_float(x_u8[idx]), mode="infer")
        out[idx] = (pred[:, 0] >= 0.5).astype(np.uint8) * 255
    return out


def train(spec, train_x, train_y, val_x, val_y, cfg, log=None):
    """Train a fresh network; returns (best state dict, history).

    The checkpoint returned is the one with minimum validation loss. Training
    stops after `patience` epochs without validation improvement, or at
    max_epochs.
    """
    if len(train_x) == 0 or len(val_x) == 0:
        raise ValueError("empty training or validation split")
    if cfg.batch_size > len(train_x):
        raise ValueError(f"batch_size {cfg.batch_size} exceeds training-set size {len(train_x)}")

    net = Network(spec, rng=np.random.default_rng([cfg.seed, 0]))
    shuffle_rng = np.random.default_rng([cfg.seed, 1])
    pos_weight = pos_weight_from_targets(train_y) if cfg.loss == "weighted_bce" else 1.0

    adam_states = {}
    history = TrainHistory(pos_weight=pos_weight)
    best_state = net.get_state()
    since_best = 0

    for epoch in range(cfg.max_epochs):
        lr = lr_at_epoch(cfg, epoch)
        hyper = AdamHyper(alpha=lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)
        order = shuffle_rng.permutation(len(train_x))
        epoch_loss = 0.0
        for idx in _batches(order, cfg.batch_size):
            pred = net.forward(_to_float(train_x[idx]), mode="train")
            loss, dpred = bce_loss(pred, _to_float(train_y[idx]), pos_weight)
            net.backward(dpred)
            for key_i, role, value, grad in net.param_entries():
                key = (key_i, role)
                if key not in adam_states:
                    adam_states[key] = AdamState.for_param(value)
                adam_step(value, grad, adam_states[key], hyper)
            epoch_loss += loss * len(idx)
        epoch_loss /= len(train_x)

        val_loss = evaluate_loss(net, val_x, val_y, cfg.batch_size, pos_weight)
        history.train_loss.append(epoch_loss)
        history.val_loss.append(val_loss)
        history.lr.append(lr)
        if log is not None:
            log(epoch, epoch_loss, val_loss, lr)

        if val_loss < history.best_val_loss:
            history.best_val_loss = val_loss
            history.best_epoch = epoch
            best_state = net.get_state()
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                history.stopped_early = True
                break

    return best_state, history
