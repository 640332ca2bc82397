"""Deterministic mini-batch training with validation tracking."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from hijackmap.nnkit.losses import LOSSES
from hijackmap.nnkit.optim import AdamState, adam_step


class TrainingDiverged(RuntimeError):
    """Raised when the loss turns non-finite mid-training."""


@dataclass
class TrainConfig:
    batch_size: int = 32
    epochs: int = 20
    val_fraction: float = 0.2
    seed: int = 0
    loss: str = "bce"
    lr: float = 0.001

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError("val_fraction must be in [0, 1)")
        if self.loss not in LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}")


@dataclass
class EpochTrace:
    """Per-epoch metrics recorded at each epoch's end."""

    train_loss: list[float] = field(default_factory=list)
    train_acc: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    val_acc: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.train_loss)


def accuracy(probs: np.ndarray, targets: np.ndarray) -> float:
    preds = (np.asarray(probs).ravel() >= 0.5).astype(int)
    return float(np.mean(preds == np.asarray(targets).ravel().astype(int)))


def evaluate(model, x: np.ndarray, y: np.ndarray, loss: str = "bce") -> tuple[float, float]:
    """(mean loss, accuracy) of a model over a featurized labeled set."""
    loss_fn, _ = LOSSES[loss]
    probs = model.predict(x)
    return loss_fn(probs, y), accuracy(probs, y)


def split_validation(
    x: np.ndarray, y: np.ndarray, fraction: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Trailing ceil(fraction * n) rows after a seeded shuffle become val."""
    n = len(x)
    n_val = math.ceil(fraction * n)
    order = rng.permutation(n)
    fit_idx, val_idx = order[: n - n_val], order[n - n_val :]
    return x[fit_idx], y[fit_idx], x[val_idx], y[val_idx]


def train(
    model,
    x: np.ndarray,
    y: np.ndarray,
    config: TrainConfig,
    val: tuple[np.ndarray, np.ndarray] | None = None,
) -> EpochTrace:
    """Run Adam over seeded shuffled mini-batches, mutating the model.

    When ``val`` is not supplied and config.val_fraction > 0, the function
    carves the validation split out of ``x`` itself. Each epoch reshuffles
    the fit rows; the last partial batch is used, not dropped. Identical
    seeds give bitwise-identical final parameters.
    """
    if len(x) == 0:
        raise ValueError("training data must be non-empty")
    x = np.asarray(x)
    y = np.asarray(y, dtype=np.float64).ravel()
    if len(x) != len(y):
        raise ValueError(f"{len(x)} inputs but {len(y)} labels")
    rng = np.random.default_rng(config.seed)
    if val is not None:
        fit_x, fit_y = x, y
        val_x, val_y = val
    elif config.val_fraction > 0:
        fit_x, fit_y, val_x, val_y = split_validation(x, y, config.val_fraction, rng)
    else:
        fit_x, fit_y = x, y
        val_x = val_y = None

    if len(fit_x) == 0:
        raise ValueError("validation split leaves no rows to fit on")
    loss_fn, loss_grad = LOSSES[config.loss]
    params = model.network.parameters()
    state = AdamState.for_params(params, lr=config.lr)
    trace = EpochTrace()
    n_fit = len(fit_x)

    for epoch in range(config.epochs):
        order = rng.permutation(n_fit)
        for batch_no, start in enumerate(range(0, n_fit, config.batch_size)):
            idx = order[start : start + config.batch_size]
            bx, by = fit_x[idx], fit_y[idx]
            model.network.zero_grad()
            probs = model.network.forward(bx)
            loss_value = loss_fn(probs, by)
            if not math.isfinite(loss_value):
                raise TrainingDiverged(
                    f"non-finite loss {loss_value} at epoch {epoch + 1}, batch {batch_no + 1}"
                )
            d_probs = loss_grad(probs.ravel(), by).reshape(probs.shape)
            model.network.backward(d_probs)
            adam_step(params, model.network.gradients(), state)
        t_loss, t_acc = evaluate(model, fit_x, fit_y, config.loss)
        trace.train_loss.append(t_loss)
        trace.train_acc.append(t_acc)
        if val_x is not None and len(val_x):
            v_loss, v_acc = evaluate(model, val_x, val_y, config.loss)
            trace.val_loss.append(v_loss)
            trace.val_acc.append(v_acc)
    model.adam_steps = state.step
    return trace
