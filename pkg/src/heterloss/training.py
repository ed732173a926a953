"""Shared minibatch training loop: batching, early stopping, divergence handling.

One loop serves both the heteroscedastic NLL models and the homoscedastic MSE
baseline so that every model in a comparison is trained under the identical
protocol: shuffled minibatches, Adam, per-epoch validation, best-weight
snapshotting and patience-based early stopping under an epoch cap.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, NumericError
from .nn import AdamState, adam_step
from .rng import stream


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of the experimental protocol."""

    batch_size: int = 1024
    learning_rate: float = 0.01
    dropout: float = 0.25
    max_epochs: int = 100
    patience: int | None = 10  # None disables early stopping
    min_delta: float = 1e-3
    repeats: int = 10
    val_fraction: float = 0.2
    confidence: float = 0.95
    seed: int = 0
    var_warmup_epochs: int = 5  # damp the log-variance gradient early on
    var_warmup_scale: float = 0.1
    output_prior_init: bool = True  # seed output biases from training-target stats

    def __post_init__(self) -> None:
        if not 0.0 < self.val_fraction < 1.0:
            raise ConfigError("val_fraction must lie strictly between 0 and 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.max_epochs < 1:
            raise ConfigError("max_epochs must be >= 1")
        if self.patience is not None and self.patience < 1:
            raise ConfigError("patience must be >= 1 (or None)")
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")


def split_train_val(
    train_indices: np.ndarray, val_fraction: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic (fit, validation) split of a row-index array.

    Models that must be compared pairwise are given the same seed so they see
    identical splits.
    """
    train_indices = np.asarray(train_indices)
    order = stream(seed, "split").permutation(len(train_indices))
    n_val = max(1, int(round(val_fraction * len(order))))
    return train_indices[order[n_val:]], train_indices[order[:n_val]]


@dataclass
class TrainingHistory:
    """Per-epoch loss curves plus the early-stopping outcome."""

    train_curve: list[float] = field(default_factory=list)
    val_curve: list[float] = field(default_factory=list)
    best_epoch: int = -1
    best_val: float = float("inf")
    stopped_early: bool = False
    failed: bool = False
    failure_reason: str | None = None

    @property
    def epochs_run(self) -> int:
        return len(self.val_curve)


def fit(
    parameters: list[np.ndarray],
    batch_grad: Callable[[np.ndarray, int], tuple[float, list[np.ndarray]]],
    val_loss: Callable[[], float],
    n_rows: int,
    config: TrainConfig,
    shuffle_rng: np.random.Generator,
) -> TrainingHistory:
    """Train in place; on return ``parameters`` hold the best-validation weights.

    ``batch_grad(indices, epoch)`` returns the minibatch loss and gradients
    aligned with ``parameters``. A non-finite loss aborts the run: the history
    is flagged failed (with the partial loss trace kept) and the parameters
    are restored to the best snapshot seen so far.
    """
    history = TrainingHistory()
    adam = AdamState.for_params(parameters, learning_rate=config.learning_rate)
    best_snapshot = [p.copy() for p in parameters]
    # the snapshot tracks the exact validation minimum; the patience counter
    # only resets on improvements of at least min_delta
    patience_ref = float("inf")
    bad_epochs = 0

    for epoch in range(config.max_epochs):
        order = shuffle_rng.permutation(n_rows)
        losses = []
        try:
            for start in range(0, n_rows, config.batch_size):
                idx = order[start : start + config.batch_size]
                loss, grads = batch_grad(idx, epoch)
                if not np.isfinite(loss):
                    raise NumericError(f"non-finite loss {loss}")
                losses.append(loss)
                adam_step(parameters, grads, adam)
            v = val_loss()
            if not np.isfinite(v):
                raise NumericError(f"non-finite validation loss {v}")
        except NumericError as exc:
            history.failed = True
            history.failure_reason = str(exc)
            if losses:
                history.train_curve.append(float(np.mean(losses)))
            for p, snap in zip(parameters, best_snapshot):
                p[...] = snap
            return history

        history.train_curve.append(float(np.mean(losses)))
        history.val_curve.append(float(v))

        if v < history.best_val:
            history.best_val = float(v)
            history.best_epoch = epoch
            best_snapshot = [p.copy() for p in parameters]
        if v < patience_ref - config.min_delta:
            patience_ref = float(v)
            bad_epochs = 0
        else:
            bad_epochs += 1
            if config.patience is not None and bad_epochs >= config.patience:
                history.stopped_early = True
                break

    for p, snap in zip(parameters, best_snapshot):
        p[...] = snap
    return history
