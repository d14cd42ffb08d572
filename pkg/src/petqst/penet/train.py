from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import EmptyDataset, NonFinite, ShapeMismatch
from ..numerics import derive_rng
from ..tqst import MeasurementRecord, decode_values
from .layers import MSELoss
from .models import Model
from .optim import Adam

log = logging.getLogger(__name__)


@dataclass
class TrainHyper:
    epochs: int = 100
    batch_size: int = 32
    lr: float = 1e-4
    seed: int = 0


@dataclass
class TrainResult:
    model: Model
    history: list[dict] = field(default_factory=list)

    @property
    def train_loss(self) -> list[float]:
        return [h["train_loss"] for h in self.history]

    @property
    def val_loss(self) -> list[float]:
        return [h["val_loss"] for h in self.history]


def _as_batch(model: Model, x) -> np.ndarray:
    """Accept a record, a flat array ``(4**n,)``/``(B, 4**n)`` or grids ``(B, N, N, 2)``."""
    if isinstance(x, MeasurementRecord):
        x = x.values
    x = np.asarray(x, dtype=float)
    if x.ndim >= 3 and x.shape[-1] == 2 and x.shape[-2] == x.shape[-3]:
        x = decode_values(x)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.config.input_size:
        raise ShapeMismatch(f"model expects inputs of length {model.config.input_size}, got {x.shape}")
    return x


def predict(model: Model, x, batch_size: int = 1024) -> np.ndarray:
    """Inference with dropout disabled; returns ``(B, out)`` in input order."""
    xb = _as_batch(model, x)
    was_training = model.net.training
    model.eval()
    try:
        out = [model.forward(xb[k : k + batch_size]) for k in range(0, len(xb), batch_size)]
    finally:
        model.train(was_training)
    return np.concatenate(out, axis=0)


def evaluate_loss(model: Model, x: np.ndarray, y: np.ndarray, batch_size: int = 1024) -> float:
    if len(x) == 0:
        return float("nan")
    pred = predict(model, x, batch_size)
    return float(np.mean((pred - y) ** 2))


def train(
    model: Model,
    train_x: np.ndarray,
    train_y: np.ndarray,
    val_x: np.ndarray | None = None,
    val_y: np.ndarray | None = None,
    hyper: TrainHyper | None = None,
    on_epoch: Callable[[dict], None] | None = None,
) -> TrainResult:
    """Minibatch Adam on the mean squared error.

    A fresh seeded permutation of the training set is drawn every epoch, so
    identical seeds give bit-identical parameters.
    """
    hyper = hyper or TrainHyper()
    train_x = np.asarray(train_x, dtype=float)
    train_y = np.asarray(train_y, dtype=float)
    if len(train_x) == 0:
        raise EmptyDataset("training set is empty")
    if train_y.ndim == 1:
        train_y = train_y[:, None]
    if val_y is not None and np.ndim(val_y) == 1:
        val_y = np.asarray(val_y)[:, None]

    shuffle_rng = derive_rng(hyper.seed, 7)
    opt = Adam(model.params(), lr=hyper.lr)
    loss_fn = MSELoss()
    result = TrainResult(model)
    n = len(train_x)
    for epoch in range(1, hyper.epochs + 1):
        model.train()
        order = shuffle_rng.permutation(n)
        total = 0.0
        for start in range(0, n, hyper.batch_size):
            idx = order[start : start + hyper.batch_size]
            opt.zero_grad()
            pred = model.forward(train_x[idx])
            total += loss_fn(pred, train_y[idx]) * len(idx)
            model.backward(loss_fn.backward())
            opt.step()
        train_loss = total / n
        if not np.isfinite(train_loss):
            raise NonFinite(f"training loss became {train_loss} at epoch {epoch}")
        val_loss = evaluate_loss(model, val_x, val_y) if val_x is not None and len(val_x) else float("nan")
        row = {"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss}
        result.history.append(row)
        log.debug("epoch %d train %.6g val %.6g", epoch, train_loss, val_loss)
        if on_epoch is not None:
            on_epoch(row)
    model.eval()
    return result
