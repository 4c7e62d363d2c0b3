"""Training losses, the RMSProp optimizer, and the training loop."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import DataError, ParameterError, TrainingDiverged
from .metrics import SSIMParams, ssim_metric_tensor
from .unet import UNetModel


def loss_eval(kind: str, y, yhat, params: SSIMParams | None = None,
              pixel_average: bool = False):
    """Training loss over a batch of image pairs.

    ``ssim``: one minus the batch-mean SSIM.  ``mse``: the per-image total
    squared error averaged over images (set ``pixel_average`` to divide by
    the pixel count as well).  Returns a Tensor when given tensors, a
    float when given arrays.
    """
    tensor_in = isinstance(y, Tensor) or isinstance(yhat, Tensor)
    if not isinstance(y, Tensor):
        y = Tensor(np.asarray(y, dtype=np.float64))
    if not isinstance(yhat, Tensor):
        yhat = Tensor(np.asarray(yhat, dtype=np.float64))
    if y.data.shape != yhat.data.shape:
        raise DataError(f"loss shapes differ: {y.data.shape} vs {yhat.data.shape}")
    if y.data.shape[0] < 1:
        raise DataError("loss needs at least one image")
    m = y.data.shape[0]

    if kind == "mse":
        diff = y - yhat
        total = ad.tsum(diff * diff)
        denom = float(y.data.size) if pixel_average else float(m)
        loss = total * (1.0 / denom)
    elif kind == "ssim":
        loss = 1.0 - ssim_metric_tensor(y, yhat, params)
    else:
        raise ParameterError(f"unknown loss kind {kind!r}")
    return loss if tensor_in else float(loss.data)


def rmsprop_update(theta: np.ndarray, grad: np.ndarray, v: np.ndarray,
                   lr: float, rho: float, eps: float):
    """One RMSProp step: v <- rho v + (1-rho) g^2; theta <- theta - lr g/(sqrt(v)+eps)."""
    v = rho * v + (1.0 - rho) * grad * grad
    return theta - lr * grad / (np.sqrt(v) + eps), v


class RMSProp:
    """Keeps one squared-gradient accumulator per parameter, initialized to zero."""

    def __init__(self, params: dict[str, Tensor], lr: float = 1e-3, rho: float = 0.9,
                 eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.rho = rho
        self.eps = eps
        self.v = {name: np.zeros_like(p.data) for name, p in params.items()}

    def step(self):
        for name, p in self.params.items():
            if p.grad is None:
                continue
            p.data, self.v[name] = rmsprop_update(
                p.data, p.grad, self.v[name], self.lr, self.rho, self.eps
            )


@dataclass
class TrainRun:
    """Training configuration plus the per-epoch loss history it produced."""

    epochs: int = 150
    batch_size: int = 8
    lr: float = 1e-3
    rho: float = 0.9
    eps: float = 1e-8
    seed: int = 0
    pixel_average: bool = False
    lr_decay: str = "none"  # "none" | "cosine" (decays to ~lr/100 by the last epoch)
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)

    def __post_init__(self):
        if self.epochs < 1:
            raise ParameterError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ParameterError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lr_decay not in ("none", "cosine"):
            raise ParameterError(f"lr_decay must be 'none' or 'cosine', got {self.lr_decay!r}")

    def epoch_lr(self, epoch: int) -> float:
        """RMSProp's stationary jitter scales with lr; decaying it lets the
        flat image regions settle instead of carrying optimizer noise."""
        if self.lr_decay == "none" or self.epochs == 1:
            return self.lr
        t = epoch / (self.epochs - 1)
        floor = 0.01 * self.lr
        return floor + 0.5 * (self.lr - floor) * (1.0 + np.cos(np.pi * t))


def _batched_loss(model: UNetModel, x: np.ndarray, y: np.ndarray, kind: str,
                  batch_size: int, params: SSIMParams, pixel_average: bool) -> float:
    total = 0.0
    for start in range(0, x.shape[0], batch_size):
        xb = x[start : start + batch_size]
        yb = y[start : start + batch_size]
        out = model.forward(xb[:, None])
        loss = loss_eval(kind, Tensor(yb[:, None]), out, params, pixel_average)
        total += float(loss.data) * xb.shape[0]
    return total / x.shape[0]


def train(model: UNetModel, train_x, train_y, val_x=None, val_y=None,
          run: TrainRun | None = None) -> TrainRun:
    """Train in place with seeded shuffling; leaves the model in eval mode.

    All images are (N, H, W) arrays in [0, 1] — zero-filled inputs and
    fully sampled targets.  Aborts with :class:`TrainingDiverged` if the
    loss goes non-finite.
    """
    run = run or TrainRun()
    train_x = np.asarray(train_x, dtype=np.float64)
    train_y = np.asarray(train_y, dtype=np.float64)
    if train_x.shape[0] == 0:
        raise DataError("empty training set")
    if train_x.shape != train_y.shape:
        raise DataError("training inputs and targets must match in shape")
    has_val = val_x is not None and val_y is not None and len(val_x) > 0
    if has_val:
        val_x = np.asarray(val_x, dtype=np.float64)
        val_y = np.asarray(val_y, dtype=np.float64)

    kind = model.config.loss_kind
    params = SSIMParams()
    n = train_x.shape[0]
    shuffle_rng = np.random.default_rng(run.seed)
    model._rng = np.random.default_rng(run.seed + 1)  # dropout stream
    opt = RMSProp(model.params, lr=run.lr, rho=run.rho, eps=run.eps)

    for epoch in range(run.epochs):
        model.set_mode("train")
        opt.lr = run.epoch_lr(epoch)
        order = shuffle_rng.permutation(n)
        epoch_total = 0.0
        for step, start in enumerate(range(0, n, run.batch_size)):
            idx = order[start : start + run.batch_size]
            xb = Tensor(train_x[idx][:, None])
            yb = Tensor(train_y[idx][:, None])
            model.zero_grad()
            out = model.forward(xb)
            loss = loss_eval(kind, yb, out, params, run.pixel_average)
            lv = float(loss.data)
            if not np.isfinite(lv):
                model.set_mode("eval")
                raise TrainingDiverged(epoch, step, lv)
            loss.backward()
            opt.step()
            epoch_total += lv * len(idx)
        run.train_loss.append(epoch_total / n)
        if has_val:
            model.set_mode("eval")
            run.val_loss.append(
                _batched_loss(model, val_x, val_y, kind, run.batch_size, params,
                              run.pixel_average)
            )
    model.set_mode("eval")
    return run
