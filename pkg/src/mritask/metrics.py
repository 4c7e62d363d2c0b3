"""Image quality scoring: windowed structural similarity and normalized RMSE.

The structural-similarity computation is written once against the
autodiff tensors; training losses differentiate through it and plain
scoring evaluates it on constant tensors and reads the scalar back.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import DataError, ParameterError, ShapeMismatchError


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    ax = np.arange(size) - size // 2
    g = np.exp(-(ax**2) / (2.0 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


@dataclass(frozen=True)
class SSIMParams:
    window_size: int = 11
    window_sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    data_range: float = 1.0

    def __post_init__(self):
        if self.k1 <= 0 or self.k2 <= 0:
            raise ParameterError("K1 and K2 must be positive")
        if self.window_size < 1 or self.window_size % 2 == 0:
            raise ParameterError("window_size must be a positive odd number")

    @property
    def c1(self) -> float:
        return (self.k1 * self.data_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.data_range) ** 2

    @property
    def window(self) -> np.ndarray:
        return _gaussian_window(self.window_size, self.window_sigma)


def ssim_metric_tensor(y, yhat, params: SSIMParams | None = None) -> Tensor:
    """Mean SSIM over a (B, 1, H, W) batch, differentiable.

    Windows are Gaussian-weighted and evaluated only where they fit fully
    inside the image (no padding).  Returns the average over images of
    each image's mean local SSIM index.
    """
    params = params or SSIMParams()
    if not isinstance(y, Tensor):
        y = Tensor(y)
    if not isinstance(yhat, Tensor):
        yhat = Tensor(yhat)
    if y.data.shape != yhat.data.shape:
        raise ShapeMismatchError(f"shape mismatch {y.data.shape} vs {yhat.data.shape}")
    if y.data.ndim != 4:
        raise ShapeMismatchError("expected (B, 1, H, W) batches")
    h, w = y.data.shape[2:]
    if h < params.window_size or w < params.window_size:
        raise ShapeMismatchError(
            f"image {h}x{w} is smaller than the {params.window_size}x{params.window_size} window"
        )
    win = Tensor(params.window[None, None])

    mu_a = ad.conv2d(y, win)
    mu_b = ad.conv2d(yhat, win)
    va = ad.conv2d(y * y, win) - mu_a * mu_a
    vb = ad.conv2d(yhat * yhat, win) - mu_b * mu_b
    cov = ad.conv2d(y * yhat, win) - mu_a * mu_b

    c1, c2 = params.c1, params.c2
    num = (2.0 * (mu_a * mu_b) + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (va + vb + c2)
    return ad.tmean(num / den)


def ssim_pair(a, b, params: SSIMParams | None = None) -> float:
    """SSIM between two 2-D images."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2:
        raise ShapeMismatchError(f"images must share a 2-D shape, got {a.shape} / {b.shape}")
    return float(ssim_metric_tensor(a[None, None], b[None, None], params).data)


@dataclass
class EvaluationSet:
    """Paired references and reconstructions for one condition."""

    references: np.ndarray  # (m, H, W)
    reconstructions: np.ndarray
    condition: str = ""

    def __post_init__(self):
        self.references = np.asarray(self.references, dtype=np.float64)
        self.reconstructions = np.asarray(self.reconstructions, dtype=np.float64)
        if self.references.shape != self.reconstructions.shape:
            raise ShapeMismatchError("references and reconstructions must match in shape")
        if self.references.ndim != 3 or self.references.shape[0] < 1:
            raise DataError("need at least one image pair")

    @property
    def m(self) -> int:
        return self.references.shape[0]


def nrmse_set(eval_set: EvaluationSet) -> float:
    """sqrt(total squared error / total squared reference) over the set."""
    y = eval_set.references
    yhat = eval_set.reconstructions
    denom = float(np.sum(y * y))
    if denom == 0.0:
        raise DataError("NRMSE is undefined for all-zero references")
    return float(np.sqrt(np.sum((y - yhat) ** 2) / denom))


def ssim_set(eval_set: EvaluationSet, params: SSIMParams | None = None) -> float:
    """Average SSIM over the set's pairs."""
    return float(
        ssim_metric_tensor(
            eval_set.references[:, None], eval_set.reconstructions[:, None], params
        ).data
    )


def evaluate_condition(model, slices, mask, params: SSIMParams | None = None) -> dict:
    """Reconstruct each slice under a mask and score against references.

    Inputs are multi-coil k-space arrays; the reconstruction is the
    zero-filled image, refined by the model when one is given.  Returns
    ``{"ssim": ..., "nrmse": ...}``.
    """
    from .kspace import estimate_sensitivities
    from .sampling import build_network_input, reference_recon

    refs, recons = [], []
    for mck in slices:
        mck = np.asarray(mck)
        smap = estimate_sensitivities(mck)
        refs.append(reference_recon(mck, smap=smap))
        x = build_network_input(mck, mask, smap=smap)
        recons.append(model.predict(x) if model is not None else x)
    es = EvaluationSet(np.stack(refs), np.stack(recons))
    return {"ssim": ssim_set(es, params), "nrmse": nrmse_set(es)}


# -- reporting helpers ----------------------------------------------------------


def round_half_up(value: float, decimals: int = 3) -> float:
    from decimal import ROUND_HALF_UP, Decimal

    q = Decimal(1).scaleb(-decimals)
    return float(Decimal(repr(float(value))).quantize(q, rounding=ROUND_HALF_UP))


def _fmt(value: float, decimals: int = 3) -> str:
    v = round_half_up(value, decimals)
    if v == int(v) and value == int(value):
        return str(int(v))
    return f"{v:.{decimals}f}"


def format_mean_std(mean: float, std: float | None, decimals: int = 3) -> str:
    """The tables' cell style: "mean/std" at 3 decimals, bare integers kept bare."""
    if std is None:
        return _fmt(mean, decimals)
    return f"{_fmt(mean, decimals)}/{_fmt(std, decimals)}"


def write_metrics_csv(path, rows) -> None:
    """rows: iterables of (condition, metric, mean, std, n)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["condition", "metric", "mean", "std", "n"])
        for row in rows:
            writer.writerow(list(row))


@dataclass
class MetricReport:
    """Per-condition mean/std scores with their provenance."""

    condition: str
    ssim_mean: float
    ssim_std: float
    nrmse_mean: float
    nrmse_std: float
    n: int
    notes: list[str] = field(default_factory=list)

    def cells(self) -> dict[str, str]:
        return {
            "ssim": format_mean_std(self.ssim_mean, self.ssim_std),
            "nrmse": format_mean_std(self.nrmse_mean, self.nrmse_std),
        }
