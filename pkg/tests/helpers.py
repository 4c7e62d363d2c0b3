"""Shared test oracles: finite differences, brute-force SSIM, rasterized disks."""

from __future__ import annotations

import numpy as np

from mritask.autodiff import Tensor


def numeric_gradient(make_loss, tensor: Tensor, indices=None, h: float = 1e-5):
    """Central finite differences of a scalar loss w.r.t. tensor entries."""
    flat = tensor.data.reshape(-1)
    if indices is None:
        indices = range(flat.size)
    grads = {}
    for i in indices:
        orig = flat[i]
        flat[i] = orig + h
        lp = float(make_loss().data)
        flat[i] = orig - h
        lm = float(make_loss().data)
        flat[i] = orig
        grads[i] = (lp - lm) / (2.0 * h)
    return grads


def rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(a), abs(b))


def max_fd_error(make_loss, tensors, indices_per_tensor=None, h: float = 1e-5,
                 fallback_h=(1e-6, 1e-7), tol: float = 1e-4) -> float:
    """Worst relative error between analytic and numeric gradients.

    Coordinates that fail at the primary step are re-probed at smaller
    steps: a finite-difference window that straddles a ReLU / max-pool
    kink poisons the estimate, but shrinking h makes such estimates
    converge to the true one-sided derivative, while a genuinely wrong
    analytic gradient keeps failing at every step size.
    """
    for t in tensors:
        t.grad = None
    make_loss().backward()
    analytic = {id(t): t.grad.copy() for t in tensors}

    worst = 0.0
    for t in tensors:
        an = analytic[id(t)].reshape(-1)
        idx = None if indices_per_tensor is None else indices_per_tensor(t)
        num = numeric_gradient(make_loss, t, indices=idx, h=h)
        for i, n in num.items():
            err = rel_err(an[i], n)
            if err >= tol:
                for hh in fallback_h:
                    n2 = numeric_gradient(make_loss, t, indices=[i], h=hh)[i]
                    err = min(err, rel_err(an[i], n2))
            worst = max(worst, err)
    return worst


def ssim_reference(a: np.ndarray, b: np.ndarray, window: np.ndarray,
                   c1: float, c2: float) -> float:
    """Brute-force windowed SSIM: explicit loop over valid window positions."""
    k = window.shape[0]
    h, w = a.shape
    values = []
    for i in range(h - k + 1):
        for j in range(w - k + 1):
            pa = a[i : i + k, j : j + k]
            pb = b[i : i + k, j : j + k]
            mu_a = float(np.sum(window * pa))
            mu_b = float(np.sum(window * pb))
            va = float(np.sum(window * (pa - mu_a) ** 2))
            vb = float(np.sum(window * (pb - mu_b) ** 2))
            cov = float(np.sum(window * (pa - mu_a) * (pb - mu_b)))
            values.append(
                ((2 * mu_a * mu_b + c1) * (2 * cov + c2))
                / ((mu_a**2 + mu_b**2 + c1) * (va + vb + c2))
            )
    return float(np.mean(values))


def rasterize_blurred_disk(radius: float, sigma: float, amplitude: float,
                           center: tuple[float, float], shape: tuple[int, int],
                           ss: int = 16, aa: int = 8,
                           return_fine: bool = False) -> np.ndarray:
    """Supersampled rasterization oracle for the analytic lesion transform.

    The disk indicator is rendered with ``aa**2`` coverage samples per
    supersample (an antialiased rasterizer), blurred by the Gaussian at
    the fine grid, then box-averaged down to the pixel grid.
    """
    h, w = shape
    hh, ww = h * ss, w * ss
    rows = (np.arange(hh * aa) + 0.5) / (ss * aa) - 0.5
    cols = (np.arange(ww * aa) + 0.5) / (ss * aa) - 0.5
    dy = rows[:, None] - center[0]
    dx = cols[None, :] - center[1]
    fine = (dy**2 + dx**2 <= radius**2).astype(float)
    disk = amplitude * fine.reshape(hh, aa, ww, aa).mean(axis=(1, 3))
    sig = sigma * ss
    fy = np.fft.fftfreq(hh)
    fx = np.fft.fftfreq(ww)
    gauss = np.exp(-2 * np.pi**2 * sig**2 * (fy[:, None] ** 2 + fx[None, :] ** 2))
    blurred = np.fft.ifft2(np.fft.fft2(disk) * gauss).real
    if return_fine:
        return blurred
    return blurred.reshape(h, ss, w, ss).mean(axis=(1, 3))


def binomial_chance_interval(n: int, level_sd: float = 1.96) -> tuple[float, float]:
    """Central interval (in percent) around 50% for n Bernoulli(0.5) trials."""
    half = 100.0 * level_sd * np.sqrt(0.25 / n)
    return 50.0 - half, 50.0 + half
