"""Synthetic phantoms, coil maps, and simulated multi-coil acquisitions.

Desk-scale stand-ins for scanner data: piecewise-constant ellipses over
a smooth base profile, with optional band-limited texture so detection
tasks have genuine background variability.
"""

from __future__ import annotations

import numpy as np

from . import kspace
from .errors import ParameterError


def random_phantom(shape: tuple[int, int], rng: np.random.Generator,
                   n_ellipses: int = 5, texture: float = 0.0,
                   support: float = 0.9, texture_cutoff: float = 0.18,
                   base: str = "bump") -> np.ndarray:
    """Random ellipse phantom with values in [0, 1].

    ``texture`` adds Gaussian-smoothed noise of that RMS amplitude inside
    the support, giving backgrounds variability; ``texture_cutoff`` (in
    cycles/pixel) sets its correlation scale — small cutoffs give smooth
    blobs with little energy at the lesion scale, which keeps a compact
    detection target discriminable.  ``support`` is the object radius as
    a fraction of the half field of view; compact objects (~0.45) leave
    room for undersampling ghosts to land on empty background, which
    keeps quality degradation monotone in the undersampling step.
    ``base`` selects the anatomy profile: a peaked Gaussian ``bump``
    (broadband edges, good for reconstruction-quality orderings) or a
    flat-top ``plateau`` whose interior is statistically stationary
    (good for detection tasks).
    """
    h, w = shape
    yy = (np.arange(h)[:, None] - h / 2) / (h / 2)
    xx = (np.arange(w)[None, :] - w / 2) / (w / 2)

    r2 = yy**2 + xx**2
    r = np.sqrt(r2)
    if base == "bump":
        img = 0.5 * np.exp(-r2 / (2 * (0.7 * support) ** 2))
    elif base == "plateau":
        # flat interior disk plus a bright annulus; the annulus is always
        # the slice maximum, so per-slice display normalization treats the
        # signal-present and signal-absent branches identically
        edge = 0.03 * support
        core = 0.55 / (1.0 + np.exp((r - 0.72 * support) / edge))
        annulus = (1.0 / (1.0 + np.exp((0.8 * support - r) / edge))
                   / (1.0 + np.exp((r - 0.95 * support) / edge)))
        img = core + annulus
    else:
        raise ParameterError(f"unknown phantom base {base!r}")
    inside = r2 <= support**2

    for _ in range(n_ellipses):
        cy, cx = rng.uniform(-0.6 * support, 0.6 * support, size=2)
        ay, ax = rng.uniform(0.05, 0.45 * support, size=2)
        theta = rng.uniform(0, np.pi)
        amp = rng.uniform(-0.35, 0.6)
        yr = (yy - cy) * np.cos(theta) + (xx - cx) * np.sin(theta)
        xr = -(yy - cy) * np.sin(theta) + (xx - cx) * np.cos(theta)
        img = img + amp * (((yr / ay) ** 2 + (xr / ax) ** 2) <= 1.0)

    img = np.clip(img, 0.0, None) * inside
    if texture > 0:
        noise = rng.standard_normal(shape)
        smooth = np.abs(
            kspace.ifft2c(kspace.fft2c(noise) * _gaussian_lowpass(shape, texture_cutoff))
        )
        smooth = smooth - smooth.mean()
        rms = np.sqrt(np.mean(smooth**2))
        if rms > 0:
            img = np.clip(img + texture * smooth / rms * inside, 0.0, None)
    peak = img.max()
    return img / peak if peak > 0 else img


def _gaussian_lowpass(shape: tuple[int, int], cutoff: float) -> np.ndarray:
    h, w = shape
    v = (np.arange(h) - h // 2)[:, None] / h
    u = (np.arange(w) - w // 2)[None, :] / w
    return np.exp(-(v**2 + u**2) / (2 * cutoff**2))


def gaussian_sensitivities(n_coils: int, shape: tuple[int, int],
                           width: float = 0.9) -> np.ndarray:
    """Smooth normalized coil maps with Gaussian profiles around the FOV edge.

    Returned maps satisfy sum-of-squares = 1 at every pixel, each with a
    constant per-coil phase.
    """
    if n_coils < 1:
        raise ParameterError(f"need at least one coil, got {n_coils}")
    h, w = shape
    yy = (np.arange(h)[:, None] - h / 2) / (h / 2)
    xx = (np.arange(w)[None, :] - w / 2) / (w / 2)
    maps = np.empty((n_coils, h, w), dtype=np.complex128)
    for c in range(n_coils):
        ang = 2 * np.pi * c / n_coils
        cy, cx = 0.75 * np.sin(ang), 0.75 * np.cos(ang)
        profile = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * width**2)) + 0.05
        maps[c] = profile * np.exp(1j * ang / 2)
    sos = np.sqrt(np.sum(np.abs(maps) ** 2, axis=0))
    return maps / sos


def simulate_multicoil_kspace(img, smaps) -> np.ndarray:
    """Forward model: per-coil k-space of the sensitivity-weighted image."""
    img = np.asarray(img)
    smaps = np.asarray(smaps)
    return np.stack([kspace.fft2c(smaps[c] * img) for c in range(smaps.shape[0])])


def make_phantom_slices(n_slices: int, shape: tuple[int, int], n_coils: int,
                        seed: int, texture: float = 0.0, support: float = 0.9,
                        n_ellipses: int = 5, texture_cutoff: float = 0.18,
                        base: str = "bump") -> list[np.ndarray]:
    """Simulated multi-coil acquisitions of independent random phantoms."""
    rng = np.random.default_rng(seed)
    smaps = gaussian_sensitivities(n_coils, shape)
    return [
        simulate_multicoil_kspace(
            random_phantom(shape, rng, n_ellipses=n_ellipses, texture=texture,
                           support=support, texture_cutoff=texture_cutoff, base=base),
            smaps,
        )
        for _ in range(n_slices)
    ]
