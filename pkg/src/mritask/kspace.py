"""Complex image / k-space primitives.

Conventions used throughout the toolkit:

* images are 2-D complex arrays of shape (H, W); multi-coil data are
  (C, H, W) with coil as the leading axis;
* k-space planes share the image shape and keep DC at ``(H//2, W//2)``;
* Fourier transforms are orthonormal in both directions, so Parseval
  holds symmetrically and round trips are exact to rounding.
"""

from __future__ import annotations

import warnings

import numpy as np

from .errors import ConstantImageWarning, DataError, ParameterError, ShapeMismatchError

# Pixels whose low-resolution sum-of-squares magnitude falls below this
# fraction of its maximum are treated as air: sensitivities are set to 0.
SENSITIVITY_FLOOR_FRACTION = 1e-3


def _as_plane(x, name: str) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise ShapeMismatchError(f"{name} must be a 2-D array, got shape {x.shape}")
    return x


def fft2c(img) -> np.ndarray:
    """Centered orthonormal 2-D DFT (image -> k-space, DC at (H//2, W//2))."""
    img = _as_plane(img, "img")
    return np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(img), norm="ortho"))


def ifft2c(ks) -> np.ndarray:
    """Inverse of :func:`fft2c` under the same normalization."""
    ks = _as_plane(ks, "ks")
    return np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(ks), norm="ortho"))


def center_band(width: int, count: int) -> slice:
    """Columns of the centered low-frequency band.

    The band holds `count` columns around the DC column ``width//2``; for
    odd counts the extra column sits on the low-index side.
    """
    if count <= 0 or count > width:
        raise ParameterError(f"band count must be in 1..{width}, got {count}")
    start = width // 2 - (count + 1) // 2
    # count=16 on width=320 gives columns 152..167, i.e. W//2-8 .. W//2+7
    if start < 0:
        start = 0
    if start + count > width:
        start = width - count
    return slice(start, start + count)


def estimate_sensitivities(mck, center_lines: int = 16) -> np.ndarray:
    """Estimate coil sensitivity maps from the central k-space columns.

    Per coil, all kx columns outside the centered `center_lines` band are
    zeroed, the result is inverse transformed to a low-resolution coil
    image ``L_c``, and the map is ``S_c = L_c / sqrt(sum_c |L_c|^2)``.
    Pixels where the low-resolution sum-of-squares magnitude is below
    ``SENSITIVITY_FLOOR_FRACTION`` of its maximum get ``S_c = 0``.
    """
    mck = np.asarray(mck)
    if mck.ndim != 3 or mck.shape[0] < 1:
        raise ShapeMismatchError(f"multi-coil k-space must be (C, H, W), got {mck.shape}")
    ncoils, h, w = mck.shape
    if center_lines <= 0 or center_lines > w:
        raise ParameterError(f"center_lines must be in 1..{w}, got {center_lines}")

    band = center_band(w, center_lines)
    low = np.zeros_like(mck)
    low[:, :, band] = mck[:, :, band]

    coil_imgs = np.stack([ifft2c(low[c]) for c in range(ncoils)])
    sos = np.sqrt(np.sum(np.abs(coil_imgs) ** 2, axis=0))
    floor = SENSITIVITY_FLOOR_FRACTION * sos.max()

    smap = np.zeros_like(coil_imgs)
    keep = sos >= floor
    if sos.max() > 0:
        smap[:, keep] = coil_imgs[:, keep] / sos[keep]
    return smap


def sos_combine(coil_images) -> np.ndarray:
    """Sum-of-squares coil combination: sqrt(sum_c |x_c|^2)."""
    coil_images = np.asarray(coil_images)
    if coil_images.ndim != 3:
        raise ShapeMismatchError(f"coil images must be (C, H, W), got {coil_images.shape}")
    return np.sqrt(np.sum(np.abs(coil_images) ** 2, axis=0))


def sense_r1_combine(coil_images, smap) -> np.ndarray:
    """Unaccelerated SENSE combination.

    Pixelwise ``(sum_c conj(S_c) x_c) / (sum_c |S_c|^2)``, defined as 0
    wherever the sensitivity sum of squares vanishes.
    """
    coil_images = np.asarray(coil_images)
    smap = np.asarray(smap)
    if coil_images.shape != smap.shape or coil_images.ndim != 3:
        raise ShapeMismatchError(
            f"coil images {coil_images.shape} and sensitivity maps {smap.shape} must both be (C, H, W)"
        )
    num = np.sum(np.conj(smap) * coil_images, axis=0)
    den = np.sum(np.abs(smap) ** 2, axis=0)
    out = np.zeros_like(num)
    nz = den > 0
    out[nz] = num[nz] / den[nz]
    return out


def normalize01(img) -> np.ndarray:
    """Affine rescale of a real image to min 0, max 1.

    A constant image maps to all zeros and emits :class:`ConstantImageWarning`.
    """
    img = np.asarray(img, dtype=np.float64)
    if not np.all(np.isfinite(img)):
        raise DataError("normalize01 requires finite pixel values")
    lo = img.min()
    hi = img.max()
    if hi == lo:
        warnings.warn("constant image: normalized output is all zeros", ConstantImageWarning)
        return np.zeros_like(img)
    return (img - lo) / (hi - lo)
