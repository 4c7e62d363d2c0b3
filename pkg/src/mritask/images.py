"""16-bit grayscale PNG storage for observer-study images."""

from __future__ import annotations

import io

import numpy as np
from PIL import Image

from .errors import DataError


def to_uint16(img) -> np.ndarray:
    """Quantize a [0, 1] image to uint16 (value = round(65535 * v))."""
    img = np.asarray(img, dtype=np.float64)
    if not np.all(np.isfinite(img)):
        raise DataError("image must be finite")
    if img.min() < 0.0 or img.max() > 1.0:
        raise DataError(
            f"image must lie in [0, 1], got range [{img.min():.4g}, {img.max():.4g}]"
        )
    return np.round(img * 65535.0).astype(np.uint16)


def save_png16(path, img) -> None:
    arr = to_uint16(img)
    Image.fromarray(arr).save(path, format="PNG")  # uint16 -> mode I;16


def load_png16(path) -> np.ndarray:
    """Load a 16-bit grayscale PNG back to float64 in [0, 1]."""
    with Image.open(path) as im:
        arr = np.asarray(im)
    if arr.dtype == np.int32:  # Pillow may widen I;16 to I
        arr = arr.astype(np.uint16)
    if arr.dtype != np.uint16:
        raise DataError(f"expected a 16-bit grayscale PNG, got dtype {arr.dtype}")
    return arr.astype(np.float64) / 65535.0


def png16_to_png8_bytes(path) -> bytes:
    """Render a stored 16-bit image as an 8-bit PNG (the display mapping)."""
    v = load_png16(path)
    arr8 = np.round(v * 255.0).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr8, mode="L").save(buf, format="PNG")
    return buf.getvalue()
