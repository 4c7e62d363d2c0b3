"""1-D kx undersampling masks and the zero-filled network input pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kspace
from .errors import ParameterError, ShapeMismatchError


@dataclass(frozen=True)
class MaskSpec:
    """Column sampling rule: keep a centered low band, then every k-th column."""

    width: int
    k: int
    low_count: int = 16

    def __post_init__(self):
        if self.width < 1:
            raise ParameterError(f"width must be positive, got {self.width}")
        if self.k < 1:
            raise ParameterError(f"k must be >= 1, got {self.k}")
        if not (0 < self.low_count <= self.width):
            raise ParameterError(
                f"low_count must be in 1..{self.width}, got {self.low_count}"
            )


@dataclass(frozen=True)
class SamplingMask:
    width: int
    sampled: np.ndarray  # boolean per column
    spec: MaskSpec | None = field(default=None, compare=False)

    def __post_init__(self):
        sampled = np.asarray(self.sampled, dtype=bool)
        if sampled.shape != (self.width,):
            raise ShapeMismatchError(
                f"sampled must have shape ({self.width},), got {sampled.shape}"
            )
        if not sampled.any():
            raise ParameterError("a sampling mask must sample at least one column")
        object.__setattr__(self, "sampled", sampled)

    @property
    def sampled_count(self) -> int:
        return int(self.sampled.sum())

    @property
    def effective_factor(self) -> float:
        return self.width / self.sampled_count


def make_mask(spec: MaskSpec) -> SamplingMask:
    """Build the column mask for a spec.

    The centered ``low_count`` columns are always sampled; of the remaining
    columns, every k-th one (ascending index, first remaining column
    included) is sampled.  Sampled count is
    ``low_count + ceil((width - low_count) / k)``.
    """
    sampled = np.zeros(spec.width, dtype=bool)
    band = kspace.center_band(spec.width, spec.low_count)
    sampled[band] = True
    remaining = np.flatnonzero(~sampled)
    sampled[remaining[::spec.k]] = True
    return SamplingMask(width=spec.width, sampled=sampled, spec=spec)


def effective_undersampling(mask: SamplingMask) -> float:
    """Total columns divided by sampled columns."""
    return mask.effective_factor


def apply_mask(ks, mask: SamplingMask) -> np.ndarray:
    """Zero every unsampled column of a k-space plane."""
    ks = np.asarray(ks)
    if ks.ndim != 2 or ks.shape[1] != mask.width:
        raise ShapeMismatchError(
            f"k-space width {ks.shape} does not match mask width {mask.width}"
        )
    return ks * mask.sampled[np.newaxis, :]


def reference_recon(mck, smap=None) -> np.ndarray:
    """Fully sampled reference image: |R=1 SENSE recon| rescaled to [0, 1]."""
    mck = np.asarray(mck)
    if smap is None:
        smap = kspace.estimate_sensitivities(mck)
    coil_imgs = np.stack([kspace.ifft2c(mck[c]) for c in range(mck.shape[0])])
    combined = kspace.sense_r1_combine(coil_imgs, smap)
    return kspace.normalize01(np.abs(combined))


def build_network_input(mck, mask: SamplingMask, smap=None) -> np.ndarray:
    """Zero-filled undersampled image fed to the reconstruction network.

    Pipeline: estimate sensitivities (unless given), inverse transform each
    coil, SENSE-combine at R=1, forward transform the combined image,
    apply the column mask, inverse transform, take magnitude, rescale to
    [0, 1].
    """
    mck = np.asarray(mck)
    if smap is None:
        smap = kspace.estimate_sensitivities(mck)
    coil_imgs = np.stack([kspace.ifft2c(mck[c]) for c in range(mck.shape[0])])
    combined = kspace.sense_r1_combine(coil_imgs, smap)
    if mask.sampled.all():  # masking is the identity; keep 1x bit-equal to the reference
        return kspace.normalize01(np.abs(combined))
    masked = apply_mask(kspace.fft2c(combined), mask)
    return kspace.normalize01(np.abs(kspace.ifft2c(masked)))


def mask_to_text(mask: SamplingMask) -> str:
    """Two-line export: the spec summary, then sampled column indices."""
    spec = mask.spec
    if spec is None:
        header = f"width={mask.width} k=? low=?"
    else:
        header = f"width={spec.width} k={spec.k} low={spec.low_count}"
    cols = ",".join(str(i) for i in np.flatnonzero(mask.sampled))
    return f"{header}\n{cols}\n"


def mask_to_png(mask: SamplingMask, path, height: int | None = None) -> None:
    """Write the broadcast 2-D mask (white = sampled) as a grayscale PNG."""
    from PIL import Image

    h = height if height is not None else mask.width
    row = np.where(mask.sampled, 255, 0).astype(np.uint8)
    img = np.repeat(row[np.newaxis, :], h, axis=0)
    Image.fromarray(img, mode="L").save(path, format="PNG")
