"""Analytic lesion synthesis and the observer-study image sets.

The detection target is a disk of sub-pixel radius blurred by a Gaussian.
Because the radius is smaller than a pixel, the signal is synthesized in
closed form in the frequency domain (Airy pattern times Gaussian times a
linear phase for the center position) instead of rasterizing it.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.special import j1

from . import images, kspace
from .errors import ParameterError, ShapeMismatchError
from .sampling import SamplingMask, build_network_input

logger = logging.getLogger(__name__)

EXPECTED_SLICE_COUNT = 50  # 4 subimages each -> 200 image pairs


@dataclass(frozen=True)
class SignalSpec:
    """Blurred-disk lesion: disk radius and amplitude plus Gaussian blur width."""

    radius_px: float = 0.25
    sigma_px: float = 1.0
    amplitude: float = 1.0
    center: tuple[float, float] = (0.0, 0.0)  # (row, col), subpixel

    def __post_init__(self):
        if self.radius_px <= 0:
            raise ParameterError(f"radius_px must be > 0, got {self.radius_px}")
        if self.sigma_px <= 0:
            raise ParameterError(f"sigma_px must be > 0, got {self.sigma_px}")
        if self.amplitude < 0:
            raise ParameterError(f"amplitude must be >= 0, got {self.amplitude}")

    def at(self, center: tuple[float, float]) -> "SignalSpec":
        return SignalSpec(self.radius_px, self.sigma_px, self.amplitude, center)


def disk_kspace(spec: SignalSpec, shape: tuple[int, int]) -> np.ndarray:
    """Frequency-domain samples of the blurred disk.

    Continuous model: a disk of radius r and amplitude A convolved with a
    unit-integral Gaussian of width sigma has transform
    ``A * r * J1(2 pi r rho) / rho * exp(-2 pi^2 sigma^2 rho^2)`` with
    ``rho`` in cycles/pixel, and DC value ``A * pi * r^2``.  The returned
    plane carries the extra ``1/sqrt(H*W)`` of the orthonormal transform
    convention so that ``ifft2c`` of it lands in image intensity units,
    plus a linear phase placing the disk center at ``spec.center``.
    """
    h, w = shape
    if h < 1 or w < 1:
        raise ParameterError(f"invalid shape {shape}")
    v = (np.arange(h) - h // 2)[:, None] / h  # cycles/pixel, row axis
    u = (np.arange(w) - w // 2)[None, :] / w
    rho = np.hypot(v, u)

    a, r, sigma = spec.amplitude, spec.radius_px, spec.sigma_px
    disk_ft = np.empty_like(rho)
    nz = rho > 0
    disk_ft[nz] = a * r * j1(2.0 * np.pi * r * rho[nz]) / rho[nz]
    disk_ft[~nz] = a * np.pi * r * r
    gauss_ft = np.exp(-2.0 * (np.pi * sigma * rho) ** 2)
    # pixel-box factor: stored pixels model the mean intensity over each
    # pixel's footprint, so a unit-pixel box average rides along
    box_ft = np.sinc(v) * np.sinc(u)

    row0, col0 = spec.center
    dy = row0 - h // 2
    dx = col0 - w // 2
    phase = np.exp(-2j * np.pi * (v * dy + u * dx))
    return disk_ft * gauss_ft * box_ft * phase / np.sqrt(h * w)


def render_signal(spec: SignalSpec, shape: tuple[int, int]) -> np.ndarray:
    """Image-domain rendering of the blurred disk (real part of the inverse DFT)."""
    return kspace.ifft2c(disk_kspace(spec, shape)).real


def insert_signal(mck, smap, spec: SignalSpec) -> np.ndarray:
    """Add the coil-weighted lesion to multi-coil measurements.

    For each coil ``k_c += fft2c(S_c * ifft2c(disk_kspace(spec)))``; the
    input array is left untouched.
    """
    mck = np.asarray(mck)
    smap = np.asarray(smap)
    if mck.shape != smap.shape or mck.ndim != 3:
        raise ShapeMismatchError(
            f"k-space {mck.shape} and sensitivity maps {smap.shape} must both be (C, H, W)"
        )
    if spec.amplitude == 0:
        return mck.copy()
    lesion = kspace.ifft2c(disk_kspace(spec, mck.shape[1:]))
    out = mck.copy()
    for c in range(mck.shape[0]):
        out[c] += kspace.fft2c(smap[c] * lesion)
    return out


def default_centers(shape: tuple[int, int]) -> tuple[tuple[int, int], ...]:
    """Quarter-position subimage centers, ordered TL, TR, BL, BR."""
    h, w = shape
    return ((h // 4, w // 4), (h // 4, 3 * w // 4), (3 * h // 4, w // 4), (3 * h // 4, 3 * w // 4))


def _crop(img: np.ndarray, center: tuple[int, int], patch: int) -> np.ndarray:
    r, c = center
    r0 = r - patch // 2
    c0 = c - patch // 2
    h, w = img.shape
    if r0 < 0 or c0 < 0 or r0 + patch > h or c0 + patch > w:
        raise ParameterError(
            f"patch {patch} at center {center} exceeds image bounds {img.shape}"
        )
    return img[r0 : r0 + patch, c0 : c0 + patch].copy()


def extract_subimages(slice_img, patch: int = 128, centers=None) -> list[np.ndarray]:
    """Crop the four observer-study subimages from a slice, TL/TR/BL/BR order."""
    slice_img = np.asarray(slice_img)
    if slice_img.ndim != 2:
        raise ShapeMismatchError(f"slice image must be 2-D, got {slice_img.shape}")
    if centers is None:
        centers = default_centers(slice_img.shape)
    return [_crop(slice_img, ctr, patch) for ctr in centers]


@dataclass
class AFCImageSet:
    """Paired background/signal subimages for one experimental condition."""

    condition: str
    signal_spec: SignalSpec
    mask_spec: dict
    model_id: str | None
    patch: int
    backgrounds: np.ndarray  # (N, patch, patch), values in [0, 1]
    signals: np.ndarray  # (N, patch, patch)
    provenance: list[tuple[int, int]]  # (slice index, subimage index) per pair
    template: np.ndarray = field(repr=False, default=None)  # display-normalized signal

    def __post_init__(self):
        if self.backgrounds.shape != self.signals.shape:
            raise ShapeMismatchError("background and signal stacks must match in shape")
        if len(self.provenance) != self.backgrounds.shape[0]:
            raise ShapeMismatchError("provenance length must match the pair count")

    @property
    def n_pairs(self) -> int:
        return self.backgrounds.shape[0]


def build_afc_dataset(
    slices,
    spec: SignalSpec,
    mask: SamplingMask,
    model=None,
    patch: int | None = None,
    centers=None,
    condition: str | None = None,
) -> AFCImageSet:
    """Construct the paired background/signal image set for one condition.

    For every slice and each subimage center: the background branch
    reconstructs the slice (zero-filled input, then the model if given)
    and crops; the signal branch inserts the lesion at that center into
    the multi-coil measurements, reconstructs identically, and crops.
    Sensitivity maps are estimated once per slice from the signal-free
    measurements and reused on both branches.
    """
    slices = [np.asarray(s) for s in slices]
    if not slices:
        raise ParameterError("need at least one slice")
    if len(slices) != EXPECTED_SLICE_COUNT:
        logger.warning(
            "building AFC set from %d slices (expected %d -> %d pairs); producing %d pairs",
            len(slices), EXPECTED_SLICE_COUNT, 4 * EXPECTED_SLICE_COUNT, 4 * len(slices),
        )
    shape = slices[0].shape[1:]
    if patch is None:
        patch = 128
    if centers is None:
        centers = default_centers(shape)

    def reconstruct(mck, smap):
        img = build_network_input(mck, mask, smap=smap)
        if model is not None:
            img = model.predict(img)
        return img

    backgrounds, signal_imgs, provenance = [], [], []
    for slice_idx, mck in enumerate(slices):
        smap = kspace.estimate_sensitivities(mck)
        bg_full = reconstruct(mck, smap)
        for sub_idx, ctr in enumerate(centers):
            backgrounds.append(_crop(bg_full, (int(ctr[0]), int(ctr[1])), patch))
            with_signal = insert_signal(mck, smap, spec.at((float(ctr[0]), float(ctr[1]))))
            sig_full = reconstruct(with_signal, smap)
            signal_imgs.append(_crop(sig_full, (int(ctr[0]), int(ctr[1])), patch))
            provenance.append((slice_idx, sub_idx))

    template = render_signal(spec.at((patch // 2, patch // 2)), (patch, patch))
    peak = np.abs(template).max()
    template = np.clip(template / peak, 0.0, 1.0) if peak > 0 else np.zeros_like(template)

    if condition is None:
        k = mask.spec.k if mask.spec is not None else 0
        condition = f"zf-{k}x" if model is None else f"model-{k}x"
    mask_spec = (
        {"width": mask.spec.width, "k": mask.spec.k, "low_count": mask.spec.low_count}
        if mask.spec is not None
        else {"width": mask.width}
    )
    return AFCImageSet(
        condition=condition,
        signal_spec=spec,
        mask_spec=mask_spec,
        model_id=getattr(model, "model_id", None) if model is not None else None,
        patch=patch,
        backgrounds=np.stack(backgrounds),
        signals=np.stack(signal_imgs),
        provenance=provenance,
        template=template,
    )


def _image_id(condition: str, role: str, pair_index: int) -> str:
    # Role-opaque identifier: URLs derived from it must not reveal which
    # side of a trial carries the signal.
    digest = hashlib.sha1(f"{condition}|{role}|{pair_index}".encode()).hexdigest()
    return f"im{digest[:12]}"


def save_afc_dataset(dataset: AFCImageSet, out_dir) -> str:
    """Write manifest + 16-bit PNGs; returns the manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    img_dir = os.path.join(out_dir, "images")
    os.makedirs(img_dir, exist_ok=True)

    records = []
    for i in range(dataset.n_pairs):
        for role, stack in (("background", dataset.backgrounds), ("signal", dataset.signals)):
            image_id = _image_id(dataset.condition, role, i)
            fname = f"{image_id}.png"
            images.save_png16(os.path.join(img_dir, fname), stack[i])
            records.append(
                {
                    "id": image_id,
                    "role": role,
                    "pair": i,
                    "slice": dataset.provenance[i][0],
                    "subimage": dataset.provenance[i][1],
                    "file": f"images/{fname}",
                }
            )
    images.save_png16(os.path.join(out_dir, "template.png"), dataset.template)

    spec = dataset.signal_spec
    manifest = {
        "condition": dataset.condition,
        "signal_spec": {
            "radius_px": spec.radius_px,
            "sigma_px": spec.sigma_px,
            "amplitude": spec.amplitude,
        },
        "mask_spec": dataset.mask_spec,
        "model_id": dataset.model_id,
        "patch": dataset.patch,
        "template": "template.png",
        "images": records,
    }
    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest_path
