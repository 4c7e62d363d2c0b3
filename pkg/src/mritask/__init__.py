"""Task-based image quality assessment for undersampled MRI reconstruction."""

from .kspace import (
    estimate_sensitivities,
    fft2c,
    ifft2c,
    normalize01,
    sense_r1_combine,
    sos_combine,
)
from .sampling import (
    MaskSpec,
    SamplingMask,
    apply_mask,
    build_network_input,
    effective_undersampling,
    make_mask,
)
from .signals import SignalSpec, build_afc_dataset, disk_kspace, extract_subimages, insert_signal
from .metrics import EvaluationSet, SSIMParams, nrmse_set, ssim_pair
from .unet import UNetConfig, UNetModel, deserialize_model, serialize_model
from .training import TrainRun, loss_eval, train

__version__ = "0.1.0"

__all__ = [
    "MaskSpec",
    "SamplingMask",
    "SignalSpec",
    "SSIMParams",
    "EvaluationSet",
    "TrainRun",
    "UNetConfig",
    "UNetModel",
    "apply_mask",
    "build_afc_dataset",
    "build_network_input",
    "deserialize_model",
    "disk_kspace",
    "effective_undersampling",
    "estimate_sensitivities",
    "extract_subimages",
    "fft2c",
    "ifft2c",
    "insert_signal",
    "loss_eval",
    "make_mask",
    "normalize01",
    "nrmse_set",
    "sense_r1_combine",
    "serialize_model",
    "sos_combine",
    "ssim_pair",
    "train",
]
