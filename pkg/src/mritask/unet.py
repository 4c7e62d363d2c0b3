"""Encoder-decoder reconstruction network.

Contracting path of ``depth`` levels with channel doubling and 2x2 max
pooling, an expanding path with nearest-neighbor upsampling and skip
concatenations, and a final pair of 1x1 convolutions ending in a sigmoid
so outputs stay in (0, 1).  Each level runs two blocks of
3x3 conv -> instance norm -> ReLU -> dropout.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import FormatError, IntegrityError, ParameterError, ShapeMismatchError

WEIGHTS_MAGIC = b"UNW1"


@dataclass(frozen=True)
class UNetConfig:
    start_channels: int = 64
    depth: int = 4
    dropout_rate: float = 0.1
    loss_kind: str = "ssim"  # "ssim" | "mse"
    upsample: str = "nearest"
    normalization: bool = True

    def __post_init__(self):
        if self.start_channels < 1:
            raise ParameterError(f"start_channels must be >= 1, got {self.start_channels}")
        if self.depth < 1:
            raise ParameterError(f"depth must be >= 1, got {self.depth}")
        if not (0.0 <= self.dropout_rate < 1.0):
            raise ParameterError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.loss_kind not in ("ssim", "mse"):
            raise ParameterError(f"loss_kind must be 'ssim' or 'mse', got {self.loss_kind!r}")
        if self.upsample != "nearest":
            raise ParameterError(f"only nearest upsampling is implemented, got {self.upsample!r}")


class UNetModel:
    """Trainable reconstructor; parameters live in an ordered name -> Tensor map."""

    def __init__(self, config: UNetConfig, seed: int = 0):
        self.config = config
        self.seed = seed
        self.mode = "eval"
        self.params: dict[str, Tensor] = {}
        self._rng = np.random.default_rng(seed)  # reseeded by the trainer
        self._build(np.random.default_rng(seed))

    # -- construction -------------------------------------------------------

    def _add_conv(self, rng, name: str, c_in: int, c_out: int, k: int):
        fan_in = c_in * k * k
        bound = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-bound, bound, size=(c_out, c_in, k, k))
        self.params[f"{name}.w"] = Tensor(w, requires_grad=True, name=f"{name}.w")
        self.params[f"{name}.b"] = Tensor(
            np.zeros(c_out), requires_grad=True, name=f"{name}.b"
        )

    def _add_norm(self, name: str, channels: int):
        self.params[f"{name}.g"] = Tensor(
            np.ones(channels), requires_grad=True, name=f"{name}.g"
        )
        self.params[f"{name}.s"] = Tensor(
            np.zeros(channels), requires_grad=True, name=f"{name}.s"
        )

    def _add_block(self, rng, name: str, c_in: int, c_out: int):
        for j, ci in enumerate((c_in, c_out)):
            self._add_conv(rng, f"{name}.conv{j}", ci, c_out, 3)
            if self.config.normalization:
                self._add_norm(f"{name}.norm{j}", c_out)

    def _build(self, rng):
        cfg = self.config
        ch = cfg.start_channels
        c_in = 1
        for i in range(cfg.depth):
            self._add_block(rng, f"down{i}", c_in, ch * (2**i))
            c_in = ch * (2**i)
        self._add_block(rng, "bottom", c_in, ch * (2**cfg.depth))
        for i in reversed(range(cfg.depth)):
            hi = ch * (2 ** (i + 1))
            lo = ch * (2**i)
            self._add_conv(rng, f"up{i}.reduce", hi, lo, 3)
            self._add_block(rng, f"up{i}", 2 * lo, lo)
        head = max(ch // 2, 1)
        self._add_conv(rng, "head0", ch, head, 1)
        self._add_conv(rng, "head1", head, 1, 1)

    # -- mode ----------------------------------------------------------------

    def set_mode(self, mode: str):
        if mode not in ("train", "eval"):
            raise ParameterError(f"mode must be 'train' or 'eval', got {mode!r}")
        self.mode = mode

    @property
    def model_id(self) -> str:
        cfg = self.config
        return f"unet-x{cfg.start_channels}-d{cfg.depth}-{cfg.loss_kind}-seed{self.seed}"

    def parameters(self) -> dict[str, Tensor]:
        return self.params

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    # -- forward -------------------------------------------------------------

    def _block(self, x: Tensor, name: str, training: bool) -> Tensor:
        cfg = self.config
        for j in range(2):
            x = ad.conv2d(x, self.params[f"{name}.conv{j}.w"],
                          self.params[f"{name}.conv{j}.b"], padding=1)
            if cfg.normalization:
                x = ad.instance_norm(x, self.params[f"{name}.norm{j}.g"],
                                     self.params[f"{name}.norm{j}.s"])
            x = ad.relu(x)
            x = ad.dropout(x, cfg.dropout_rate, self._rng, training)
        return x

    def forward(self, x) -> Tensor:
        """Run a (B, 1, H, W) batch through the network; H and W must be
        divisible by 2**depth."""
        if not isinstance(x, Tensor):
            x = Tensor(x)
        if x.data.ndim != 4 or x.data.shape[1] != 1:
            raise ShapeMismatchError(f"expected (B, 1, H, W) input, got {x.data.shape}")
        divisor = 2**self.config.depth
        _, _, h, w = x.data.shape
        if h % divisor or w % divisor:
            raise ShapeMismatchError(
                f"spatial size {h}x{w} must be divisible by 2**depth = {divisor}"
            )
        training = self.mode == "train"

        skips = []
        for i in range(self.config.depth):
            x = self._block(x, f"down{i}", training)
            skips.append(x)
            x = ad.max_pool2(x)
        x = self._block(x, "bottom", training)
        for i in reversed(range(self.config.depth)):
            x = ad.upsample_nearest2(x)
            x = ad.conv2d(x, self.params[f"up{i}.reduce.w"],
                          self.params[f"up{i}.reduce.b"], padding=1)
            x = ad.concat_channels(skips[i], x)
            x = self._block(x, f"up{i}", training)
        x = ad.conv2d(x, self.params["head0.w"], self.params["head0.b"])
        x = ad.relu(x)
        x = ad.conv2d(x, self.params["head1.w"], self.params["head1.b"])
        return ad.sigmoid(x)

    def predict(self, img: np.ndarray) -> np.ndarray:
        """Eval-mode reconstruction of a single (H, W) image."""
        prev = self.mode
        self.mode = "eval"
        try:
            out = self.forward(np.asarray(img)[None, None])
        finally:
            self.mode = prev
        return out.data[0, 0]


def unet_forward(model: UNetModel, batch) -> Tensor:
    return model.forward(batch)


# -- serialization -------------------------------------------------------------


def serialize_model(model: UNetModel, meta: dict | None = None) -> bytes:
    directory = []
    offset = 0
    blobs = []
    for name, p in model.params.items():
        blob = p.data.astype("<f4").tobytes()
        directory.append({"name": name, "shape": list(p.data.shape), "offset": offset,
                          "nbytes": len(blob)})
        blobs.append(blob)
        offset += len(blob)
    header = {
        "config": asdict(model.config),
        "seed": model.seed,
        "meta": meta or {},
        "tensors": directory,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode()
    return b"".join(
        [WEIGHTS_MAGIC, struct.pack("<I", len(header_bytes)), header_bytes, *blobs]
    )


def deserialize_model(payload: bytes) -> UNetModel:
    if len(payload) < 8 or payload[:4] != WEIGHTS_MAGIC:
        raise FormatError(f"bad weights magic, expected {WEIGHTS_MAGIC!r}")
    (header_len,) = struct.unpack_from("<I", payload, 4)
    if len(payload) < 8 + header_len:
        raise FormatError("truncated weights header")
    try:
        header = json.loads(payload[8 : 8 + header_len].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"unreadable weights header: {exc}") from exc

    config = UNetConfig(**header["config"])
    model = UNetModel(config, seed=int(header["seed"]))
    data = payload[8 + header_len :]
    seen = set()
    for entry in header["tensors"]:
        name = entry["name"]
        if name not in model.params:
            raise IntegrityError(f"weights contain unknown tensor {name!r}")
        shape = tuple(entry["shape"])
        if model.params[name].data.shape != shape:
            raise IntegrityError(
                f"tensor {name!r} shape {shape} does not match config-implied "
                f"{model.params[name].data.shape}"
            )
        start, nbytes = entry["offset"], entry["nbytes"]
        if start + nbytes > len(data):
            raise FormatError(f"truncated payload for tensor {name!r}")
        flat = np.frombuffer(data, dtype="<f4", count=nbytes // 4, offset=start)
        model.params[name].data = flat.astype(np.float64).reshape(shape)
        seen.add(name)
    missing = set(model.params) - seen
    if missing:
        raise IntegrityError(f"weights file is missing tensors: {sorted(missing)}")
    model.set_mode("eval")
    return model


def save_model(model: UNetModel, path, meta: dict | None = None) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize_model(model, meta))


def load_model(path) -> UNetModel:
    with open(path, "rb") as fh:
        return deserialize_model(fh.read())
