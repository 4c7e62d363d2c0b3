"""Binary containers: the MCKS multi-coil k-space file.

Layout (all integers little-endian):

    magic   4 bytes  b"MCKS"
    version u16      1
    reserved u16     0
    coils   u32      C >= 1
    height  u32      H
    width   u32      W
    data    C*H*W complex samples as float32 (real, imag) pairs,
            coil-major, then row-major within each plane
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import FormatError, ShapeMismatchError

MCKS_MAGIC = b"MCKS"
MCKS_VERSION = 1
_HEADER = struct.Struct("<4sHHIII")


def write_mcks(path, mck) -> None:
    mck = np.asarray(mck)
    if mck.ndim != 3 or mck.shape[0] < 1:
        raise ShapeMismatchError(f"multi-coil k-space must be (C, H, W), got {mck.shape}")
    c, h, w = mck.shape
    header = _HEADER.pack(MCKS_MAGIC, MCKS_VERSION, 0, c, h, w)
    data = np.ascontiguousarray(mck.astype(np.complex64))
    payload = data.view(np.float32)
    if payload.dtype.byteorder == ">":  # big-endian hosts
        payload = payload.byteswap()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes())


def read_mcks(path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise FormatError("MCKS file too short for its header")
    magic, version, _reserved, c, h, w = _HEADER.unpack_from(raw)
    if magic != MCKS_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MCKS_MAGIC!r}")
    if version != MCKS_VERSION:
        raise FormatError(f"unsupported MCKS version {version}")
    if c < 1 or h < 1 or w < 1:
        raise FormatError(f"invalid dimensions C={c} H={h} W={w}")
    expected = _HEADER.size + c * h * w * 8
    if len(raw) != expected:
        raise FormatError(
            f"payload size mismatch: file has {len(raw)} bytes, header implies {expected}"
        )
    flat = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size)
    data = flat.astype(np.float32).view(np.complex64).reshape(c, h, w)
    return data.astype(np.complex128)
