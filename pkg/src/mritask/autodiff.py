"""A small reverse-mode automatic differentiation engine on numpy arrays.

Only what the reconstruction network and its losses need: elementwise
arithmetic, ReLU/sigmoid, stride-1 2-D convolution, 2x2 max pooling,
nearest-neighbor upsampling, channel concatenation, instance
normalization, inverted dropout, and global sum/mean reductions.
Everything is double precision; convolutions go through im2col so the
heavy lifting is a BLAS matmul.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericsError, ShapeMismatchError

_NAN_CHECKS = False


def set_nan_checks(enabled: bool) -> None:
    """Toggle the per-operation finiteness hook (off by default; costs a scan)."""
    global _NAN_CHECKS
    _NAN_CHECKS = bool(enabled)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents: tuple = ()
        self._backward = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad}{tag})"

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def item(self) -> float:
        return float(self.data)

    # -- graph plumbing ----------------------------------------------------

    def backward(self):
        """Populate ``grad`` on every reachable tensor with requires_grad.

        Must be called on a scalar (the loss).  Gradients accumulate
        across calls until cleared with :meth:`zero_grad`.
        """
        if self.data.size != 1:
            raise ShapeMismatchError("backward() requires a scalar loss tensor")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self._accumulate(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operator sugar ------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, -_wrap(other))

    def __rsub__(self, other):
        return add(_wrap(other), -self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(_wrap(other), self)

    def __pow__(self, exponent):
        return power(self, exponent)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _make(data, parents, backward, op_name: str) -> Tensor:
    out = Tensor(data)
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward = backward
    if _NAN_CHECKS and not np.all(np.isfinite(out.data)):
        raise NumericsError(f"non-finite values produced by {op_name}")
    return out


def _check_same_shape(a: Tensor, b: Tensor, op: str):
    if a.data.shape != b.data.shape and a.data.size != 1 and b.data.size != 1:
        raise ShapeMismatchError(f"{op}: shapes {a.data.shape} and {b.data.shape} differ")


# -- elementwise arithmetic --------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _check_same_shape(a, b, "add")

    def backward(g):
        if a.requires_grad:
            a._accumulate(g if a.data.shape == g.shape else np.sum(g).reshape(a.data.shape))
        if b.requires_grad:
            b._accumulate(g if b.data.shape == g.shape else np.sum(g).reshape(b.data.shape))

    return _make(a.data + b.data, (a, b), backward, "add")


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _check_same_shape(a, b, "mul")

    def backward(g):
        if a.requires_grad:
            ga = g * b.data
            a._accumulate(ga if a.data.shape == ga.shape else np.sum(ga).reshape(a.data.shape))
        if b.requires_grad:
            gb = g * a.data
            b._accumulate(gb if b.data.shape == gb.shape else np.sum(gb).reshape(b.data.shape))

    return _make(a.data * b.data, (a, b), backward, "mul")


def div(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _check_same_shape(a, b, "div")

    def backward(g):
        if a.requires_grad:
            ga = g / b.data
            a._accumulate(ga if a.data.shape == ga.shape else np.sum(ga).reshape(a.data.shape))
        if b.requires_grad:
            gb = -g * a.data / (b.data * b.data)
            b._accumulate(gb if b.data.shape == gb.shape else np.sum(gb).reshape(b.data.shape))

    with np.errstate(divide="ignore", invalid="ignore"):  # NaN hook reports these
        out = a.data / b.data
    return _make(out, (a, b), backward, "div")


def power(a, exponent: float) -> Tensor:
    a = _wrap(a)
    exponent = float(exponent)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * exponent * np.power(a.data, exponent - 1.0))

    return _make(np.power(a.data, exponent), (a,), backward, "power")


def relu(a) -> Tensor:
    a = _wrap(a)
    mask = a.data > 0

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * mask)

    # np.maximum keeps NaN poison visible; np.where would silently zero it
    return _make(np.maximum(a.data, 0.0), (a,), backward, "relu")


def sigmoid(a) -> Tensor:
    a = _wrap(a)
    with np.errstate(over="ignore"):
        y = np.where(a.data >= 0, 1.0 / (1.0 + np.exp(-a.data)),
                     np.exp(a.data) / (1.0 + np.exp(a.data)))

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * y * (1.0 - y))

    return _make(y, (a,), backward, "sigmoid")


# -- reductions ----------------------------------------------------------------


def tsum(a) -> Tensor:
    a = _wrap(a)

    def backward(g):
        if a.requires_grad:
            a._accumulate(np.full_like(a.data, float(g)))

    return _make(np.sum(a.data), (a,), backward, "sum")


def tmean(a) -> Tensor:
    a = _wrap(a)
    n = a.data.size

    def backward(g):
        if a.requires_grad:
            a._accumulate(np.full_like(a.data, float(g) / n))

    return _make(np.mean(a.data), (a,), backward, "mean")


# -- spatial operations --------------------------------------------------------


def _im2col(x: np.ndarray, kh: int, kw: int, padding: int):
    b, c, h, w = x.shape
    if padding > 0:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    oh = h + 2 * padding - kh + 1
    ow = w + 2 * padding - kw + 1
    if oh < 1 or ow < 1:
        raise ShapeMismatchError(
            f"kernel ({kh}x{kw}) larger than padded input ({x.shape[2]}x{x.shape[3]})"
        )
    win = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
    col = win.transpose(0, 1, 4, 5, 2, 3).reshape(b, c * kh * kw, oh * ow)
    return np.ascontiguousarray(col), oh, ow


def _corr2d(x: np.ndarray, w: np.ndarray, padding: int) -> np.ndarray:
    """Raw cross-correlation used by forward and the input-gradient pass."""
    b = x.shape[0]
    f, _, kh, kw = w.shape
    col, oh, ow = _im2col(x, kh, kw, padding)
    out = np.matmul(w.reshape(f, -1), col)  # (B, F, OH*OW) by broadcasting
    return out.reshape(b, f, oh, ow)


def conv2d(x, weight, bias=None, padding: int = 0) -> Tensor:
    """Stride-1 2-D convolution (cross-correlation) over NCHW tensors."""
    x, weight = _wrap(x), _wrap(weight)
    if x.data.ndim != 4 or weight.data.ndim != 4:
        raise ShapeMismatchError("conv2d expects x (B,C,H,W) and weight (F,C,kh,kw)")
    b, c, h, w_in = x.data.shape
    f, cw, kh, kw = weight.data.shape
    if cw != c:
        raise ShapeMismatchError(f"conv2d channel mismatch: input {c}, weight {cw}")
    if bias is not None:
        bias = _wrap(bias)
        if bias.data.shape != (f,):
            raise ShapeMismatchError(f"bias must have shape ({f},), got {bias.data.shape}")

    col, oh, ow = _im2col(x.data, kh, kw, padding)
    out = np.matmul(weight.data.reshape(f, -1), col).reshape(b, f, oh, ow)
    if bias is not None:
        out = out + bias.data[None, :, None, None]

    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        g2 = g.reshape(b, f, oh * ow)
        if weight.requires_grad:
            gw = np.einsum("bfo,bko->fk", g2, col, optimize=True)
            weight._accumulate(gw.reshape(weight.data.shape))
        if bias is not None and bias.requires_grad:
            bias._accumulate(g2.sum(axis=(0, 2)))
        if x.requires_grad:
            w_flip = weight.data[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
            gx = _corr2d(
                np.ascontiguousarray(g), np.ascontiguousarray(w_flip), kh - 1 - padding
            )
            x._accumulate(gx)

    return _make(out, parents, backward, "conv2d")


def max_pool2(x) -> Tensor:
    """2x2 max pooling with stride 2; spatial dims must be even."""
    x = _wrap(x)
    b, c, h, w = x.data.shape
    if h % 2 or w % 2:
        raise ShapeMismatchError(f"max_pool2 needs even spatial dims, got {h}x{w}")
    blocks = (
        x.data.reshape(b, c, h // 2, 2, w // 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(b, c, h // 2, w // 2, 4)
    )
    idx = np.argmax(blocks, axis=-1)
    out = np.take_along_axis(blocks, idx[..., None], axis=-1)[..., 0]

    def backward(g):
        if x.requires_grad:
            gb = np.zeros_like(blocks)
            np.put_along_axis(gb, idx[..., None], g[..., None], axis=-1)
            gx = (
                gb.reshape(b, c, h // 2, w // 2, 2, 2)
                .transpose(0, 1, 2, 4, 3, 5)
                .reshape(b, c, h, w)
            )
            x._accumulate(gx)

    return _make(out, (x,), backward, "max_pool2")


def upsample_nearest2(x) -> Tensor:
    """Nearest-neighbor 2x spatial upsampling."""
    x = _wrap(x)
    b, c, h, w = x.data.shape
    out = x.data.repeat(2, axis=2).repeat(2, axis=3)

    def backward(g):
        if x.requires_grad:
            x._accumulate(g.reshape(b, c, h, 2, w, 2).sum(axis=(3, 5)))

    return _make(out, (x,), backward, "upsample_nearest2")


def concat_channels(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    if a.data.shape[0] != b.data.shape[0] or a.data.shape[2:] != b.data.shape[2:]:
        raise ShapeMismatchError(
            f"concat_channels: incompatible shapes {a.data.shape} / {b.data.shape}"
        )
    ca = a.data.shape[1]

    def backward(g):
        if a.requires_grad:
            a._accumulate(g[:, :ca])
        if b.requires_grad:
            b._accumulate(g[:, ca:])

    return _make(np.concatenate([a.data, b.data], axis=1), (a, b), backward, "concat_channels")


def instance_norm(x, gamma, beta, eps: float = 1e-5) -> Tensor:
    """Per-sample, per-channel normalization with affine scale/shift."""
    x, gamma, beta = _wrap(x), _wrap(gamma), _wrap(beta)
    b, c, h, w = x.data.shape
    if gamma.data.shape != (c,) or beta.data.shape != (c,):
        raise ShapeMismatchError(f"gamma/beta must have shape ({c},)")
    n = h * w
    mu = x.data.mean(axis=(2, 3), keepdims=True)
    var = x.data.var(axis=(2, 3), keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv_std
    out = gamma.data[None, :, None, None] * xhat + beta.data[None, :, None, None]

    def backward(g):
        if beta.requires_grad:
            beta._accumulate(g.sum(axis=(0, 2, 3)))
        if gamma.requires_grad:
            gamma._accumulate((g * xhat).sum(axis=(0, 2, 3)))
        if x.requires_grad:
            gxhat = g * gamma.data[None, :, None, None]
            s1 = gxhat.sum(axis=(2, 3), keepdims=True)
            s2 = (gxhat * xhat).sum(axis=(2, 3), keepdims=True)
            x._accumulate(inv_std / n * (n * gxhat - s1 - xhat * s2))

    return _make(out, (x, gamma, beta), backward, "instance_norm")


def dropout(x, rate: float, rng: np.random.Generator | None, training: bool) -> Tensor:
    """Inverted dropout: train-time zeroing with 1/(1-rate) rescale, eval identity."""
    x = _wrap(x)
    if not (0.0 <= rate < 1.0):
        raise ShapeMismatchError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:

        def backward_eval(g):
            if x.requires_grad:
                x._accumulate(g)

        return _make(x.data.copy(), (x,), backward_eval, "dropout")

    if rng is None:
        raise ValueError("training-mode dropout needs a random generator")
    mask = (rng.random(x.data.shape) >= rate) / (1.0 - rate)

    def backward(g):
        if x.requires_grad:
            x._accumulate(g * mask)

    return _make(x.data * mask, (x,), backward, "dropout")
