"""Reverse-mode autodiff over a dynamic tape, backed by numpy arrays.

Design notes:
  * A ``Tensor`` wraps one float ndarray plus an optional gradient buffer.
    Ops record closures on the tape; ``backward`` replays them in reverse
    topological order.
  * Every forward op validates that its output is finite. NaN/Inf anywhere
    is an error state, raised as ``NumericError`` naming the op.
  * Default dtype is float32. ``verification_mode`` switches tensor creation
    to float64 for high-precision checks (finite differences and the like).
  * Integer index arrays are plain ndarrays, never Tensors.
"""

from __future__ import annotations

import contextlib
import math
from typing import Callable, Iterable, Sequence

import numpy as np


class NumericError(RuntimeError):
    """A forward op produced NaN/Inf, or a gradient buffer went non-finite."""


class UsageError(RuntimeError):
    """The tape was used in an unsupported way (e.g. backward on a vector)."""


_state = {
    "grad_enabled": True,
    "check_finite": True,
    "dtype": np.float32,
}


def default_dtype() -> np.dtype:
    return np.dtype(_state["dtype"])


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block."""
    prev = _state["grad_enabled"]
    _state["grad_enabled"] = False
    try:
        yield
    finally:
        _state["grad_enabled"] = prev


@contextlib.contextmanager
def verification_mode():
    """float64 tensor creation, for finite-difference comparisons."""
    prev = _state["dtype"]
    _state["dtype"] = np.float64
    try:
        yield
    finally:
        _state["dtype"] = prev


@contextlib.contextmanager
def finite_checks(enabled: bool):
    prev = _state["check_finite"]
    _state["check_finite"] = enabled
    try:
        yield
    finally:
        _state["check_finite"] = prev


def _check(data: np.ndarray, op: str) -> None:
    if _state["check_finite"] and not np.isfinite(data).all():
        raise NumericError(f"non-finite values produced by op '{op}'")


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data)
        if arr.dtype.kind in "fiub":
            arr = arr.astype(_state["dtype"], copy=False)
        else:
            raise UsageError(f"unsupported dtype {arr.dtype} for Tensor")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        # Leaf parameters carry a zero-initialized buffer from birth so that
        # "unreachable parameter has zero gradient" holds without bookkeeping.
        self.grad = np.zeros_like(arr) if requires_grad else None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def _result(data: np.ndarray, parents: Sequence["Tensor"], op: str) -> "Tensor":
        _check(data, op)
        out = Tensor.__new__(Tensor)
        out.data = data
        out.grad = None
        out._backward = None
        if _state["grad_enabled"] and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
        else:
            out.requires_grad = False
            out._parents = ()
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        """The raw value. Callers must not mutate it in place."""
        return self.data

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        out = Tensor.__new__(Tensor)
        out.data = self.data
        out.grad = None
        out.requires_grad = False
        out._parents = ()
        out._backward = None
        return out

    def zero_grad(self) -> None:
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def _accum(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    # -- operator sugar --------------------------------------------------------

    def __add__(self, other):
        return add(self, _wrap(other))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, _wrap(other))

    def __rtruediv__(self, other):
        return div(_wrap(other), self)

    def __neg__(self):
        return mul(self, _wrap(-1.0))

    def __pow__(self, exponent):
        return pow_scalar(self, float(exponent))

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 or isinstance(shape[0], int) else shape[0])

    def transpose(self, axes):
        return transpose(self, axes)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def __repr__(self):
        flag = ", grad" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{flag})"


def _wrap(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=default_dtype()))


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `g` down to `shape` (inverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# -- elementwise arithmetic -----------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor._result(a.data + b.data, (a, b), "add")
    if out.requires_grad:
        def bwd(g):
            if a.requires_grad:
                a._accum(_unbroadcast(g, a.data.shape))
            if b.requires_grad:
                b._accum(_unbroadcast(g, b.data.shape))
        out._backward = bwd
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor._result(a.data - b.data, (a, b), "sub")
    if out.requires_grad:
        def bwd(g):
            if a.requires_grad:
                a._accum(_unbroadcast(g, a.data.shape))
            if b.requires_grad:
                b._accum(_unbroadcast(-g, b.data.shape))
        out._backward = bwd
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor._result(a.data * b.data, (a, b), "mul")
    if out.requires_grad:
        def bwd(g):
            if a.requires_grad:
                a._accum(_unbroadcast(g * b.data, a.data.shape))
            if b.requires_grad:
                b._accum(_unbroadcast(g * a.data, b.data.shape))
        out._backward = bwd
    return out


def div(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor._result(a.data / b.data, (a, b), "div")
    if out.requires_grad:
        def bwd(g):
            if a.requires_grad:
                a._accum(_unbroadcast(g / b.data, a.data.shape))
            if b.requires_grad:
                b._accum(_unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))
        out._backward = bwd
    return out


def pow_scalar(a: Tensor, exponent: float) -> Tensor:
    out = Tensor._result(a.data ** exponent, (a,), "pow")
    if out.requires_grad:
        def bwd(g):
            a._accum(g * exponent * a.data ** (exponent - 1.0))
        out._backward = bwd
    return out


def exp(a: Tensor) -> Tensor:
    e = np.exp(a.data)
    out = Tensor._result(e, (a,), "exp")
    if out.requires_grad:
        out._backward = lambda g: a._accum(g * e)
    return out


def log(a: Tensor) -> Tensor:
    out = Tensor._result(np.log(a.data), (a,), "log")
    if out.requires_grad:
        out._backward = lambda g: a._accum(g / a.data)
    return out


def sqrt(a: Tensor) -> Tensor:
    s = np.sqrt(a.data)
    out = Tensor._result(s, (a,), "sqrt")
    if out.requires_grad:
        out._backward = lambda g: a._accum(g * 0.5 / s)
    return out


def tanh(a: Tensor) -> Tensor:
    t = np.tanh(a.data)
    out = Tensor._result(t, (a,), "tanh")
    if out.requires_grad:
        out._backward = lambda g: a._accum(g * (1.0 - t * t))
    return out


def sigmoid(a: Tensor) -> Tensor:
    # stable for both signs
    s = np.where(a.data >= 0, 1.0 / (1.0 + np.exp(-np.abs(a.data))),
                 np.exp(-np.abs(a.data)) / (1.0 + np.exp(-np.abs(a.data))))
    out = Tensor._result(s.astype(a.data.dtype, copy=False), (a,), "sigmoid")
    if out.requires_grad:
        out._backward = lambda g: a._accum(g * s * (1.0 - s))
    return out


def silu(a: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        s = 1.0 / (1.0 + np.exp(-a.data))
    out = Tensor._result(a.data * s, (a,), "silu")
    if out.requires_grad:
        def bwd(g):
            a._accum(g * s * (1.0 + a.data * (1.0 - s)))
        out._backward = bwd
    return out


def relu(a: Tensor) -> Tensor:
    out = Tensor._result(np.maximum(a.data, 0.0), (a,), "relu")
    if out.requires_grad:
        mask = (a.data > 0).astype(a.data.dtype)
        out._backward = lambda g: a._accum(g * mask)
    return out


def softplus(a: Tensor) -> Tensor:
    # log(1+e^x) = max(x,0) + log1p(e^{-|x|}); safe for large |x|
    sp = np.maximum(a.data, 0.0) + np.log1p(np.exp(-np.abs(a.data)))
    out = Tensor._result(sp, (a,), "softplus")
    if out.requires_grad:
        with np.errstate(over="ignore"):
            s = 1.0 / (1.0 + np.exp(-a.data))
        out._backward = lambda g: a._accum(g * s)
    return out


# -- reductions ------------------------------------------------------------------


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = Tensor._result(a.data.sum(axis=axis, keepdims=keepdims), (a,), "sum")
    if out.requires_grad:
        def bwd(g):
            if axis is None:
                a._accum(np.full(a.data.shape, g, dtype=a.data.dtype))
            else:
                gg = g if keepdims else np.expand_dims(g, axis)
                a._accum(np.broadcast_to(gg, a.data.shape).astype(a.data.dtype, copy=True))
        out._backward = bwd
    return out


def tmean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if axis is None:
        n = a.data.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        n = int(np.prod([a.data.shape[ax] for ax in axes]))
    return tsum(a, axis=axis, keepdims=keepdims) * (1.0 / n)


# -- shape ops --------------------------------------------------------------------


def reshape(a: Tensor, shape) -> Tensor:
    out = Tensor._result(a.data.reshape(shape), (a,), "reshape")
    if out.requires_grad:
        out._backward = lambda g: a._accum(g.reshape(a.data.shape))
    return out


def transpose(a: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    out = Tensor._result(np.ascontiguousarray(a.data.transpose(axes)), (a,), "transpose")
    if out.requires_grad:
        inv = tuple(np.argsort(axes))
        out._backward = lambda g: a._accum(g.transpose(inv))
    return out


def getitem(a: Tensor, idx) -> Tensor:
    out = Tensor._result(np.ascontiguousarray(a.data[idx]), (a,), "getitem")
    if out.requires_grad:
        def bwd(g):
            buf = np.zeros_like(a.data)
            np.add.at(buf, idx, g)
            a._accum(buf)
        out._backward = bwd
    return out


def concatenate(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    out = Tensor._result(np.concatenate([p.data for p in parts], axis=axis),
                         tuple(parts), "concatenate")
    if out.requires_grad:
        sizes = [p.data.shape[axis] for p in parts]
        splits = np.cumsum(sizes)[:-1]
        def bwd(g):
            for p, piece in zip(parts, np.split(g, splits, axis=axis)):
                if p.requires_grad:
                    p._accum(piece)
        out._backward = bwd
    return out


def stack(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    out = Tensor._result(np.stack([p.data for p in parts], axis=axis),
                         tuple(parts), "stack")
    if out.requires_grad:
        def bwd(g):
            for i, p in enumerate(parts):
                if p.requires_grad:
                    p._accum(np.take(g, i, axis=axis))
        out._backward = bwd
    return out


# -- linear algebra -----------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor._result(a.data @ b.data, (a, b), "matmul")
    if out.requires_grad:
        def bwd(g):
            if a.requires_grad:
                if b.data.ndim == 1:
                    ga = np.expand_dims(g, -1) * b.data
                else:
                    ga = g @ np.swapaxes(b.data, -1, -2)
                a._accum(_unbroadcast(ga, a.data.shape))
            if b.requires_grad:
                if a.data.ndim == 1:
                    gb = np.expand_dims(a.data, -1) * np.expand_dims(g, -2)
                else:
                    gb = np.swapaxes(a.data, -1, -2) @ g
                b._accum(_unbroadcast(gb, b.data.shape))
        out._backward = bwd
    return out


def embedding(table: Tensor, indices: np.ndarray) -> Tensor:
    """Row lookup: out[..., :] = table[indices[...], :]."""
    idx = np.asarray(indices)
    if idx.dtype.kind not in "iu":
        raise UsageError("embedding indices must be integers")
    out = Tensor._result(table.data[idx], (table,), "embedding")
    if out.requires_grad:
        def bwd(g):
            buf = np.zeros_like(table.data)
            np.add.at(buf, idx.reshape(-1), g.reshape(-1, table.data.shape[-1]))
            table._accum(buf)
        out._backward = bwd
    return out


def take_along_last_axis(a: Tensor, indices: np.ndarray) -> Tensor:
    """Gather along the last axis; used by relative-position attention."""
    idx = np.asarray(indices)
    idx_b = np.broadcast_to(idx, a.data.shape[:-1] + idx.shape[-1:])
    out = Tensor._result(np.take_along_axis(a.data, idx_b, axis=-1), (a,), "take_along")
    if out.requires_grad:
        def bwd(g):
            buf = np.zeros_like(a.data)
            flat_buf = buf.reshape(-1, buf.shape[-1])
            flat_idx = idx_b.reshape(-1, idx_b.shape[-1])
            flat_g = g.reshape(-1, g.shape[-1])
            rows = np.arange(flat_buf.shape[0])[:, None]
            np.add.at(flat_buf, (rows, flat_idx), flat_g)
            a._accum(buf)
        out._backward = bwd
    return out


# -- fused softmax family --------------------------------------------------------------


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=axis, keepdims=True)
    out = Tensor._result(p, (a,), "softmax")
    if out.requires_grad:
        def bwd(g):
            dot = (g * p).sum(axis=axis, keepdims=True)
            a._accum(p * (g - dot))
        out._backward = bwd
    return out


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    ls = shifted - lse
    out = Tensor._result(ls, (a,), "log_softmax")
    if out.requires_grad:
        p = np.exp(ls)
        def bwd(g):
            a._accum(g - p * g.sum(axis=axis, keepdims=True))
        out._backward = bwd
    return out


def masked_softmax(scores: Tensor, visible: np.ndarray) -> Tensor:
    """Softmax over the last axis restricted to `visible` (bool) positions.

    Invisible positions get exactly 0.0 in the output (not merely small), so
    masked columns cannot leak into the result even at the bit level. Rows
    with no visible position are rejected.
    """
    vis = np.asarray(visible, dtype=bool)
    vis_b = np.broadcast_to(vis, scores.data.shape)
    if not vis_b.any(axis=-1).all():
        raise UsageError("masked_softmax: some row has no visible position")
    neg = np.where(vis_b, scores.data, -np.inf)
    shifted = neg - neg.max(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore"):
        e = np.where(vis_b, np.exp(shifted), 0.0)
    p = e / e.sum(axis=-1, keepdims=True)
    out = Tensor._result(p, (scores,), "masked_softmax")
    if out.requires_grad:
        def bwd(g):
            dot = (g * p).sum(axis=-1, keepdims=True)
            scores._accum(p * (g - dot))
        out._backward = bwd
    return out


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = Tensor._result(xhat * gain.data + bias.data, (x, gain, bias), "layer_norm")
    if out.requires_grad:
        def bwd(g):
            if gain.requires_grad:
                gain._accum(_unbroadcast(g * xhat, gain.data.shape))
            if bias.requires_grad:
                bias._accum(_unbroadcast(g, bias.data.shape))
            if x.requires_grad:
                gx = g * gain.data
                n = x.data.shape[-1]
                term = gx - gx.mean(axis=-1, keepdims=True) \
                    - xhat * (gx * xhat).mean(axis=-1, keepdims=True)
                x._accum(term * inv)
        out._backward = bwd
    return out


# -- convolution (im2col) ---------------------------------------------------------------


def _im2col(x: np.ndarray, kh: int, kw: int, stride: int, pad: int):
    b, c, h, w = x.shape
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (w + 2 * pad - kw) // stride + 1
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    s0, s1, s2, s3 = x.strides
    view = np.lib.stride_tricks.as_strided(
        x,
        shape=(b, c, kh, kw, oh, ow),
        strides=(s0, s1, s2, s3, s2 * stride, s3 * stride),
        writeable=False,
    )
    cols = np.ascontiguousarray(view).reshape(b, c * kh * kw, oh * ow)
    return cols, oh, ow


def _col2im(cols: np.ndarray, xshape, kh: int, kw: int, stride: int, pad: int):
    b, c, h, w = xshape
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (w + 2 * pad - kw) // stride + 1
    buf = np.zeros((b, c, h + 2 * pad, w + 2 * pad), dtype=cols.dtype)
    cols6 = cols.reshape(b, c, kh, kw, oh, ow)
    for i in range(kh):
        for j in range(kw):
            buf[:, :, i:i + stride * oh:stride, j:j + stride * ow:stride] += cols6[:, :, i, j]
    if pad:
        buf = buf[:, :, pad:-pad, pad:-pad]
    return buf


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None,
           stride: int = 1, padding: int = 0) -> Tensor:
    """x: (B,C,H,W), weight: (O,C,kh,kw), bias: (O,) or None."""
    b, c, h, w = x.data.shape
    o, ci, kh, kw = weight.data.shape
    if ci != c:
        raise UsageError(f"conv2d channel mismatch: input {c}, weight {ci}")
    cols, oh, ow = _im2col(x.data, kh, kw, stride, padding)
    wmat = weight.data.reshape(o, -1)
    y = np.matmul(wmat, cols).reshape(b, o, oh, ow)
    if bias is not None:
        y = y + bias.data.reshape(1, o, 1, 1)
    parents = (x, weight) if bias is None else (x, weight, bias)
    out = Tensor._result(y, parents, "conv2d")
    if out.requires_grad:
        def bwd(g):
            gflat = g.reshape(b, o, oh * ow)
            if bias is not None and bias.requires_grad:
                bias._accum(gflat.sum(axis=(0, 2)))
            if weight.requires_grad:
                gw = np.einsum("bol,bkl->ok", gflat, cols)
                weight._accum(gw.reshape(weight.data.shape))
            if x.requires_grad:
                gcols = np.matmul(wmat.T, gflat)
                x._accum(_col2im(gcols, x.data.shape, kh, kw, stride, padding))
        out._backward = bwd
    return out


def conv2d_transpose(x: Tensor, weight: Tensor, bias: Tensor | None,
                     stride: int = 1, padding: int = 0, output_padding: int = 0) -> Tensor:
    """Adjoint of conv2d. x: (B,O,H,W), weight: (O,C,kh,kw) -> (B,C,H',W').

    H' = (H-1)*stride - 2*padding + kh + output_padding.
    """
    b, o, h, w = x.data.shape
    o2, c, kh, kw = weight.data.shape
    if o2 != o:
        raise UsageError(f"conv2d_transpose channel mismatch: input {o}, weight {o2}")
    out_h = (h - 1) * stride - 2 * padding + kh + output_padding
    out_w = (w - 1) * stride - 2 * padding + kw + output_padding
    # forward = col2im of W^T @ x, i.e. exactly conv2d's input-gradient kernel
    wmat = weight.data.reshape(o, -1)
    xflat = x.data.reshape(b, o, h * w)
    cols = np.matmul(wmat.T, xflat)
    y = _col2im(cols, (b, c, out_h, out_w), kh, kw, stride, padding)
    if bias is not None:
        y = y + bias.data.reshape(1, c, 1, 1)
    parents = (x, weight) if bias is None else (x, weight, bias)
    out = Tensor._result(y, parents, "conv2d_transpose")
    if out.requires_grad:
        def bwd(g):
            gcols, goh, gow = _im2col(g, kh, kw, stride, padding)
            # goh/gow can exceed h/w when output_padding>0; crop to (h, w)
            gcols = gcols.reshape(b, c * kh * kw, goh, gow)[:, :, :h, :w].reshape(b, -1, h * w)
            if bias is not None and bias.requires_grad:
                bias._accum(g.sum(axis=(0, 2, 3)))
            if x.requires_grad:
                x._accum(np.matmul(wmat, gcols).reshape(x.data.shape))
            if weight.requires_grad:
                gw = np.einsum("bol,bkl->ok", xflat, gcols)
                weight._accum(gw.reshape(weight.data.shape))
        out._backward = bwd
    return out


# -- backward driver -------------------------------------------------------------------


def backward(loss: Tensor) -> None:
    """Reverse-mode sweep from a scalar loss through the recorded tape."""
    if loss.data.size != 1:
        raise UsageError("backward requires a scalar loss")
    if not loss.requires_grad:
        raise UsageError("loss does not depend on any tracked parameter")
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack_: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack_:
        node, processed = stack_.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack_.append((node, True))
        for p in node._parents:
            if id(p) not in seen and (p.requires_grad or p._parents):
                stack_.append((p, False))
    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
    _check(loss.grad, "backward")


__all__ = [
    "Tensor", "NumericError", "UsageError",
    "no_grad", "verification_mode", "finite_checks", "default_dtype",
    "add", "sub", "mul", "div", "pow_scalar", "exp", "log", "sqrt",
    "tanh", "sigmoid", "silu", "relu", "softplus",
    "tsum", "tmean", "reshape", "transpose", "getitem", "concatenate", "stack",
    "matmul", "embedding", "take_along_last_axis",
    "softmax", "log_softmax", "masked_softmax", "layer_norm",
    "conv2d", "conv2d_transpose", "backward",
]
