"""Differentiable primitives on (batch, channels, length) tensors."""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import as_strided
from scipy.special import erf

from .tensor import Tensor, as_tensor, make


class ShapeError(ValueError):
    """An op received tensors whose shapes it cannot combine."""


def _need(cond: bool, op: str, msg: str) -> None:
    if not cond:
        raise ShapeError(f"{op}: {msg}")


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """``x @ w + b`` with ``x`` (batch, in) and ``w`` (in, out)."""
    _need(x.ndim == 2 and w.ndim == 2 and x.shape[1] == w.shape[0], "linear",
          f"input {x.shape} incompatible with weight {w.shape}")
    xd, wd = x.data, w.data
    out = xd @ wd
    if b is None:
        return make(out, (x, w), lambda g: (g @ wd.T, xd.T @ g), "linear")
    _need(b.shape == (w.shape[1],), "linear", f"bias {b.shape} vs out dim {w.shape[1]}")
    return make(out + b.data, (x, w, b), lambda g: (g @ wd.T, xd.T @ g, g.sum(axis=0)), "linear")


def conv1d(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """Stride-1 convolution with "same" zero padding.

    ``x`` is (B, Cin, L), ``w`` is (Cout, Cin, K). For even K the extra pad
    goes on the right.
    """
    _need(x.ndim == 3 and w.ndim == 3, "conv1d", f"expected 3-D input and weight, got {x.shape}, {w.shape}")
    B, cin, L = x.shape
    cout, cin_w, K = w.shape
    _need(cin == cin_w, "conv1d", f"input has {cin} channels, weight expects {cin_w}")
    if b is not None:
        _need(b.shape == (cout,), "conv1d", f"bias {b.shape} vs {cout} output channels")
    pl = (K - 1) // 2
    # channels-last padded copy; each im2col row is then one contiguous run of K*Cin values
    xpt = np.zeros((B, L + K - 1, cin), dtype=x.dtype)
    xpt[:, pl:pl + L, :] = x.data.transpose(0, 2, 1)
    s0, s1, s2 = xpt.strides
    cols = as_strided(xpt, (B, L, K * cin), (s0, s1, s2)).reshape(B * L, K * cin)
    wm = w.data.transpose(0, 2, 1).reshape(cout, K * cin)
    out = (cols @ wm.T).reshape(B, L, cout).transpose(0, 2, 1)
    if b is not None:
        out = out + b.data[None, :, None]

    def back(g):
        gm = g.transpose(0, 2, 1).reshape(B * L, cout)
        gw = (gm.T @ cols).reshape(cout, K, cin).transpose(0, 2, 1)
        dcols = (gm @ wm).reshape(B, L, K, cin)
        dxpt = np.zeros((B, L + K - 1, cin), dtype=g.dtype)
        for k in range(K):
            dxpt[:, k:k + L, :] += dcols[:, :, k, :]
        gx = dxpt[:, pl:pl + L, :].transpose(0, 2, 1)
        if b is None:
            return gx, gw
        return gx, gw, g.sum(axis=(0, 2))

    parents = (x, w) if b is None else (x, w, b)
    return make(np.ascontiguousarray(out), parents, back, "conv1d")


def upsample1d(x: Tensor, factor: int = 2) -> Tensor:
    """Nearest-neighbour upsampling along the last axis."""
    _need(x.ndim == 3, "upsample1d", f"expected (B, C, L), got {x.shape}")
    B, C, L = x.shape
    return make(np.repeat(x.data, factor, axis=2), (x,),
                lambda g: (g.reshape(B, C, L, factor).sum(axis=3),), "upsample1d")


def _pool_view(x: Tensor, width: int, op: str):
    _need(x.ndim == 3, op, f"expected (B, C, L), got {x.shape}")
    B, C, L = x.shape
    n = L // width
    _need(n >= 1, op, f"length {L} shorter than pool width {width}")
    return x.data[:, :, :n * width].reshape(B, C, n, width), n


def maxpool1d(x: Tensor, width: int = 2) -> Tensor:
    """Non-overlapping max pool; a trailing remainder is dropped."""
    view, n = _pool_view(x, width, "maxpool1d")
    idx = view.argmax(axis=3)
    out = np.take_along_axis(view, idx[..., None], axis=3)[..., 0]
    shape = x.shape

    def back(g):
        gv = np.zeros(view.shape, dtype=g.dtype)
        np.put_along_axis(gv, idx[..., None], g[..., None], axis=3)
        gx = np.zeros(shape, dtype=g.dtype)
        gx[:, :, :n * width] = gv.reshape(shape[0], shape[1], n * width)
        return (gx,)

    return make(out, (x,), back, "maxpool1d")


def avgpool1d(x: Tensor, width: int = 2) -> Tensor:
    """Non-overlapping mean pool; a trailing remainder is dropped."""
    view, n = _pool_view(x, width, "avgpool1d")
    shape = x.shape

    def back(g):
        gx = np.zeros(shape, dtype=g.dtype)
        gx[:, :, :n * width] = np.repeat(g / width, width, axis=2)
        return (gx,)

    return make(view.mean(axis=3), (x,), back, "avgpool1d")


def concat(tensors, axis: int = 1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    _need(len(tensors) > 0, "concat", "no inputs")
    ref = tensors[0].shape
    ax = axis % len(ref)
    for t in tensors[1:]:
        _need(t.ndim == len(ref) and all(a == b for i, (a, b) in enumerate(zip(t.shape, ref)) if i != ax),
              "concat", f"shapes {[t.shape for t in tensors]} differ off axis {axis}")
    bounds = np.cumsum([t.shape[ax] for t in tensors])[:-1]
    return make(np.concatenate([t.data for t in tensors], axis=ax), tuple(tensors),
                lambda g: tuple(np.split(g, bounds, axis=ax)), "concat")


def dropout(x: Tensor, rate: float, training: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout: survivors are scaled by 1/(1-rate); identity when not training."""
    if not training or rate == 0.0:
        return x
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    rng = rng if rng is not None else np.random.default_rng()
    mask = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)
    return make(x.data * mask, (x,), lambda g: (g * mask,), "dropout")


def reflect_pad1d(x: Tensor, left: int, right: int) -> Tensor:
    """Mirror padding along the last axis, edge sample not repeated."""
    L = x.shape[-1]
    _need(left < L and right < L, "reflect_pad1d", f"pad ({left}, {right}) too large for length {L}")
    width = [(0, 0)] * (x.ndim - 1) + [(left, right)]
    out = np.pad(x.data, width, mode="reflect")

    def back(g):
        gx = g[..., left:left + L].copy()
        if left:
            gx[..., 1:left + 1] += g[..., :left][..., ::-1]
        if right:
            gx[..., L - 1 - right:L - 1] += g[..., left + L:][..., ::-1]
        return (gx,)

    return make(out, (x,), back, "reflect_pad1d")


def crop1d(x: Tensor, start: int, length: int) -> Tensor:
    L = x.shape[-1]
    _need(0 <= start and start + length <= L, "crop1d", f"window [{start}, {start + length}) outside length {L}")
    return x[..., start:start + length]


def relu(x: Tensor) -> Tensor:
    mask = (x.data > 0).astype(x.dtype)
    return make(x.data * mask, (x,), lambda g: (g * mask,), "relu")


_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


def gelu(x: Tensor, mode: str = "exact") -> Tensor:
    """x * Phi(x), either via erf or the tanh approximation."""
    xd = x.data
    if mode == "exact":
        cdf = 0.5 * (1.0 + erf(xd / math.sqrt(2.0)))
        pdf = np.exp(-0.5 * xd * xd) / math.sqrt(2.0 * math.pi)
        out = xd * cdf
        dydx = cdf + xd * pdf
    elif mode == "tanh_approx":
        u = _SQRT_2_OVER_PI * (xd + 0.044715 * xd ** 3)
        t = np.tanh(u)
        out = 0.5 * xd * (1.0 + t)
        du = _SQRT_2_OVER_PI * (1.0 + 3 * 0.044715 * xd * xd)
        dydx = 0.5 * (1.0 + t) + 0.5 * xd * (1.0 - t * t) * du
    else:
        raise ValueError(f"unknown gelu mode {mode!r}")
    return make(out.astype(xd.dtype, copy=False), (x,), lambda g: (g * dydx,), f"gelu:{mode}")


def diff1d(x: Tensor) -> Tensor:
    """Forward difference along the last axis: y[i] = x[i+1] - x[i]."""
    _need(x.shape[-1] >= 2, "diff1d", f"needs length >= 2, got {x.shape[-1]}")
    shape = x.shape

    def back(g):
        gx = np.zeros(shape, dtype=g.dtype)
        gx[..., 1:] += g
        gx[..., :-1] -= g
        return (gx,)

    return make(np.diff(x.data, axis=-1), (x,), back, "diff1d")
