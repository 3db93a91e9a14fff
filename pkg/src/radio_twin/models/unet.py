"""1-D U-NET cascade: a deep-supervised Approximation network feeding a
MultiRes Refinement network."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import Conv1d, Module
from ..autodiff import functional as F
from ..autodiff.tensor import Tensor

SEGMENT_LEN = 450


def _pad_plan(length: int, pad_to: int) -> tuple[int, int]:
    extra = pad_to - length
    return extra // 2, extra - extra // 2


def level_lengths(length: int = SEGMENT_LEN, depth: int = 4) -> list[int]:
    return [length // 2 ** k for k in range(depth)]


def _act(x, kind: str):
    return F.relu(x) if kind == "relu" else F.gelu(x, kind)


@dataclass(frozen=True)
class UnetSpec:
    in_channels: int = 32
    depth: int = 4
    base_width: int = 16
    bottleneck_mult: int = 5       # bottleneck width = base_width * bottleneck_mult
    kernel: int = 3
    pool: int = 2
    pad_to: int = 480
    activation: str = "relu"

    def widths(self) -> list[int]:
        return [self.base_width * 2 ** k for k in range(self.depth)]


class _DoubleConv(Module):
    def __init__(self, c_in, c_out, k, rng, dtype, act):
        self.c1 = Conv1d(c_in, c_out, k, rng, dtype)
        self.c2 = Conv1d(c_out, c_out, k, rng, dtype)
        self.act = act

    def forward(self, x):
        return _act(self.c2(_act(self.c1(x), self.act)), self.act)


class UnetApprox(Module):
    """Encoder-decoder with skip concatenation and one linear head per decoder level.

    ``forward`` returns outputs finest first, with lengths 450, 225, 112, 56
    for the default spec.
    """

    def __init__(self, spec: UnetSpec = UnetSpec(), seed: int = 0, dtype=np.float64):
        if spec.pad_to % spec.pool ** spec.depth:
            raise ValueError(f"pad_to={spec.pad_to} not divisible by pool^depth")
        self.spec = spec
        rng = np.random.default_rng([seed, 1])
        w = spec.widths()
        k, a = spec.kernel, spec.activation
        self.enc = [_DoubleConv(c_in, c_out, k, rng, dtype, a)
                    for c_in, c_out in zip([spec.in_channels] + w[:-1], w)]
        wb = spec.base_width * spec.bottleneck_mult
        self.mid = _DoubleConv(w[-1], wb, k, rng, dtype, a)
        ups = [wb] + w[::-1][:-1]
        self.dec = [_DoubleConv(c_up + c_skip, c_skip, k, rng, dtype, a)
                    for c_up, c_skip in zip(ups, w[::-1])]
        self.heads = [Conv1d(c, 1, 1, rng, dtype) for c in w[::-1]]
        for h in self.heads:        # start from a flat prediction
            h.weight.data[...] = 0.0

    def forward(self, x: Tensor) -> list[Tensor]:
        s = self.spec
        if x.ndim != 3 or x.shape[1] != s.in_channels:
            raise F.ShapeError(f"UnetApprox: expected (B, {s.in_channels}, L), got {x.shape}")
        length = x.shape[2]
        left, right = _pad_plan(length, s.pad_to)
        h = F.reflect_pad1d(x, left, right)
        skips = []
        for block in self.enc:
            h = block(h)
            skips.append(h)
            h = F.maxpool1d(h, s.pool)
        h = self.mid(h)
        outs = []
        for level, (block, head, skip) in enumerate(zip(self.dec, self.heads, skips[::-1])):
            h = block(F.concat([F.upsample1d(h, s.pool), skip], axis=1))
            k = s.depth - 1 - level          # 0 = full resolution
            y = head(h)
            y = F.crop1d(y, left // s.pool ** k, length // s.pool ** k)
            outs.append(y.reshape(y.shape[0], y.shape[2]))
        return outs[::-1]


@dataclass(frozen=True)
class MultiResSpec:
    depth: int = 4
    widths: tuple = (16, 32, 64, 128)
    bottleneck: int = 224
    kernel: int = 3
    pad_to: int = 480
    activation: str = "relu"

    def respath_lengths(self) -> list[int]:
        # shallow skips see the largest semantic gap, so they get the most units
        return [self.depth - k for k in range(self.depth)]


def _branch_widths(width: int) -> tuple[int, int, int]:
    a = max(1, width // 6)
    b = max(1, width // 3)
    return a, b, width - a - b


class MultiResBlock(Module):
    """Three chained k=3 convs (growing receptive field) concatenated, plus a 1x1 shortcut."""

    def __init__(self, c_in, width, k, rng, dtype, act):
        w1, w2, w3 = _branch_widths(width)
        self.b1 = Conv1d(c_in, w1, k, rng, dtype)
        self.b2 = Conv1d(w1, w2, k, rng, dtype)
        self.b3 = Conv1d(w2, w3, k, rng, dtype)
        self.short = Conv1d(c_in, width, 1, rng, dtype)
        self.act = act

    def forward(self, x):
        a = _act(self.b1(x), self.act)
        b = _act(self.b2(a), self.act)
        c = _act(self.b3(b), self.act)
        return _act(F.concat([a, b, c], axis=1) + self.short(x), self.act)


class ResPath(Module):
    """Chain of (k=3 conv + 1x1 residual) units along a skip connection."""

    def __init__(self, width, n_units, k, rng, dtype, act):
        self.convs = [Conv1d(width, width, k, rng, dtype) for _ in range(n_units)]
        self.shorts = [Conv1d(width, width, 1, rng, dtype) for _ in range(n_units)]
        self.act = act

    def __len__(self):
        return len(self.convs)

    def forward(self, x):
        for conv, short in zip(self.convs, self.shorts):
            x = _act(conv(x) + short(x), self.act)
        return x


class MultiResRefine(Module):
    """Single-channel in, single-channel out MultiRes U-NET; the input is added back at the end."""

    def __init__(self, spec: MultiResSpec = MultiResSpec(), seed: int = 0, dtype=np.float64):
        self.spec = spec
        rng = np.random.default_rng([seed, 2])
        k, a, w = spec.kernel, spec.activation, list(spec.widths)
        self.enc = [MultiResBlock(c_in, c_out, k, rng, dtype, a) for c_in, c_out in zip([1] + w[:-1], w)]
        self.paths = [ResPath(c, n, k, rng, dtype, a) for c, n in zip(w, spec.respath_lengths())]
        self.mid = MultiResBlock(w[-1], spec.bottleneck, k, rng, dtype, a)
        ups = [spec.bottleneck] + w[::-1][:-1]
        self.dec = [MultiResBlock(c_up + c_skip, c_skip, k, rng, dtype, a) for c_up, c_skip in zip(ups, w[::-1])]
        self.head = Conv1d(w[0], 1, 1, rng, dtype)
        self.head.weight.data[...] = 0.0    # refinement starts as the identity

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 2:
            raise F.ShapeError(f"MultiResRefine: expected (B, L), got {x.shape}")
        B, length = x.shape
        left, right = _pad_plan(length, self.spec.pad_to)
        h = F.reflect_pad1d(x.reshape(B, 1, length), left, right)
        skips = []
        for block, path in zip(self.enc, self.paths):
            h = block(h)
            skips.append(path(h))
            h = F.maxpool1d(h, 2)
        h = self.mid(h)
        for block, skip in zip(self.dec, skips[::-1]):
            h = block(F.concat([F.upsample1d(h, 2), skip], axis=1))
        y = F.crop1d(self.head(h), left, length)
        return y.reshape(B, length) + x


class UnetCascade(Module):
    def __init__(self, approx: UnetApprox, refine: MultiResRefine):
        self.approx = approx
        self.refine = refine

    def forward(self, x: Tensor) -> tuple[Tensor, list[Tensor]]:
        levels = self.approx(x)
        return self.refine(levels[0]), levels


def level_targets(target: np.ndarray, depth: int = 4) -> list[np.ndarray]:
    """Average-pool a (B, L) target by 1, 2, 4, ... dropping any remainder."""
    out = []
    for k in range(depth):
        w = 2 ** k
        n = target.shape[-1] // w
        out.append(target[..., :n * w].reshape(*target.shape[:-1], n, w).mean(axis=-1))
    return out
