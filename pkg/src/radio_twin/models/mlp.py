"""DCT + MLP baseline: per-channel DCT-II in, DCT coefficients out, inverse DCT to a waveform."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..autodiff import Dropout, Linear, Module
from ..autodiff import functional as F
from ..autodiff.tensor import Tensor
from ..spectral import dct2, idct_matrix

SEGMENT_LEN = 450


@dataclass(frozen=True)
class MlpSpec:
    n_ch: int = 16
    k_mode: int = 1                # 1: |h| per channel, 2: real and imaginary rows
    length: int = SEGMENT_LEN
    hidden: tuple = (2048, 1024, 512, 512, 450)
    dropouts: tuple = (0.05, 0.05, 0.1, 0.1, 0.15)
    gelu_mode: str = "exact"

    def __post_init__(self):
        if self.k_mode not in (1, 2):
            raise ValueError(f"k_mode must be 1 or 2, got {self.k_mode}")
        if len(self.dropouts) != len(self.hidden):
            raise ValueError("one dropout rate per hidden layer")

    @property
    def input_dim(self) -> int:
        return self.n_ch * self.length * self.k_mode


class Mlp(Module):
    """Six linear layers; GELU and dropout after each of the first five."""

    def __init__(self, spec: MlpSpec = MlpSpec(), seed: int = 0, dtype=np.float64):
        self.spec = spec
        rng = np.random.default_rng([seed, 3])
        dims = [spec.input_dim, *spec.hidden, spec.length]
        self.layers = [Linear(a, b, rng, dtype) for a, b in zip(dims[:-1], dims[1:])]
        self.drops = [Dropout(p, np.random.default_rng([seed, 4, i])) for i, p in enumerate(spec.dropouts)]

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 2 or x.shape[1] != self.spec.input_dim:
            raise F.ShapeError(f"Mlp: expected (B, {self.spec.input_dim}), got {x.shape}")
        for layer, drop in zip(self.layers[:-1], self.drops):
            x = drop(F.gelu(layer(x), self.spec.gelu_mode))
        return self.layers[-1](x)


def mlp_features(pairs, k_mode: int = 1) -> np.ndarray:
    """Per-channel DCT-II of each segment, flattened channel-major.

    Coefficients are scaled by sqrt(2/N) so a unit-variance segment gives
    roughly unit-variance inputs.
    """
    rows = []
    for p in pairs:
        if k_mode == 1:
            if p.magnitude is None:
                raise ValueError(f"{p.subject_id}#{p.segment_index}: no magnitude rows for k_mode=1")
            x = p.magnitude
        else:
            x = p.radio
        rows.append(dct2(x).reshape(-1))
    if not rows:
        return np.zeros((0, 0))
    n = pairs[0].ppg.shape[-1]
    return np.stack(rows) * math.sqrt(2.0 / n)


class DctMlp(Module):
    """MLP followed by a fixed inverse-DCT layer, so training sees waveform error."""

    def __init__(self, spec: MlpSpec = MlpSpec(), seed: int = 0, dtype=np.float64):
        self.mlp = Mlp(spec, seed, dtype)
        # undo the sqrt(2/N) feature scaling on the way out
        self._idct = (idct_matrix(spec.length) * math.sqrt(spec.length / 2.0)).astype(dtype)

    @property
    def spec(self) -> MlpSpec:
        return self.mlp.spec

    def coefficients(self, x: Tensor) -> Tensor:
        return self.mlp(x) * math.sqrt(self.spec.length / 2.0)

    def forward(self, x: Tensor) -> Tensor:
        return self.mlp(x) @ Tensor(self._idct.astype(x.dtype, copy=False))
