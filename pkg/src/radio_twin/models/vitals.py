"""Residual 1-D CNN regressing (HR, SpO2, RR) from a PPG segment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import Conv1d, Linear, Module
from ..autodiff import functional as F
from ..autodiff.tensor import Tensor

VITAL_NAMES = ("hr", "spo2", "rr")


@dataclass(frozen=True)
class VitalsCnnSpec:
    stages: int = 4
    base_width: int = 16
    kernel: int = 5


class _ResStage(Module):
    def __init__(self, c_in, c_out, k, rng, dtype):
        self.c1 = Conv1d(c_in, c_out, k, rng, dtype)
        self.c2 = Conv1d(c_out, c_out, k, rng, dtype)
        self.proj = Conv1d(c_in, c_out, 1, rng, dtype)

    def forward(self, x):
        h = self.c2(F.relu(self.c1(x)))
        return F.maxpool1d(F.relu(h + self.proj(x)), 2)


class VitalsCnn(Module):
    """Outputs are in natural units: ``label_mean + label_scale * z``.

    With the head zeroed the network predicts ``label_mean`` for every input.
    """

    def __init__(self, spec: VitalsCnnSpec = VitalsCnnSpec(), seed: int = 0, dtype=np.float64,
                 label_mean=(75.0, 97.0, 16.0), label_scale=(10.0, 1.0, 3.0)):
        self.spec = spec
        rng = np.random.default_rng([seed, 5])
        widths = [spec.base_width * 2 ** i for i in range(spec.stages)]
        self.stages = [_ResStage(a, b, spec.kernel, rng, dtype) for a, b in zip([1] + widths[:-1], widths)]
        self.head = Linear(widths[-1], 3, rng, dtype)
        self.label_mean = np.asarray(label_mean, dtype=dtype)
        self.label_scale = np.asarray(label_scale, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 2:
            raise F.ShapeError(f"VitalsCnn: expected (B, L), got {x.shape}")
        h = x.reshape(x.shape[0], 1, x.shape[1])
        for stage in self.stages:
            h = stage(h)
        z = self.head(h.mean(axis=2))
        return z * self.label_scale.astype(x.dtype) + self.label_mean.astype(x.dtype)
