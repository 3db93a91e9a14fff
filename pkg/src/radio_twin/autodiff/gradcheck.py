"""Central finite-difference gradient checking."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


def grad_check(fn, inputs: list[Tensor], eps: float = 1e-4, max_coords: int = 400,
               seed: int = 0, kink_tol: float = 1e-6, kink_probe=None, floor: float = 1e-6) -> float:
    """Largest relative error between backprop and finite differences.

    ``fn`` maps the given tensors to a scalar tensor. Tensors with more than
    ``max_coords`` entries are subsampled (at least 200 coordinates each).
    ``kink_probe``, if given, returns an array of distances-to-kink for the
    current inputs (e.g. the pre-|.| residuals); a coordinate is skipped when
    perturbing it moves any such value across zero or within ``kink_tol``.
    """
    for t in inputs:
        if t.dtype != np.float64:
            raise TypeError("grad_check needs float64 tensors")
        t.grad = None
    out = fn(*inputs)
    out.backward()
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in inputs]

    rng = np.random.default_rng(seed)
    worst = 0.0
    for t, ga in zip(inputs, analytic):
        flat = t.data.reshape(-1)
        n = flat.size
        coords = np.arange(n) if n <= max_coords else rng.choice(n, size=min(n, max(200, max_coords)), replace=False)
        for i in coords:
            orig = flat[i]
            flat[i] = orig + eps
            plus = float(fn(*inputs).data)
            probe_p = None if kink_probe is None else np.asarray(kink_probe(*inputs))
            flat[i] = orig - eps
            minus = float(fn(*inputs).data)
            probe_m = None if kink_probe is None else np.asarray(kink_probe(*inputs))
            flat[i] = orig
            if probe_p is not None:
                crosses = (np.sign(probe_p) != np.sign(probe_m)) | (np.abs(probe_p) < kink_tol) | (np.abs(probe_m) < kink_tol)
                if crosses.any():
                    continue
            numeric = (plus - minus) / (2.0 * eps)
            a = ga.reshape(-1)[i]
            err = abs(a - numeric) / max(abs(a), abs(numeric), floor)
            worst = max(worst, err)
    return worst
