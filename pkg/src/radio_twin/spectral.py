"""Unnormalized DCT-II and its inverse.

Forward:  X[k] = sum_n x[n] cos(pi/N (n + 1/2) k)
Inverse:  x[n] = (1/N) (X[0] + 2 sum_{k>=1} X[k] cos(pi/N (n + 1/2) k))

scipy's unnormalized type-II DCT carries an extra factor of 2, which is
divided out here. Both functions transform along the last axis.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.fft


def dct2(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] < 1:
        raise ValueError("dct2 needs at least one sample")
    return scipy.fft.dct(x, type=2, axis=-1) / 2.0


def idct2(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.shape[-1] < 1:
        raise ValueError("idct2 needs at least one coefficient")
    return scipy.fft.idct(2.0 * X, type=2, axis=-1)


@lru_cache(maxsize=8)
def idct_matrix(n: int) -> np.ndarray:
    """Matrix M with ``X @ M == idct2(X)`` for row vectors of length ``n``.

    Lets the inverse transform sit inside an autodiff graph as a fixed
    linear map.
    """
    k = np.arange(n)[:, None]
    t = np.arange(n)[None, :]
    m = 2.0 * np.cos(np.pi / n * (t + 0.5) * k) / n
    m[0, :] = 1.0 / n
    m.setflags(write=False)
    return m
