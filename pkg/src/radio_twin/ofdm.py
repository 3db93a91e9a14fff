"""Baseband OFDM transceiver and per-subcarrier least-squares CFR estimation.

All transforms act on the last axis, so a stack of symbols shaped
``(n_symbols, N)`` is processed in one call.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

# Gray map: first bit selects the sign of the imaginary part's partner.
# 00 -> (1+j), 01 -> (-1+j), 11 -> (-1-j), 10 -> (1-j), all scaled by 1/sqrt(2).
_QPSK = {
    (0, 0): complex(1, 1),
    (0, 1): complex(-1, 1),
    (1, 1): complex(-1, -1),
    (1, 0): complex(1, -1),
}
_QPSK_TABLE = np.array(
    [_QPSK[(0, 0)], _QPSK[(0, 1)], _QPSK[(1, 0)], _QPSK[(1, 1)]]
) / np.sqrt(2.0)


class SingularEstimateError(ValueError):
    """Raised when a subcarrier has no pilot energy across all observations."""

    def __init__(self, subcarrier: int):
        super().__init__(f"zero pilot energy on subcarrier {subcarrier}; LS estimate undefined")
        self.subcarrier = subcarrier


@dataclass(frozen=True)
class OfdmConfig:
    n_subcarriers: int = 64
    n_data: int = 52
    n_pilot: int = 12
    cp_len: int = 16
    sample_rate: float = 20_000.0
    carrier_freq: float = 5.23e9
    modulation: str = "QPSK"

    def __post_init__(self):
        if self.n_data + self.n_pilot != self.n_subcarriers:
            raise ValueError("n_data + n_pilot must equal n_subcarriers")
        if not 0 <= self.cp_len < self.n_subcarriers:
            raise ValueError("cp_len must be in [0, n_subcarriers)")
        if self.modulation != "QPSK":
            raise ValueError(f"unsupported modulation {self.modulation!r}")

    def symbol_rate(self) -> float:
        """CFR frames per second, one per OFDM symbol including its prefix."""
        return self.sample_rate / (self.n_subcarriers + self.cp_len)

    @property
    def subcarrier_spacing(self) -> float:
        return self.sample_rate / self.n_subcarriers

    def pilot_indices(self) -> np.ndarray:
        step = self.n_subcarriers // self.n_pilot if self.n_pilot else 0
        return (np.arange(self.n_pilot) * step) % self.n_subcarriers

    def wavelengths(self) -> np.ndarray:
        """Per-subcarrier wavelength in meters, lambda_k = c / (f_c + k * df)."""
        k = np.arange(self.n_subcarriers)
        return SPEED_OF_LIGHT / (self.carrier_freq + k * self.subcarrier_spacing)


SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class CfrFrame:
    h: np.ndarray
    symbol_index: int = 0
    timestamp: float = 0.0


def _as_complex(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.complex128)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def _check_len(x: np.ndarray, n: int, op: str) -> None:
    if x.shape[-1] != n:
        raise ValueError(f"{op}: expected length {n} on last axis, got {x.shape[-1]}")


def map_qpsk(bits: Sequence[int]) -> np.ndarray:
    """Map a bit sequence onto unit-energy Gray-coded QPSK symbols."""
    b = np.asarray(bits, dtype=np.int64).ravel()
    if b.size % 2:
        raise ValueError(f"QPSK mapping needs an even number of bits, got {b.size}")
    if np.any((b != 0) & (b != 1)):
        raise ValueError("bits must be 0 or 1")
    return _QPSK_TABLE[2 * b[0::2] + b[1::2]]


def ofdm_modulate(d, cfg: OfdmConfig = OfdmConfig()) -> np.ndarray:
    """x[n] = (1/N) sum_k d_k exp(j 2 pi k n / N)."""
    d = _as_complex(d, "d")
    _check_len(d, cfg.n_subcarriers, "ofdm_modulate")
    return np.fft.ifft(d, axis=-1)


def ofdm_demodulate(y, cfg: OfdmConfig = OfdmConfig()) -> np.ndarray:
    """Y[k] = sum_n y[n] exp(-j 2 pi k n / N); the prefix must already be removed."""
    y = _as_complex(y, "y")
    _check_len(y, cfg.n_subcarriers, "ofdm_demodulate")
    return np.fft.fft(y, axis=-1)


def add_cyclic_prefix(x, cfg: OfdmConfig = OfdmConfig()) -> np.ndarray:
    x = _as_complex(x, "x")
    _check_len(x, cfg.n_subcarriers, "add_cyclic_prefix")
    if cfg.cp_len == 0:
        return x.copy()
    return np.concatenate([x[..., -cfg.cp_len:], x], axis=-1)


def remove_cyclic_prefix(x, cfg: OfdmConfig = OfdmConfig()) -> np.ndarray:
    x = _as_complex(x, "x")
    _check_len(x, cfg.n_subcarriers + cfg.cp_len, "remove_cyclic_prefix")
    return x[..., cfg.cp_len:]


def apply_channel(tx, h, noise_var: float = 0.0, seed: int | None = 0) -> np.ndarray:
    """Pass time-domain symbols through a per-subcarrier channel plus AWGN.

    ``tx`` may carry a cyclic prefix: its length is ``len(h) + L`` for some
    ``L >= 0`` and the prefix is rebuilt on the output, so the result looks
    like what a receiver would capture. The channel multiplies each
    subcarrier of the prefix-free body by ``h``, which equals circular
    convolution. Noise is circular complex Gaussian with ``noise_var / 2``
    per real component.
    """
    if noise_var < 0:
        raise ValueError(f"noise_var must be >= 0, got {noise_var}")
    tx = _as_complex(tx, "tx")
    h = _as_complex(h, "h").ravel()
    n = h.size
    cp = tx.shape[-1] - n
    if cp < 0:
        raise ValueError(f"apply_channel: tx length {tx.shape[-1]} shorter than channel length {n}")
    body = tx[..., cp:]
    rx = np.fft.ifft(np.fft.fft(body, axis=-1) * h, axis=-1)
    if cp:
        rx = np.concatenate([rx[..., -cp:], rx], axis=-1)
    if noise_var > 0:
        rng = np.random.default_rng(seed)
        scale = np.sqrt(noise_var / 2.0)
        rx = rx + scale * (rng.standard_normal(rx.shape) + 1j * rng.standard_normal(rx.shape))
    return rx


def ls_estimate(d_obs, y_obs, symbol_index: int = 0, cfg: OfdmConfig | None = None) -> CfrFrame:
    """Per-subcarrier least squares: h_k = (d_k^H d_k)^-1 d_k^H y_k.

    ``d_obs`` and ``y_obs`` are lists (or 2-D arrays) of known transmitted
    spectra and received spectra, one row per observation.
    """
    d = np.atleast_2d(_as_complex(d_obs, "d_obs"))
    y = np.atleast_2d(_as_complex(y_obs, "y_obs"))
    if d.shape != y.shape:
        raise ValueError(f"ls_estimate: observation shapes differ, {d.shape} vs {y.shape}")
    if d.shape[0] == 0:
        raise ValueError("ls_estimate: need at least one observation")
    if cfg is not None:
        _check_len(d, cfg.n_subcarriers, "ls_estimate")
    energy = np.sum(np.abs(d) ** 2, axis=0)
    dead = np.flatnonzero(energy == 0)
    if dead.size:
        raise SingularEstimateError(int(dead[0]))
    h = np.sum(np.conj(d) * y, axis=0) / energy
    rate = (cfg or OfdmConfig()).symbol_rate()
    return CfrFrame(h=h, symbol_index=symbol_index, timestamp=symbol_index / rate)


def training_symbols(n_symbols: int, cfg: OfdmConfig = OfdmConfig(), seed: int | None = 0) -> np.ndarray:
    """Random known QPSK spectra, one row per OFDM symbol."""
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=2 * cfg.n_subcarriers * n_symbols)
    return map_qpsk(bits).reshape(n_symbols, cfg.n_subcarriers)


def estimate_cfr_stream(h_true, noise_var: float = 0.0, cfg: OfdmConfig = OfdmConfig(),
                        seed: int | None = 0) -> np.ndarray:
    """Run the full link once per row of ``h_true`` and return LS estimates.

    Each row is one OFDM symbol period: a known training symbol is
    modulated, prefixed, sent through that period's channel, received,
    stripped, demodulated and estimated from the single observation.
    """
    h_true = np.atleast_2d(_as_complex(h_true, "h_true"))
    _check_len(h_true, cfg.n_subcarriers, "estimate_cfr_stream")
    n_frames = h_true.shape[0]
    rng = np.random.default_rng(seed)
    d = training_symbols(n_frames, cfg, seed=rng.integers(2**63))
    tx = add_cyclic_prefix(ofdm_modulate(d, cfg), cfg)
    # per-frame channel: same math as apply_channel, vectorized over frames
    rx = np.fft.ifft(np.fft.fft(tx[:, cfg.cp_len:], axis=-1) * h_true, axis=-1)
    if noise_var > 0:
        scale = np.sqrt(noise_var / 2.0)
        rx = rx + scale * (rng.standard_normal(rx.shape) + 1j * rng.standard_normal(rx.shape))
    y = ofdm_demodulate(rx, cfg)
    return np.conj(d) * y / np.abs(d) ** 2
