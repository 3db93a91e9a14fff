"""Conditioning of the CFR stream and the reference PPG into aligned training pairs.

Radio path: channel selection -> real/imag expansion -> 2.5 s windows ->
per-row z-score -> (optional) noisy copies.
PPG path: db2 wavelet detrend -> 12th-order Butterworth lowpass -> windows ->
z-score -> noisy copies.
The two streams are brought into register first by maximizing the inner
product between the level-7 wavelet detail of a radio-derived waveform
and the conditioned PPG.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field, replace

import numpy as np
import pywt
from scipy import signal

from .physio import PpgRecording, RadioRecording

WAVELET = "db2"
DWT_MODE = "symmetric"   # half-sample symmetric extension
SEGMENT_S = 2.5
SEGMENT_LEN = 450


class DegenerateSegmentError(ValueError):
    """Zero-variance input cannot be z-scored."""


class AlignmentError(RuntimeError):
    pass


class FilterDesignError(RuntimeError):
    pass


@dataclass
class SegmentPair:
    radio: np.ndarray            # (2 * n_ch, 450), rows z-scored
    ppg: np.ndarray              # (450,), z-scored
    subject_id: str
    segment_index: int
    augmented: bool = False
    magnitude: np.ndarray | None = None   # (n_ch, 450) z-scored |h|, for magnitude-only models
    vitals: np.ndarray | None = None      # mean (hr, spo2, rr) over the window
    t_start: float = 0.0

    @property
    def n_ch(self) -> int:
        return self.radio.shape[0] // 2


@dataclass(frozen=True)
class AlignmentResult:
    lag: int
    score: float


# ---------------------------------------------------------------- radio ----

def channel_indices(n_ch: int, n_total: int = 64) -> np.ndarray:
    if not 1 <= n_ch <= n_total:
        raise ValueError(f"n_ch must be in [1, {n_total}], got {n_ch}")
    return (np.arange(n_ch) * n_total) // n_ch


def select_channels(rec: RadioRecording, n_ch: int, indices=None) -> RadioRecording:
    """Keep ``n_ch`` subcarriers at uniform stride, or an explicit index list."""
    n_total = rec.cfr.shape[1]
    if indices is None:
        idx = channel_indices(n_ch, n_total)
    else:
        idx = np.asarray(indices, dtype=int)
        if idx.size != n_ch or np.any((idx < 0) | (idx >= n_total)):
            raise ValueError(f"bad channel index list {indices!r}")
    return RadioRecording(cfr=rec.cfr[:, idx], rate=rec.rate, subject_id=rec.subject_id,
                          channels=np.asarray(rec.channels)[idx], start=rec.start)


def expand_complex(rec) -> np.ndarray:
    """(frames, n) complex -> (2n, frames) real, rows [re_0..re_{n-1}, im_0..im_{n-1}]."""
    cfr = rec.cfr if isinstance(rec, RadioRecording) else np.asarray(rec)
    return np.concatenate([cfr.real.T, cfr.imag.T], axis=0)


def combine_complex(rows: np.ndarray) -> np.ndarray:
    """Inverse of :func:`expand_complex`."""
    n = rows.shape[0] // 2
    return (rows[:n] + 1j * rows[n:]).T


# -------------------------------------------------------------- generic ----

def segment(stream, rate: float, win_s: float = SEGMENT_S) -> list[np.ndarray]:
    """Non-overlapping windows along the last axis; the remainder is dropped."""
    x = np.asarray(stream)
    win = int(round(win_s * rate))
    n = x.shape[-1] // win if win > 0 else 0
    if n == 0:
        raise ValueError(f"stream of {x.shape[-1] / rate:.3f} s is shorter than one {win_s} s window")
    return [x[..., i * win:(i + 1) * win] for i in range(n)]


def zscore(x) -> np.ndarray:
    """Zero mean, unit population std along the last axis."""
    x = np.asarray(x, dtype=float)
    mu = x.mean(axis=-1, keepdims=True)
    sd = x.std(axis=-1, keepdims=True)
    if np.any(sd <= 1e-12 * np.maximum(1.0, np.abs(mu))):
        raise DegenerateSegmentError("constant segment")
    return (x - mu) / sd


def resample_to(x, out_len: int = SEGMENT_LEN) -> np.ndarray:
    """Linear interpolation onto ``out_len`` points spanning the same window."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if n < 2:
        raise ValueError("resample_to needs at least 2 samples")
    if out_len == n:
        return x.copy()
    pos = np.linspace(0.0, n - 1, out_len)
    lo = np.minimum(np.floor(pos).astype(int), n - 2)
    frac = pos - lo
    return x[..., lo] * (1.0 - frac) + x[..., lo + 1] * frac


def augment(pairs: list[SegmentPair], noise_var: float = 0.01, seed: int = 0) -> list[SegmentPair]:
    """Originals followed by one noisy copy each (radio, magnitude and PPG perturbed)."""
    if noise_var < 0:
        raise ValueError("noise_var must be >= 0")
    sd = np.sqrt(noise_var)
    copies = []
    for p in pairs:
        rng = np.random.default_rng([seed, zlib.crc32(p.subject_id.encode()), p.segment_index])
        radio = p.radio + sd * rng.standard_normal(p.radio.shape)
        ppg = p.ppg + sd * rng.standard_normal(p.ppg.shape)
        mag = None if p.magnitude is None else p.magnitude + sd * rng.standard_normal(p.magnitude.shape)
        copies.append(replace(p, radio=radio, ppg=ppg, magnitude=mag, augmented=True))
    return list(pairs) + copies


# ---------------------------------------------------------------- ppg ------

def _dwt_levels_ok(n: int, levels: int, op: str) -> None:
    if n < 2 ** levels:
        raise ValueError(f"{op}: need at least {2 ** levels} samples for {levels} levels, got {n}")


def wavelet_band(x, level: int, band: str, n_levels: int | None = None) -> np.ndarray:
    """Reconstruct a single db2 band: ``band='A'`` approximation or ``'D'`` detail at ``level``."""
    x = np.asarray(x, dtype=float)
    n_levels = level if n_levels is None else n_levels
    coeffs = pywt.wavedec(x, WAVELET, mode=DWT_MODE, level=n_levels)
    keep = 0 if band == "A" else n_levels - level + 1
    kept = [c if i == keep else np.zeros_like(c) for i, c in enumerate(coeffs)]
    return pywt.waverec(kept, WAVELET, mode=DWT_MODE)[: x.size]


def detrend_wavelet(ppg, levels: int = 9):
    """Subtract the level-``levels`` db2 approximation (the slow trend)."""
    rec = ppg if isinstance(ppg, PpgRecording) else None
    x = rec.samples if rec is not None else np.asarray(ppg, dtype=float)
    _dwt_levels_ok(x.size, levels, "detrend_wavelet")
    out = x - wavelet_band(x, levels, "A")
    if rec is not None:
        return PpgRecording(samples=out, rate=rec.rate, start=rec.start)
    return out


def butterworth_sos(rate: float, cutoff: float = 4.0, order: int = 12) -> np.ndarray:
    if not 0 < cutoff < rate / 2:
        raise ValueError(f"cutoff {cutoff} Hz must lie in (0, {rate / 2})")
    sos = signal.butter(order, cutoff, btype="low", fs=rate, output="sos")
    for row in sos:
        poles = np.roots(row[3:])
        if np.any(np.abs(poles) >= 1.0):
            raise FilterDesignError(f"unstable section, pole radius {np.abs(poles).max():.6f}")
    return sos


def butterworth_lowpass(x, rate: float, cutoff: float = 4.0, order: int = 12) -> np.ndarray:
    """Zero-phase (forward-backward) Butterworth lowpass from second-order sections."""
    sos = butterworth_sos(rate, cutoff, order)
    return signal.sosfiltfilt(sos, np.asarray(x, dtype=float), axis=-1)


def condition_ppg(ppg: PpgRecording, detrend_levels: int = 9, cutoff: float = 4.0,
                  order: int = 12) -> PpgRecording:
    detrended = detrend_wavelet(ppg, detrend_levels)
    return PpgRecording(samples=butterworth_lowpass(detrended.samples, ppg.rate, cutoff, order),
                        rate=ppg.rate, start=ppg.start)


# ----------------------------------------------------------- alignment -----

def _swt_band(x: np.ndarray, level: int) -> np.ndarray:
    """Level-``level`` detail of the undecimated db2 transform, same length as ``x``."""
    n = x.size
    block = 2 ** level
    margin = 4 * block
    total = int(np.ceil((n + 2 * margin) / block)) * block
    right = total - n - margin
    xp = np.pad(x, (margin, right), mode="symmetric")
    coeffs = pywt.swt(xp, WAVELET, level=level, trim_approx=True)   # [cA_L, cD_L, ..., cD_1]
    kept = [np.zeros_like(c) for c in coeffs]
    kept[1] = coeffs[1]
    return pywt.iswt(kept, WAVELET)[margin:margin + n]


def extract_d7(channel_mag, rate: float = 250.0, level: int = 7, method: str = "dwt") -> np.ndarray:
    """Level-7 db2 detail band, reconstructed to the input length.

    At 250 Hz this covers roughly rate/2**8 .. rate/2**7 = 0.98 .. 1.95 Hz.
    ``method='dwt'`` reconstructs the band from the critically sampled
    decomposition; ``'swt'`` uses the undecimated transform, which is shift
    invariant but spreads the band's energy over neighbouring scales.
    """
    x = np.asarray(channel_mag, dtype=float)
    _dwt_levels_ok(x.size, level, "extract_d7")
    if method == "swt":
        return _swt_band(x, level)
    if method == "dwt":
        return wavelet_band(x, level, "D")
    raise ValueError(f"unknown method {method!r}")


def circle_center(z: np.ndarray) -> complex:
    """Algebraic (Kasa) least-squares fit of the circle traced by complex samples."""
    x, y = z.real, z.imag
    a = np.column_stack([x, y, np.ones_like(x)])
    sol, *_ = np.linalg.lstsq(a, x * x + y * y, rcond=None)
    return complex(sol[0] / 2, sol[1] / 2)


def reflection_phase(cfr: np.ndarray) -> np.ndarray:
    """Unwrapped angle of each subcarrier around its fitted static offset, mean removed.

    A moving reflector adds a rotating phasor to a static one, so each
    subcarrier sweeps an arc; the angle about the arc's center grows with
    displacement regardless of the static term, unlike the magnitude.
    """
    out = np.empty(cfr.shape, dtype=float)
    for k in range(cfr.shape[1]):
        z = cfr[:, k]
        ph = np.unwrap(np.angle(z - circle_center(z)))
        out[:, k] = ph - ph.mean()
    return out


def align(w, y, max_lag: int) -> AlignmentResult:
    """Lag of ``y`` behind ``w`` maximizing their inner product.

    score(tau) = sum_t y[t + tau] * w[t] with zero fill outside the record,
    so ``y`` equal to ``w`` delayed by 37 samples gives ``lag == 37``.
    Ties go to the smallest ``|tau|``.
    """
    w = np.asarray(w, dtype=float)
    y = np.asarray(y, dtype=float)
    if w.shape != y.shape or w.ndim != 1:
        raise ValueError("align: w and y must be 1-D of equal length")
    n = w.size
    if not 0 <= max_lag < n / 2:
        raise ValueError(f"align: max_lag must be in [0, {n / 2}), got {max_lag}")
    full = signal.correlate(y, w, mode="full", method="auto")   # index k <-> tau = k - (n - 1)
    lags = np.arange(-max_lag, max_lag + 1)
    scores = full[lags + n - 1]
    best = scores.max()
    cands = lags[np.isclose(scores, best, rtol=1e-12, atol=0.0)]
    tau = int(cands[np.argmin(np.abs(cands))])
    return AlignmentResult(lag=tau, score=float(scores[tau + max_lag]))


def alignment_signal(radio: RadioRecording, source: str = "phase", per_channel: int | None = None,
                     highpass_hz: float | None = 0.7) -> np.ndarray:
    """Radio-derived waveform whose D7 band is matched against the PPG.

    ``source='phase'`` averages :func:`reflection_phase` over channels;
    ``'magnitude'`` averages ``|h|``. A zero-phase highpass ahead of the
    wavelet band keeps breathing from leaking into it.
    """
    if source == "phase":
        trace = reflection_phase(radio.cfr)
    elif source == "magnitude":
        trace = np.abs(radio.cfr)
    else:
        raise ValueError(f"unknown alignment source {source!r}")
    trace = trace[:, per_channel] if per_channel is not None else trace.mean(axis=1)
    if highpass_hz:
        sos = signal.butter(4, highpass_hz, btype="high", fs=radio.rate, output="sos")
        trace = signal.sosfiltfilt(sos, trace)
    return extract_d7(trace, radio.rate, method="swt")


def estimate_lag(radio: RadioRecording, ppg_cond: PpgRecording, max_lag_s: float = 1.0,
                 source: str = "phase", per_channel: int | None = None) -> float:
    """Seconds by which the reference PPG runs behind the radio stream."""
    w = alignment_signal(radio, source, per_channel)
    t = radio.start + np.arange(radio.n_frames) / radio.rate
    y = np.interp(t, ppg_cond.times(), ppg_cond.samples, left=0.0, right=0.0)
    max_lag = min(int(round(max_lag_s * radio.rate)), (radio.n_frames - 1) // 2)
    return align(w, y, max_lag).lag / radio.rate


# ------------------------------------------------------------- pairs -------

@dataclass
class PairConfig:
    n_ch: int = 16
    channels: list | None = None
    max_lag_s: float = 1.0
    win_s: float = SEGMENT_S
    out_len: int = SEGMENT_LEN
    detrend_levels: int = 9
    cutoff_hz: float = 4.0
    filter_order: int = 12
    align_channel: int | None = None
    align_source: str = "phase"
    extras: dict = field(default_factory=dict)


def build_pairs(radio: RadioRecording, ppg: PpgRecording, n_ch: int = 16, vitals=None,
                cfg: PairConfig | None = None, return_lag: bool = False):
    """Turn one subject's recordings into aligned, normalized SegmentPairs."""
    cfg = cfg or PairConfig(n_ch=n_ch)
    sel = select_channels(radio, cfg.n_ch if cfg.channels is None else len(cfg.channels), cfg.channels)
    cond = condition_ppg(ppg, cfg.detrend_levels, cfg.cutoff_hz, cfg.filter_order)
    lag_s = estimate_lag(sel, cond, cfg.max_lag_s, cfg.align_source, cfg.align_channel)

    # put the PPG on the radio clock
    ppg_start = cond.start - lag_s
    ppg_end = ppg_start + cond.duration
    radio_end = sel.start + sel.duration
    if abs((radio_end - sel.start) - (ppg_end - ppg_start)) > 1.0:
        raise AlignmentError(
            f"{radio.subject_id}: radio {sel.duration:.2f} s vs PPG {cond.duration:.2f} s after alignment")
    t0 = max(sel.start, ppg_start)
    t1 = min(radio_end, ppg_end)
    if t1 - t0 < cfg.win_s:
        raise AlignmentError(f"{radio.subject_id}: only {max(t1 - t0, 0):.2f} s of overlap after alignment")

    r0 = int(np.ceil((t0 - sel.start) * sel.rate - 1e-9))
    p0 = int(np.ceil((t0 - ppg_start) * cond.rate - 1e-9))
    n_win = int(np.floor((t1 - t0) / cfg.win_s + 1e-9))
    r_len = int(round(cfg.win_s * sel.rate))
    p_len = int(round(cfg.win_s * cond.rate))
    n_win = min(n_win, (sel.n_frames - r0) // r_len, (cond.samples.size - p0) // p_len)
    rows = expand_complex(sel)[:, r0:r0 + n_win * r_len]
    mags = np.abs(sel.cfr.T)[:, r0:r0 + n_win * r_len]
    target = cond.samples[p0:p0 + n_win * p_len]

    pairs = []
    for k, (rw, mw, pw) in enumerate(zip(segment(rows, sel.rate, cfg.win_s),
                                         segment(mags, sel.rate, cfg.win_s),
                                         segment(target, cond.rate, cfg.win_s))):
        try:
            pr = zscore(resample_to(rw, cfg.out_len))
            pm = zscore(resample_to(mw, cfg.out_len))
            pp = zscore(resample_to(pw, cfg.out_len))
        except DegenerateSegmentError:
            continue
        ts = sel.start + (r0 + k * r_len) / sel.rate
        label = None if vitals is None else vitals.window_mean(ts, ts + cfg.win_s)
        pairs.append(SegmentPair(radio=pr, ppg=pp, subject_id=radio.subject_id, segment_index=k,
                                 magnitude=pm, vitals=label, t_start=ts))
    if return_lag:
        return pairs, lag_s
    return pairs


def dataset_pairs(dataset, n_ch: int = 16, augment_copies: bool = True, seed: int = 0,
                  cfg: PairConfig | None = None) -> list[SegmentPair]:
    """SegmentPairs for every subject of a loaded dataset, originals first, then noisy copies."""
    cfg = replace(cfg, n_ch=n_ch) if cfg is not None else PairConfig(n_ch=n_ch)
    pairs = []
    for s in dataset.subjects:
        pairs.extend(build_pairs(s.radio, s.ppg, n_ch, vitals=s.vitals, cfg=cfg))
    return augment(pairs, seed=seed) if augment_copies else pairs
