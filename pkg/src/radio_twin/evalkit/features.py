"""Second-derivative PPG (SDPPG) fiducials and the aging index."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

log = logging.getLogger(__name__)

FIDUCIALS = ("a", "b", "c", "d", "e")
INTERVALS = ("t_ab", "t_bc", "t_cd", "t_de")


class BeatPairingError(ValueError):
    pass


@dataclass(frozen=True)
class FiducialSet:
    indices: tuple          # sample indices of a..e in the analysed signal
    amplitudes: tuple       # SDPPG values at those indices
    rate: float

    @property
    def intervals(self) -> dict[str, float]:
        i = self.indices
        return {name: (i[k + 1] - i[k]) / self.rate for k, name in enumerate(INTERVALS)}

    @property
    def agi(self) -> float:
        return aging_index(*self.amplitudes)

    def as_dict(self) -> dict:
        out = {f"{n}_idx": int(i) for n, i in zip(FIDUCIALS, self.indices)}
        out.update({n: float(a) for n, a in zip(FIDUCIALS, self.amplitudes)})
        out.update(self.intervals)
        out["agi"] = self.agi
        return out


def aging_index(a: float, b: float, c: float, d: float, e: float) -> float:
    """AGI = (b - c - d - e) / a, on signed SDPPG amplitudes."""
    if a == 0:
        raise ValueError("aging index undefined for a == 0")
    return (b - c - d - e) / a


def sdppg(ppg, rate: float, smooth: int = 5) -> np.ndarray:
    """Moving-average smoothing, then two central differences (units: per s^2)."""
    x = np.asarray(ppg, dtype=float)
    if smooth > 1:
        k = np.ones(smooth) / smooth
        x = np.convolve(np.pad(x, smooth // 2, mode="edge"), k, mode="valid")
    dt = 1.0 / rate
    return np.gradient(np.gradient(x, dt), dt)


def _beats(x: np.ndarray, rate: float) -> list[tuple[int, int, int]]:
    """(onset, systolic peak, next onset) for every complete beat.

    Onsets are the troughs between consecutive systolic peaks.
    """
    peaks, _ = find_peaks(x, distance=max(1, int(0.33 * rate)), prominence=0.3 * np.std(x))
    onsets = [p0 + int(np.argmin(x[p0:p1 + 1])) for p0, p1 in zip(peaks[:-1], peaks[1:])]
    out = []
    for on, nxt in zip(onsets[:-1], onsets[1:]):
        out.append((on, on + int(np.argmax(x[on:nxt + 1])), nxt))
    return out


def _local_ext(s: np.ndarray, start: int, stop: int, kind: str) -> int | None:
    for i in range(max(start, 1), min(stop, s.size - 1)):
        if kind == "min" and s[i] < s[i - 1] and s[i] <= s[i + 1]:
            return i
        if kind == "max" and s[i] > s[i - 1] and s[i] >= s[i + 1]:
            return i
    return None


def sdppg_features(ppg, rate: float, smooth: int = 5) -> list[FiducialSet]:
    """One FiducialSet per complete beat with a full a-e sequence.

    a is the SDPPG maximum between beat onset and systolic peak; b, c, d, e
    are the alternating local min/max/min/max that follow it before the next
    onset. Beats missing any point are skipped.
    """
    x = np.asarray(ppg, dtype=float)
    s = sdppg(x, rate, smooth)
    found = []
    beats = _beats(x, rate)
    for on, pk, nxt in beats:
        if pk <= on:
            continue
        ia = on + int(np.argmax(s[on:pk + 1]))
        idx = [ia]
        for kind in ("min", "max", "min", "max"):
            j = _local_ext(s, idx[-1] + 1, nxt, kind)
            if j is None:
                break
            idx.append(j)
        if len(idx) == 5 and s[ia] != 0:
            found.append(FiducialSet(tuple(int(i) for i in idx), tuple(float(s[i]) for i in idx), float(rate)))
    if not found:
        log.info("sdppg_features: no beat with a complete a-e sequence (%d candidate beats)", len(beats))
    return found


def feature_agreement(ref_ppg, twin_ppg, rate: float, smooth: int = 5) -> list[dict]:
    """Match beats by the time of their ``a`` point and difference their intervals and AGI.

    Returns one dict per matched beat with ``d_<feature>`` (twin - ref) and
    ``r_<feature>`` (relative to |ref|, NaN where ref is 0).
    """
    ref = sdppg_features(ref_ppg, rate, smooth)
    twin = sdppg_features(twin_ppg, rate, smooth)
    if abs(len(ref) - len(twin)) > 1:
        raise BeatPairingError(f"beat counts differ by more than one: reference {len(ref)}, twin {len(twin)}")
    rows = []
    used = set()
    for r in ref:
        best, gap = None, None
        for j, t in enumerate(twin):
            g = abs(t.indices[0] - r.indices[0])
            if j not in used and (gap is None or g < gap):
                best, gap = j, g
        if best is None or gap > 0.5 * (r.indices[4] - r.indices[0] + 1) + 0.25 * rate:
            continue
        used.add(best)
        t = twin[best]
        row = {"ref_a_idx": r.indices[0], "twin_a_idx": t.indices[0]}
        fr = {**r.intervals, "agi": r.agi}
        ft = {**t.intervals, "agi": t.agi}
        for name in (*INTERVALS, "agi"):
            diff = ft[name] - fr[name]
            row[f"d_{name}"] = diff
            row[f"r_{name}"] = diff / abs(fr[name]) if fr[name] != 0 else float("nan")
        rows.append(row)
    return rows
