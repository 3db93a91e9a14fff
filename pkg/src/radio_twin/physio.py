"""Synthetic subjects: reference PPG, vitals, chest motion and the CFR it imprints.

The waveform model is analytic in time, so the same subject can be
rendered at the 200 Hz PPG rate and at the 250 Hz CFR rate from one beat
schedule. A per-subject acquisition lag is applied to the reference PPG
only, mimicking the offset between the two recording chains.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .ofdm import OfdmConfig, estimate_cfr_stream, CfrFrame


@dataclass(frozen=True)
class SubjectProfile:
    subject_id: str
    hr: float = 70.0
    rr: float = 15.0
    spo2: float = 97.0
    pulse_shape: tuple = (0.1, 0.3, 0.4)  # systolic width s, dicrotic delay s, dicrotic/systolic amplitude
    hr_jitter: float = 0.02
    resp_am: float = 0.1    # fractional pulse-amplitude modulation by breathing
    resp_bm: float = 0.15   # additive baseline swing, same units as the pulse peak
    rsa: float = 0.05       # respiratory sinus arrhythmia, fractional IBI swing

    def __post_init__(self):
        if not 50 <= self.hr <= 110:
            raise ValueError(f"hr {self.hr} outside [50, 110]")
        if not 10 <= self.rr <= 25:
            raise ValueError(f"rr {self.rr} outside [10, 25]")
        if not 90 <= self.spo2 <= 100:
            raise ValueError(f"spo2 {self.spo2} outside [90, 100]")
        width, delay, ratio = self.pulse_shape
        if width <= 0 or delay < 0 or not 0 <= ratio < 1:
            raise ValueError(f"bad pulse_shape {self.pulse_shape}")
        if self.hr_jitter < 0:
            raise ValueError("hr_jitter must be >= 0")


@dataclass
class PpgRecording:
    samples: np.ndarray
    rate: float = 200.0
    start: float = 0.0

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.rate <= 0:
            raise ValueError("rate must be positive")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("PPG samples must be finite")

    @property
    def duration(self) -> float:
        return self.samples.size / self.rate

    def times(self) -> np.ndarray:
        return self.start + np.arange(self.samples.size) / self.rate


@dataclass
class VitalsRecord:
    """Per-second labels; fields are parallel arrays."""

    timestamp: np.ndarray
    hr: np.ndarray
    spo2: np.ndarray
    rr: np.ndarray

    def __post_init__(self):
        for name in ("timestamp", "hr", "spo2", "rr"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        if np.any(self.hr <= 0) or np.any(self.rr <= 0) or np.any(self.spo2 <= 0):
            raise ValueError("vitals must be positive")
        if np.any(self.spo2 > 100):
            raise ValueError("spo2 above 100%")

    def __len__(self):
        return self.timestamp.size

    def window_mean(self, t0: float, t1: float) -> np.ndarray:
        """Mean (hr, spo2, rr) over records with t0 <= timestamp < t1."""
        m = (self.timestamp >= t0) & (self.timestamp < t1)
        if not m.any():
            m = np.abs(self.timestamp - 0.5 * (t0 + t1)) == np.min(np.abs(self.timestamp - 0.5 * (t0 + t1)))
        return np.array([self.hr[m].mean(), self.spo2[m].mean(), self.rr[m].mean()])


@dataclass
class RadioRecording:
    cfr: np.ndarray                       # (frames, n_subcarriers) complex
    rate: float = 250.0
    subject_id: str = ""
    channels: np.ndarray | None = None    # original subcarrier indices of the columns
    start: float = 0.0

    def __post_init__(self):
        self.cfr = np.asarray(self.cfr, dtype=np.complex128)
        if self.cfr.ndim != 2:
            raise ValueError("cfr must be (frames, subcarriers)")
        if self.channels is None:
            self.channels = np.arange(self.cfr.shape[1])

    @property
    def n_frames(self) -> int:
        return self.cfr.shape[0]

    @property
    def duration(self) -> float:
        return self.n_frames / self.rate

    @property
    def frames(self) -> list[CfrFrame]:
        return [CfrFrame(h=row, symbol_index=i, timestamp=self.start + i / self.rate)
                for i, row in enumerate(self.cfr)]


_SCHEDULE_ORIGIN = -5.0


def beat_times(profile: SubjectProfile, t_end: float, seed: int) -> np.ndarray:
    """Beat onsets from a fixed origin before t=0 up to past ``t_end``.

    The origin is fixed so that windows with different start offsets see
    the same beats for the same seed.
    """
    rng = np.random.default_rng(seed)
    mean_ibi = 60.0 / profile.hr
    n = int(np.ceil((t_end - _SCHEDULE_ORIGIN + 2.0) / (0.5 * mean_ibi))) + 2
    noise = profile.hr_jitter * rng.standard_normal(n)
    f_resp = profile.rr / 60.0
    onsets = np.empty(n)
    t = _SCHEDULE_ORIGIN
    for i in range(n):
        onsets[i] = t
        # intervals shorten during inspiration (rising chest)
        ibi = mean_ibi * (1.0 + noise[i] - profile.rsa * np.sin(2 * np.pi * f_resp * t))
        t += float(np.clip(ibi, 0.5 * mean_ibi, 1.5 * mean_ibi))
    return onsets[onsets <= t_end + 2.0]


def _pulse_train(t: np.ndarray, onsets: np.ndarray, profile: SubjectProfile) -> np.ndarray:
    width, delay, ratio = profile.pulse_shape
    peak_offset = 2.0 * width
    out = np.zeros_like(t)
    for t_b in onsets:
        c = t_b + peak_offset
        lo, hi = np.searchsorted(t, [c - 6 * width, c + delay + 6 * width])
        if hi <= lo:
            continue
        tt = t[lo:hi]
        out[lo:hi] += np.exp(-0.5 * ((tt - c) / width) ** 2)
        if ratio > 0:
            out[lo:hi] += ratio * np.exp(-0.5 * ((tt - c - delay) / width) ** 2)
    return out


def synth_ppg(profile: SubjectProfile, duration: float, rate: float = 200.0, seed: int = 0,
              start: float = 0.0) -> PpgRecording:
    """Quasi-periodic double-Gaussian pulse train with respiratory modulation.

    ``start`` shifts the sampling grid: sample ``n`` is taken at absolute
    time ``start + n / rate`` against a beat schedule fixed by ``seed``.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    n = int(round(duration * rate))
    t = start + np.arange(n) / rate
    onsets = beat_times(profile, start + duration, seed)
    pulses = _pulse_train(t, onsets, profile)
    resp = np.sin(2 * np.pi * profile.rr / 60.0 * t)
    samples = (1.0 + profile.resp_am * resp) * pulses + profile.resp_bm * resp
    return PpgRecording(samples=samples, rate=rate, start=start)


def synth_vitals(profile: SubjectProfile, duration: float, seed: int) -> VitalsRecord:
    """1 Hz labels. HR is 60 over the mean beat interval of beats starting in each second."""
    onsets = beat_times(profile, duration, seed)
    ibi = np.diff(onsets)
    starts = onsets[:-1]
    secs = np.arange(int(np.floor(duration)))
    hr = np.empty(secs.size)
    for i, s in enumerate(secs):
        m = (starts >= s) & (starts < s + 1)
        if not m.any():
            m = np.zeros_like(m)
            m[np.searchsorted(starts, s, side="right") - 1] = True
        hr[i] = 60.0 / ibi[m].mean()
    rng = np.random.default_rng([seed, 1])
    spo2 = np.clip(profile.spo2 + 0.3 * rng.standard_normal(secs.size), 0, 100.0)
    rr = profile.rr + 0.3 * rng.standard_normal(secs.size)
    return VitalsRecord(timestamp=secs.astype(float), hr=hr, spo2=spo2, rr=rr)


def chest_displacement(ppg: PpgRecording, rr: float, amp_cardiac: float = 0.3e-3,
                       amp_resp: float = 4e-3) -> np.ndarray:
    """Chest surface displacement in meters, sampled on the PPG's grid."""
    if amp_cardiac < 0 or amp_resp < 0:
        raise ValueError("amplitudes must be non-negative")
    t = ppg.times()
    centered = ppg.samples - ppg.samples.mean()
    peak = np.max(np.abs(centered))
    normalized = centered / peak if peak > 0 else np.zeros_like(centered)
    return amp_resp * np.sin(2 * np.pi * rr / 60.0 * t) + amp_cardiac * normalized


def modulate_cfr(d, cfg: OfdmConfig = OfdmConfig(), clutter=None, reflect_amp=None,
                 noise_var: float = 0.0, seed: int = 0, subject_id: str = "",
                 via_link: bool = False) -> RadioRecording:
    """h_k(t) = clutter_k + reflect_k exp(j 4 pi d(t) / lambda_k) + noise.

    With ``via_link`` the noiseless channel is instead pushed through the
    OFDM transceiver one training symbol per frame, so the noise is what
    the LS estimator leaves behind (time-domain AWGN of ``noise_var``).
    """
    d = np.asarray(d, dtype=float)
    n = cfg.n_subcarriers
    clutter = np.ones(n, complex) if clutter is None else np.asarray(clutter, complex)
    reflect_amp = np.ones(n, complex) if reflect_amp is None else np.asarray(reflect_amp, complex)
    if clutter.shape != (n,) or reflect_amp.shape != (n,):
        raise ValueError(f"clutter and reflect_amp must have length {n}")
    lam = cfg.wavelengths()
    h = clutter + reflect_amp * np.exp(1j * 4 * np.pi * d[:, None] / lam[None, :])
    if via_link:
        h = estimate_cfr_stream(h, noise_var=noise_var, cfg=cfg, seed=seed)
    elif noise_var > 0:
        rng = np.random.default_rng(seed)
        s = np.sqrt(noise_var / 2.0)
        h = h + s * (rng.standard_normal(h.shape) + 1j * rng.standard_normal(h.shape))
    return RadioRecording(cfr=h, rate=cfg.symbol_rate(), subject_id=subject_id)


@dataclass
class SimSettings:
    amp_cardiac: float = 0.3e-3
    amp_resp: float = 4e-3
    noise_var: float = 2e-4
    max_lag_s: float = 0.3
    via_link: bool = False
    ppg_rate: float = 200.0


@dataclass
class Subject:
    profile: SubjectProfile
    radio: RadioRecording
    ppg: PpgRecording
    vitals: VitalsRecord
    lag_s: float = 0.0
    meta: dict = field(default_factory=dict)


def draw_profile(subject_id: str, rng: np.random.Generator) -> SubjectProfile:
    return SubjectProfile(
        subject_id=subject_id,
        hr=float(rng.uniform(55, 100)),
        rr=float(rng.uniform(12, 22)),
        spo2=float(rng.uniform(94, 99.5)),
        pulse_shape=(float(rng.uniform(0.08, 0.12)), float(rng.uniform(0.22, 0.3)),
                     float(rng.uniform(0.25, 0.6))),
        hr_jitter=float(rng.uniform(0.01, 0.04)),
    )


def simulate_subject(index: int, duration: float, seed: int, settings: SimSettings = SimSettings(),
                     cfg: OfdmConfig = OfdmConfig(), lag_s: float | None = None) -> Subject:
    """One synthetic subject. Every random draw derives from ``seed + index``."""
    sub_seed = seed + index
    rng = np.random.default_rng([sub_seed, 0])
    profile = draw_profile(f"S{index + 1:02d}", rng)
    clutter = np.exp(1j * rng.uniform(0, 2 * np.pi, cfg.n_subcarriers))
    reflect = np.exp(1j * rng.uniform(0, 2 * np.pi, cfg.n_subcarriers))
    if lag_s is None:
        lag_s = float(rng.uniform(-settings.max_lag_s, settings.max_lag_s))
    beat_seed = int(rng.integers(2**31))
    fast = synth_ppg(profile, duration, cfg.symbol_rate(), seed=beat_seed)
    disp = chest_displacement(fast, profile.rr, settings.amp_cardiac, settings.amp_resp)
    radio = modulate_cfr(disp, cfg, clutter, reflect, settings.noise_var,
                         seed=int(rng.integers(2**31)), subject_id=profile.subject_id,
                         via_link=settings.via_link)
    # reference sensor runs late by lag_s: its sample n shows the pulse at n/rate - lag_s
    ref = synth_ppg(profile, duration, settings.ppg_rate, seed=beat_seed, start=-lag_s)
    ref = PpgRecording(samples=ref.samples, rate=ref.rate, start=0.0)
    vitals = synth_vitals(profile, duration, beat_seed)
    meta = {"profile": asdict(profile), "lag_s": lag_s,
            "clutter": [[float(c.real), float(c.imag)] for c in clutter],
            "reflect_amp": [[float(c.real), float(c.imag)] for c in reflect]}
    return Subject(profile, radio, ref, vitals, lag_s, meta)


def generate_cohort(out_dir, n_subjects: int, duration: float, seed: int,
                    settings: SimSettings = SimSettings(), cfg: OfdmConfig = OfdmConfig()):
    """Simulate ``n_subjects`` and write them in the on-disk dataset format."""
    from .dataset import write_dataset

    if n_subjects < 2:
        raise ValueError("a cohort needs at least 2 subjects")
    subjects = [simulate_subject(i, duration, seed, settings, cfg) for i in range(n_subjects)]
    extra = {"generator": "radio_twin.physio", "seed": seed, "duration_s": duration,
             "settings": asdict(settings)}
    return write_dataset(out_dir, subjects, extra=extra)
