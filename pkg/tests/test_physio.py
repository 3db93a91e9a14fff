import numpy as np
import pytest
from scipy.signal import find_peaks

from radio_twin.ofdm import OfdmConfig
from radio_twin.physio import (PpgRecording, SimSettings, SubjectProfile, chest_displacement, modulate_cfr,
                               simulate_subject, synth_ppg, synth_vitals, beat_times)

CFG = OfdmConfig()


def steady(**kw):
    base = dict(subject_id="T", hr=60.0, hr_jitter=0.0, rsa=0.0, resp_am=0.0, resp_bm=0.0)
    base.update(kw)
    return SubjectProfile(**base)


def test_profile_ranges():
    with pytest.raises(ValueError):
        SubjectProfile("x", hr=120)
    with pytest.raises(ValueError):
        SubjectProfile("x", spo2=101)
    with pytest.raises(ValueError):
        SubjectProfile("x", pulse_shape=(0.1, 0.3, 1.0))


def test_peak_spacing_one_second():
    rec = synth_ppg(steady(), 10.0, 200.0, seed=1)
    peaks, _ = find_peaks(rec.samples, prominence=0.5)
    assert np.all(np.abs(np.diff(peaks) - 200) <= 1)


def test_no_dicrotic_single_maximum():
    rec = synth_ppg(steady(pulse_shape=(0.1, 0.3, 0.0)), 10.0, 200.0, seed=1)
    x = rec.samples
    local_max = np.flatnonzero((x[1:-1] > x[:-2]) & (x[1:-1] >= x[2:])) + 1
    onsets = beat_times(steady(), 10.0, 1)
    per_beat = [np.sum((local_max / 200 >= t) & (local_max / 200 < t + 1)) for t in onsets if 0 <= t <= 8.5]
    assert per_beat and all(c == 1 for c in per_beat)


def test_ppg_deterministic():
    p = SubjectProfile("x")
    assert np.array_equal(synth_ppg(p, 5, seed=3).samples, synth_ppg(p, 5, seed=3).samples)
    assert not np.array_equal(synth_ppg(p, 5, seed=3).samples, synth_ppg(p, 5, seed=4).samples)
    with pytest.raises(ValueError):
        synth_ppg(p, 0)


def test_displacement():
    ppg = synth_ppg(SubjectProfile("x"), 20, seed=0)
    assert np.all(chest_displacement(ppg, 15, 0, 0) == 0)
    d = chest_displacement(ppg, 15, amp_cardiac=0.0, amp_resp=2e-3)
    np.testing.assert_allclose(d, 2e-3 * np.sin(2 * np.pi * 0.25 * ppg.times()), atol=1e-15)
    d = chest_displacement(ppg, 15)
    assert np.max(np.abs(d)) <= 4e-3 + 0.3e-3 + 1e-15
    with pytest.raises(ValueError):
        chest_displacement(ppg, 15, amp_cardiac=-1)


def test_modulate_static_and_periodic(rng):
    clutter = np.exp(1j * rng.uniform(0, 6, 64))
    refl = 0.5 * np.exp(1j * rng.uniform(0, 6, 64))
    rec = modulate_cfr(np.zeros(30), CFG, clutter, refl)
    np.testing.assert_allclose(rec.cfr, np.broadcast_to(clutter + refl, (30, 64)), atol=1e-15)
    assert rec.rate == 250.0
    lam = CFG.wavelengths()
    rec = modulate_cfr(np.array([0.0, lam[5] / 2]), CFG, clutter, refl)
    assert abs(rec.cfr[1, 5] - rec.cfr[0, 5]) < 1e-12


def test_phase_inversion():
    t = np.arange(2500) / 250
    d = 4e-3 * np.sin(2 * np.pi * 0.3 * t)
    clutter = np.full(64, 0.3 + 0.2j)
    rec = modulate_cfr(d, CFG, clutter, np.ones(64))
    lam = CFG.wavelengths()
    for k in (0, 31, 63):
        ph = np.unwrap(np.angle(rec.cfr[:, k] - clutter[k]))
        np.testing.assert_allclose(ph - ph[0], 4 * np.pi * (d - d[0]) / lam[k], atol=1e-9)


def test_modulate_length_checked():
    with pytest.raises(ValueError):
        modulate_cfr(np.zeros(3), CFG, np.ones(10), np.ones(64))


def test_vitals_per_second_rate():
    p = SubjectProfile("x", hr=72, hr_jitter=0.0, rsa=0.0)
    v = synth_vitals(p, 120, seed=2)
    assert len(v) == 120
    np.testing.assert_allclose(v.hr, 72.0, rtol=1e-9)


def test_magnitude_spectrum_peaks():
    sub = simulate_subject(0, 60.0, seed=3, settings=SimSettings(noise_var=0.0))
    prof = sub.profile
    mag = np.abs(sub.radio.cfr[:, 10])
    spec = np.abs(np.fft.rfft(mag - mag.mean()))
    f = np.fft.rfftfreq(mag.size, 1 / 250)
    for target in (prof.rr / 60, prof.hr / 60):
        band = (f > target - 0.1) & (f < target + 0.1)
        assert spec[band].max() > 5 * np.median(spec[(f > 0.05) & (f < 10)])


def test_subject_shapes():
    sub = simulate_subject(1, 20.0, seed=5)
    assert sub.radio.cfr.shape == (5000, 64)
    assert sub.ppg.samples.size == 4000
    assert len(sub.vitals) == 20
    assert -0.3 <= sub.lag_s <= 0.3
