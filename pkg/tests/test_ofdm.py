import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from radio_twin.ofdm import (OfdmConfig, SingularEstimateError, add_cyclic_prefix, apply_channel,
                             estimate_cfr_stream, ls_estimate, map_qpsk, ofdm_demodulate, ofdm_modulate,
                             remove_cyclic_prefix, training_symbols)

from . import oracles

CFG = OfdmConfig()
N = CFG.n_subcarriers


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_config_defaults():
    assert CFG.symbol_rate() == 250.0
    np.testing.assert_array_equal(CFG.pilot_indices(), np.arange(0, 60, 5))
    with pytest.raises(ValueError):
        OfdmConfig(n_data=50)
    with pytest.raises(ValueError):
        OfdmConfig(cp_len=64)


def test_qpsk_map():
    assert map_qpsk([0, 0])[0] == pytest.approx((1 + 1j) / np.sqrt(2))
    assert map_qpsk([1, 1])[0] == pytest.approx((-1 - 1j) / np.sqrt(2))
    assert map_qpsk([0, 1])[0] == pytest.approx((-1 + 1j) / np.sqrt(2))
    assert map_qpsk([1, 0])[0] == pytest.approx((1 - 1j) / np.sqrt(2))
    s = map_qpsk(np.random.default_rng(0).integers(0, 2, 128))
    assert s.size == 64
    np.testing.assert_allclose(np.abs(s), 1.0, atol=1e-15)
    with pytest.raises(ValueError):
        map_qpsk([0, 1, 1])
    with pytest.raises(ValueError):
        map_qpsk([0, 2])


def test_modulate_examples():
    d = np.zeros(N, complex)
    d[0] = 1
    np.testing.assert_allclose(ofdm_modulate(d), np.full(N, 1 / 64))
    assert np.all(ofdm_modulate(np.zeros(N)) == 0)
    with pytest.raises(ValueError):
        ofdm_modulate(np.zeros(N - 1))
    with pytest.raises(ValueError):
        ofdm_modulate(np.full(N, np.nan))


def test_demodulate_examples():
    Y = ofdm_demodulate(np.full(N, 0.5 - 2j))
    assert Y[0] == pytest.approx(N * (0.5 - 2j))
    np.testing.assert_allclose(Y[1:], 0, atol=1e-12)
    e1 = np.zeros(N)
    e1[1] = 1
    np.testing.assert_allclose(ofdm_demodulate(ofdm_modulate(e1)), e1, atol=1e-12)


def test_against_direct_dft(rng):
    d = crandn(rng, N)
    np.testing.assert_allclose(ofdm_modulate(d), oracles.idft(d), atol=1e-12)
    y = crandn(rng, N)
    np.testing.assert_allclose(ofdm_demodulate(y), oracles.dft(y), atol=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_round_trip_and_parseval(seed):
    rng = np.random.default_rng(seed)
    d = crandn(rng, N) * rng.uniform(0.01, 100)
    x = ofdm_modulate(d)
    np.testing.assert_allclose(ofdm_demodulate(x), d, atol=1e-12 * max(1, np.abs(d).max()))
    assert np.sum(np.abs(x) ** 2) == pytest.approx(np.sum(np.abs(d) ** 2) / N, rel=1e-10)


def test_cyclic_prefix():
    small = OfdmConfig(n_subcarriers=4, n_data=2, n_pilot=2, cp_len=2)
    np.testing.assert_array_equal(add_cyclic_prefix([1, 2, 3, 4], small), [3, 4, 1, 2, 3, 4])
    no_cp = OfdmConfig(cp_len=0)
    x = np.arange(N, dtype=complex)
    np.testing.assert_array_equal(add_cyclic_prefix(x, no_cp), x)
    out = add_cyclic_prefix(x)
    assert out.size == 80
    np.testing.assert_array_equal(out[:16], out[64:80])
    np.testing.assert_array_equal(remove_cyclic_prefix(out), x)


def test_channel_identity_and_phase(rng):
    d = training_symbols(1)[0]
    tx = add_cyclic_prefix(ofdm_modulate(d))
    rx = apply_channel(tx, np.ones(N))
    np.testing.assert_allclose(ofdm_demodulate(remove_cyclic_prefix(rx)), d, atol=1e-12)
    phi = 0.7
    rx = apply_channel(tx, np.full(N, np.exp(1j * phi)))
    np.testing.assert_allclose(ofdm_demodulate(remove_cyclic_prefix(rx)), d * np.exp(1j * phi), atol=1e-12)


def test_channel_noise_deterministic_and_scaled():
    tx = np.zeros((4000, N), complex)
    a = apply_channel(tx, np.ones(N), noise_var=0.01, seed=3)
    b = apply_channel(tx, np.ones(N), noise_var=0.01, seed=3)
    assert np.array_equal(a, b)
    assert np.var(a.real) == pytest.approx(0.005, rel=0.03)
    assert np.var(a.imag) == pytest.approx(0.005, rel=0.03)
    with pytest.raises(ValueError):
        apply_channel(tx, np.ones(N), noise_var=-1)


def test_ls_noiseless_and_symmetric(rng):
    h = crandn(rng, N)
    d = training_symbols(1, seed=5)
    frame = ls_estimate(d, h * d, symbol_index=10)
    np.testing.assert_allclose(frame.h, h, atol=1e-12)
    assert frame.timestamp == pytest.approx(10 / 250)
    eps = 0.3 * crandn(rng, N)
    y = np.stack([h * d[0] + eps, h * d[0] - eps])
    np.testing.assert_allclose(ls_estimate(np.stack([d[0], d[0]]), y).h, h, atol=1e-12)


def test_ls_matches_normal_equations(rng):
    h = crandn(rng, N)
    d = training_symbols(8, seed=9)
    y = h * d + 0.1 * crandn(rng, 8, N)
    got = ls_estimate(d, y).h
    for k in range(N):
        a = d[:, k:k + 1]
        sol = np.linalg.solve(a.conj().T @ a, a.conj().T @ y[:, k])
        assert abs(got[k] - sol[0]) < 1e-10


def test_ls_singular_names_subcarrier():
    d = training_symbols(2)
    d[:, 17] = 0
    with pytest.raises(SingularEstimateError) as ei:
        ls_estimate(d, d)
    assert ei.value.subcarrier == 17


def test_ls_error_shrinks_with_observations():
    rng = np.random.default_rng(11)
    h = crandn(rng, N)
    rms = []
    for m in (1, 2, 4, 8):
        errs = []
        for trial in range(100):
            d = training_symbols(m, seed=1000 * m + trial)
            y = h * d + np.sqrt(0.05) * crandn(rng, m, N) / np.sqrt(2)
            errs.append(np.mean(np.abs(ls_estimate(d, y).h - h) ** 2))
        rms.append(np.sqrt(np.mean(errs)))
    assert all(a > b for a, b in zip(rms, rms[1:]))
    # error variance scales as 1/m
    assert rms[0] / rms[3] == pytest.approx(np.sqrt(8), rel=0.1)


def test_cfr_stream_noiseless(rng):
    h = crandn(rng, 5, N)
    np.testing.assert_allclose(estimate_cfr_stream(h), h, atol=1e-9)
