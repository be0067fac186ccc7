import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.signal import hilbert as scipy_hilbert

from edamrd.errors import DegenerateSignalError, InvalidInputError, InvalidParameterError
from edamrd.signal_core import Signal
from edamrd.tvsymp import (DemodBank, TvsympConfig, analytic_signal, band_envelope, band_reconstruct,
                           cdm_components, downsample, hilbert_envelope, make_bank, tvsymp)

from oracles import butterworth_lowpass_mag

FS_DS = 2.0


def interior(v, frac=0.8):
    n = len(v)
    cut = int(round(n * (1 - frac) / 2))
    return v[cut:n - cut]


def rms(v):
    return float(np.sqrt(np.mean(np.square(v))))


def tone(f, n, fs, phase=0.0):
    return np.cos(2 * np.pi * f * np.arange(n) / fs + phase)


def test_bank_layout():
    bank = make_bank(FS_DS)
    np.testing.assert_allclose(bank.centers, [(2 * w - 1) * 0.04 for w in range(1, 13)])
    assert bank.lp.order == 4 and bank.lp.cutoff_hz == pytest.approx(0.04)
    with pytest.raises(InvalidParameterError):
        make_bank(FS_DS, n_centers=13)  # 1.0 Hz centre reaches Nyquist
    with pytest.raises(InvalidParameterError):
        DemodBank(0.04, (0.2, 0.1), bank.lp)


def test_downsample_examples():
    c = downsample(Signal(np.full(1000, 4.2), 100.0), FS_DS)
    assert c.fs == FS_DS and len(c) == 20
    np.testing.assert_allclose(c.samples, 4.2, atol=1e-6)
    n = 6000
    x = Signal(np.sin(2 * np.pi * 0.1 * np.arange(n) / 100.0), 100.0)
    y = downsample(x, FS_DS)
    expected = butterworth_lowpass_mag(0.1, 0.45 * FS_DS, 100.0, 4) ** 2
    amp = np.sqrt(2) * rms(interior(y.samples))
    assert abs(amp - 1.0) < 0.02 and abs(amp - expected) < 0.02
    with pytest.raises(InvalidParameterError):
        downsample(Signal(np.zeros(1000), 100.0), 3.0)


def test_cdm_tone_at_center():
    n = 400
    bank = make_bank(FS_DS)
    comps = cdm_components(Signal(tone(0.20, n, FS_DS), FS_DS), bank)
    assert len(comps) == 12
    mods = [np.abs(interior(c.samples)) for c in comps]
    w = bank.centers.index(0.2)
    assert np.all(np.abs(mods[w] - 0.5) < 0.05)
    assert all(m.max() < 0.1 for i, m in enumerate(mods) if i != w)


def test_cdm_tone_between_centers():
    n = 400
    bank = make_bank(FS_DS)
    comps = cdm_components(Signal(tone(0.16, n, FS_DS), FS_DS), bank)
    energy = [float(np.mean(np.abs(interior(c.samples)) ** 2)) for c in comps]
    adjacent = energy[1] + energy[2]  # 0.12 and 0.20 Hz
    assert all(adjacent >= 4 * e for i, e in enumerate(energy) if i not in (1, 2))


def test_cdm_zero_and_empty():
    bank = make_bank(FS_DS)
    for c in cdm_components(Signal(np.zeros(100), FS_DS), bank):
        np.testing.assert_array_equal(c.samples, 0)
    with pytest.raises(InvalidParameterError):
        cdm_components(Signal(np.zeros(100), FS_DS), DemodBank(0.04, (), bank.lp))


def test_band_reconstruct_in_and_out_of_band():
    n = 400
    bank = make_bank(FS_DS)
    x = tone(0.16, n, FS_DS)
    rec = band_reconstruct(cdm_components(Signal(x, FS_DS), bank), bank, 0.08, 0.24).samples
    assert np.corrcoef(interior(rec), interior(x))[0, 1] > 0.95
    y = tone(0.5, n, FS_DS)
    rec = band_reconstruct(cdm_components(Signal(y, FS_DS), bank), bank, 0.08, 0.24).samples
    assert rms(rec) < 0.1 * rms(y)
    zeros = [Signal(np.zeros(n, complex), FS_DS) for _ in bank.centers]
    np.testing.assert_array_equal(band_reconstruct(zeros, bank, 0.08, 0.24).samples, 0)
    with pytest.raises(InvalidParameterError, match="0.25"):
        band_reconstruct(zeros, bank, 0.25, 0.27)


def test_analytic_signal_matches_scipy():
    x = np.random.default_rng(5).normal(size=101)
    np.testing.assert_allclose(analytic_signal(x), scipy_hilbert(x), atol=1e-12)
    x = x[:100]
    np.testing.assert_allclose(analytic_signal(x), scipy_hilbert(x), atol=1e-12)


def test_hilbert_envelope_examples():
    n = 200
    env = hilbert_envelope(Signal(tone(0.3, n, FS_DS), FS_DS)).samples
    assert np.all(np.abs(interior(env) - 1.0) < 0.05)
    np.testing.assert_array_equal(hilbert_envelope(Signal(np.zeros(16), FS_DS)).samples, 0)
    with pytest.raises(InvalidInputError):
        hilbert_envelope(Signal([1.0, 2.0, 3.0], FS_DS))


@given(st.floats(0.01, 1e3), st.integers(0, 2**31 - 1))
def test_hilbert_homogeneity(a, seed):
    x = np.random.default_rng(seed).normal(size=64)
    e1 = hilbert_envelope(Signal(a * x, FS_DS)).samples
    e2 = hilbert_envelope(Signal(x, FS_DS)).samples
    np.testing.assert_allclose(e1, a * e2, atol=1e-9 * max(1.0, a))


def _x_pd(seed, n=1000, fs=100.0):
    rng = np.random.default_rng(seed)
    t = np.arange(n) / fs
    x = rng.normal(size=n) * 0.05 + 0.3 * np.sin(2 * np.pi * rng.uniform(0.1, 0.3) * t + rng.uniform(0, 6))
    return Signal(x - x.mean(), fs)


@given(st.integers(0, 10_000))
def test_unit_variance_and_nonnegative(seed):
    out = tvsymp(_x_pd(seed)).samples
    assert abs(out.std() - 1.0) < 1e-6
    assert np.all(out >= 0)


@given(st.integers(0, 10_000), st.floats(1e-3, 1e3))
def test_positive_scale_invariance(seed, a):
    x = _x_pd(seed)
    np.testing.assert_allclose(tvsymp(Signal(a * x.samples, x.fs)).samples, tvsymp(x).samples, atol=1e-6)


def test_tone_pair_tracks_in_band_envelope():
    n = 6000
    fs = 100.0
    t = np.arange(n) / fs
    inband = np.cos(2 * np.pi * 0.16 * t) * (1 + 0.5 * np.sin(2 * np.pi * 0.02 * t))
    x = inband + np.cos(2 * np.pi * 0.6 * t)
    out = tvsymp(Signal(x, fs)).samples
    ref = band_envelope(Signal(inband, fs)).samples
    assert np.corrcoef(interior(out), interior(ref))[0, 1] > 0.9


def test_band_selectivity_ratio():
    n, fs = 1000, 100.0
    t = np.arange(n) / fs
    e_in = band_envelope(Signal(np.cos(2 * np.pi * 0.16 * t), fs)).samples
    e_out = band_envelope(Signal(np.cos(2 * np.pi * 0.6 * t), fs)).samples
    assert rms(e_in) >= 5 * rms(e_out)


def test_degenerate_envelope():
    with pytest.raises(DegenerateSignalError):
        tvsymp(Signal(np.zeros(1000), 100.0))


def test_config_passthrough():
    x = _x_pd(1)
    assert len(tvsymp(x, TvsympConfig(fs_ds=4.0))) == 40
