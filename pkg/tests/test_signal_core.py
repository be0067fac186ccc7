import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from edamrd.errors import InvalidInputError, InvalidParameterError
from edamrd.signal_core import (Signal, decompose, design_butterworth, filter_zero_phase,
                                frequency_response, linear_detrend, lowpass_filter, zero_baseline)

from oracles import butterworth_highpass_mag, butterworth_lowpass_mag

FS = 100.0


def rms(v):
    return float(np.sqrt(np.mean(np.square(v))))


def test_signal_validation():
    with pytest.raises(InvalidInputError):
        Signal([], FS)
    with pytest.raises(InvalidInputError):
        Signal([1.0, np.nan], FS)
    with pytest.raises(InvalidInputError):
        Signal([1.0, 2.0], 0.0)
    s = Signal([1, 2, 3], FS)
    assert s.samples.dtype == np.float64 and not s.samples.flags.writeable


def test_butterworth_cutoff_dc_and_10hz():
    spec = design_butterworth(4, 5.0, FS)
    assert abs(abs(frequency_response(spec, [5.0])[0]) - 1 / np.sqrt(2)) < 1e-3
    assert abs(abs(frequency_response(spec, [0.0])[0]) - 1.0) < 1e-9
    h10 = abs(frequency_response(spec, [10.0])[0])
    assert 0.05 <= h10 <= 0.08
    assert abs(h10 - butterworth_lowpass_mag(10.0, 5.0, FS, 4)) < 1e-9


@pytest.mark.parametrize("order", [1, 2, 3, 4, 5, 8])
@pytest.mark.parametrize("fc", [0.05, 1.0, 5.0, 20.0])
def test_response_matches_closed_form(order, fc):
    f = np.linspace(0.0, 49.0, 200)
    spec = design_butterworth(order, fc, FS)
    np.testing.assert_allclose(np.abs(frequency_response(spec, f)),
                               butterworth_lowpass_mag(f, fc, FS, order), atol=1e-8)


def test_highpass_matches_closed_form():
    f = np.linspace(0.5, 49.0, 100)
    spec = design_butterworth(4, 5.0, FS, "highpass")
    np.testing.assert_allclose(np.abs(frequency_response(spec, f)),
                               butterworth_highpass_mag(f, 5.0, FS, 4), atol=1e-8)


def test_sections_stable():
    for fc in (0.05, 0.5, 5.0, 45.0):
        spec = design_butterworth(8, fc, FS)
        for row in spec.sections:
            assert np.all(np.abs(np.roots(row[3:])) < 1.0)


@pytest.mark.parametrize("args", [(4, 50.0, FS), (4, 0.0, FS), (0, 5.0, FS), (9, 5.0, FS), (2.5, 5.0, FS)])
def test_design_rejects_bad_parameters(args):
    with pytest.raises(InvalidParameterError):
        design_butterworth(*args)


def test_zero_phase_constant_and_sinusoids():
    spec = design_butterworth(4, 5.0, FS)
    c = filter_zero_phase(Signal(np.full(1000, 3.7), FS), spec)
    np.testing.assert_allclose(c.samples, 3.7, atol=1e-6)
    t = np.arange(1000) / FS
    # steady state, i.e. away from the padding transients at either edge
    core = slice(100, -100)
    hi = np.sin(2 * np.pi * 20 * t)
    assert rms(filter_zero_phase(Signal(hi, FS), spec).samples[core]) < 0.01 * rms(hi[core])
    lo = np.sin(2 * np.pi * 0.5 * t)
    out = filter_zero_phase(Signal(lo, FS), spec).samples
    assert abs(rms(out) / rms(lo) - 1) < 0.01
    assert abs(rms(out[core]) / rms(lo[core]) - 1) < 0.01


def test_zero_phase_no_lag():
    spec = design_butterworth(4, 5.0, FS)
    t = np.arange(2000) / FS
    x = np.sin(2 * np.pi * 2.0 * t)
    y = filter_zero_phase(Signal(x, FS), spec).samples
    core = slice(200, 1800)
    lags = range(-20, 21)
    corr = [np.dot(x[core], np.roll(y, k)[core]) for k in lags]
    assert list(lags)[int(np.argmax(corr))] == 0


def test_squared_magnitude_in_steady_state():
    spec = design_butterworth(4, 5.0, FS)
    t = np.arange(4000) / FS
    for f in (4.0, 6.0, 8.0):
        x = np.sin(2 * np.pi * f * t)
        y = filter_zero_phase(Signal(x, FS), spec).samples
        gain = rms(y[1000:3000]) / rms(x[1000:3000])
        assert abs(gain - butterworth_lowpass_mag(f, 5.0, FS, 4) ** 2) < 2e-3


def test_zero_phase_too_short():
    spec = design_butterworth(4, 5.0, FS)
    with pytest.raises(InvalidInputError):
        filter_zero_phase(Signal(np.ones(12), FS), spec)


def test_linear_detrend_examples():
    t = np.arange(500) / FS
    np.testing.assert_allclose(linear_detrend(Signal(3 + 2 * t, FS)).samples, 0, atol=1e-9)
    np.testing.assert_array_equal(linear_detrend(Signal(np.zeros(10), FS)).samples, 0)
    t = np.arange(1000) / FS
    s = np.sin(2 * np.pi * t)
    r = linear_detrend(Signal(s + 0.5 * t, FS)).samples
    # closed-form least-squares slope of the residual
    tc = t - t.mean()
    assert abs(np.dot(tc, r - r.mean()) / np.dot(tc, tc)) < 1e-6
    assert np.corrcoef(r, s)[0, 1] > 0.99
    with pytest.raises(InvalidInputError):
        linear_detrend(Signal([1.0], FS))


def test_decompose_constant():
    tonic, phasic = decompose(Signal(np.full(1000, 2.5), FS))
    np.testing.assert_allclose(tonic.samples, 2.5, atol=1e-6)
    np.testing.assert_allclose(phasic.samples, 0, atol=1e-6)


def test_decompose_ramp_plus_sinusoid():
    t = np.arange(1000) / FS
    ramp = t / 10.0
    sine = np.sin(2 * np.pi * 1.0 * t)
    tonic, phasic = decompose(Signal(ramp + sine, FS))
    # least-squares amplitude of the 1 Hz component in the phasic part
    basis = np.stack([np.sin(2 * np.pi * t), np.cos(2 * np.pi * t), np.ones_like(t), t], axis=1)
    coef, *_ = np.linalg.lstsq(basis, phasic.samples, rcond=None)
    assert abs(np.hypot(coef[0], coef[1]) - 1.0) < 0.05


@given(arrays(np.float64, st.integers(200, 1500), elements=st.floats(-50, 50)))
def test_reconstruction_identity(x):
    sig = Signal(x, FS)
    tonic, phasic = decompose(sig)
    assert np.max(np.abs(tonic.samples + phasic.samples - sig.samples)) < 1e-9


def test_zero_baseline_examples():
    np.testing.assert_allclose(zero_baseline(Signal([1, 2, 3], 4.0)).samples, [-1, 0, 1])
    np.testing.assert_array_equal(zero_baseline(Signal(np.zeros(5), FS)).samples, 0)
    lin = zero_baseline(Signal(np.arange(10.0), FS), mode="linear").samples
    np.testing.assert_allclose(lin, 0, atol=1e-9)
    with pytest.raises(InvalidParameterError):
        zero_baseline(Signal([1, 2], FS), mode="median")


@given(arrays(np.float64, st.integers(1, 500), elements=st.floats(-1e3, 1e3)))
def test_zero_baseline_mean(x):
    out = zero_baseline(Signal(x, FS)).samples
    assert abs(out.mean()) < 1e-12 * max(1.0, np.abs(x).max())


def test_lowpass_filter_is_pure():
    x = np.random.default_rng(3).normal(size=1000)
    a = lowpass_filter(Signal(x, FS)).samples
    b = lowpass_filter(Signal(x, FS)).samples
    assert a.tobytes() == b.tobytes()
    t = np.arange(1000) / FS
    tc = t - t.mean()
    assert abs(a.mean()) < 1e-9 and abs(np.dot(tc, a) / np.dot(tc, tc)) < 1e-9
