"""
Filtering, detrending and tonic/phasic decomposition of raw EDA windows.

Pipeline used downstream:

    raw --(LP 5 Hz, 4th order, zero-phase)--> linear detrend --> filtered
    filtered --(LP 0.05 Hz)--> tonic ; phasic = filtered - tonic
    phasic - mean(phasic) --> detrend (zero-baseline phasic)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .errors import InvalidInputError, InvalidParameterError

MAX_ORDER = 8


@dataclass(frozen=True, eq=False)
class Signal:
    """Uniformly sampled time series.

    ``samples`` is stored as a read-only float64 (or complex128) array.
    """

    samples: np.ndarray
    fs: float

    def __post_init__(self):
        arr = np.asarray(self.samples)
        arr = arr.astype(np.complex128 if np.iscomplexobj(arr) else np.float64, copy=True)
        if arr.ndim != 1 or arr.size == 0:
            raise InvalidInputError("signal samples must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("signal samples must all be finite")
        fs = float(self.fs)
        if not np.isfinite(fs) or fs <= 0:
            raise InvalidInputError(f"sampling rate must be positive, got {self.fs!r}")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "fs", fs)

    def __len__(self):
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.fs

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.fs

    def replace(self, samples) -> "Signal":
        return Signal(samples, self.fs)


@dataclass(frozen=True, eq=False)
class FilterSpec:
    """Butterworth filter realised as cascaded second-order sections.

    ``sections`` has one row per biquad in the layout
    ``(b0, b1, b2, 1, a1, a2)``.
    """

    sections: np.ndarray
    kind: str
    cutoff_hz: float
    order: int
    fs: float

    @property
    def n_sections(self) -> int:
        return self.sections.shape[0]

    @property
    def padlen(self) -> int:
        # reflective padding: 3 samples per filter state, 2 states per biquad
        return 3 * 2 * self.n_sections


def design_butterworth(order: int, cutoff_hz: float, fs: float, kind: str = "lowpass") -> FilterSpec:
    """Design a digital Butterworth filter (bilinear transform, pre-warped)."""
    if kind not in ("lowpass", "highpass"):
        raise InvalidParameterError(f"unknown filter kind {kind!r}")
    if int(order) != order or not 1 <= order <= MAX_ORDER:
        raise InvalidParameterError(f"filter order must be an integer in 1..{MAX_ORDER}, got {order!r}")
    if not fs > 0:
        raise InvalidParameterError(f"sampling rate must be positive, got {fs!r}")
    if not 0 < cutoff_hz < fs / 2:
        raise InvalidParameterError(
            f"cutoff {cutoff_hz} Hz must lie strictly between 0 and Nyquist ({fs / 2} Hz)"
        )
    sos = sps.butter(int(order), cutoff_hz, btype=kind, fs=fs, output="sos")
    poles = np.concatenate([np.roots(s[3:]) for s in sos])
    if np.any(np.abs(poles) >= 1.0):
        raise InvalidParameterError("designed filter is unstable at this cutoff/sampling rate")
    return FilterSpec(sections=sos, kind=kind, cutoff_hz=float(cutoff_hz), order=int(order), fs=float(fs))


def frequency_response(spec: FilterSpec, freqs_hz) -> np.ndarray:
    """Complex single-pass response of ``spec`` at the given frequencies."""
    z = np.exp(1j * 2 * np.pi * np.asarray(freqs_hz, dtype=float) / spec.fs)
    h = np.ones_like(z)
    for b0, b1, b2, a0, a1, a2 in spec.sections:
        h = h * (b0 + b1 / z + b2 / z**2) / (a0 + a1 / z + a2 / z**2)
    return h


def filter_zero_phase(x: Signal, spec: FilterSpec, padtype: str = "even") -> Signal:
    """Forward-backward application of ``spec`` with mirrored edge padding.

    The effective magnitude response is ``|H(f)|**2``; phase is zero.
    Complex signals are filtered component-wise. ``padtype="even"`` mirrors
    the samples about each end; ``"odd"`` reflects them through the end
    value instead, which injects the edge value as a DC offset into
    demodulated (rotating) signals.
    """
    if padtype not in ("even", "odd", "constant"):
        raise InvalidParameterError(f"unknown padding type {padtype!r}")
    if not np.isclose(spec.fs, x.fs):
        raise InvalidParameterError(f"filter designed for fs={spec.fs} applied to signal at fs={x.fs}")
    padlen = spec.padlen
    if len(x) <= max(padlen, 3 * spec.order):
        raise InvalidInputError(
            f"signal of {len(x)} samples is too short for a {spec.order}th-order zero-phase filter"
        )
    if np.iscomplexobj(x.samples):
        re = sps.sosfiltfilt(spec.sections, x.samples.real, padtype=padtype, padlen=padlen)
        im = sps.sosfiltfilt(spec.sections, x.samples.imag, padtype=padtype, padlen=padlen)
        return x.replace(re + 1j * im)
    return x.replace(sps.sosfiltfilt(spec.sections, x.samples, padtype=padtype, padlen=padlen))


def linear_detrend(x: Signal) -> Signal:
    """Subtract the least-squares line from ``x``."""
    if len(x) < 2:
        raise InvalidInputError("linear detrend needs at least 2 samples")
    return x.replace(sps.detrend(x.samples, type="linear"))


def lowpass_filter(raw: Signal, cutoff_hz: float = 5.0, order: int = 4) -> Signal:
    """Zero-phase Butterworth lowpass followed by linear detrending."""
    spec = design_butterworth(order, cutoff_hz, raw.fs, "lowpass")
    return linear_detrend(filter_zero_phase(raw, spec))


def decompose(x_filt: Signal, cutoff_hz: float = 0.05, order: int = 4) -> tuple[Signal, Signal]:
    """Split into (tonic, phasic); ``tonic + phasic == x_filt`` by construction."""
    if x_filt.fs <= 2 * cutoff_hz:
        raise InvalidParameterError(f"fs={x_filt.fs} Hz too low for a {cutoff_hz} Hz tonic filter")
    tonic = filter_zero_phase(x_filt, design_butterworth(order, cutoff_hz, x_filt.fs, "lowpass"))
    phasic = x_filt.replace(x_filt.samples - tonic.samples)
    return tonic, phasic


def zero_baseline(phasic: Signal, mode: str = "mean") -> Signal:
    """Zero-baseline phasic waveform.

    ``mode="mean"`` subtracts the mean (default); ``mode="linear"`` removes
    the least-squares line instead.
    """
    if mode == "mean":
        return phasic.replace(phasic.samples - phasic.samples.mean())
    if mode == "linear":
        return linear_detrend(phasic)
    raise InvalidParameterError(f"unknown baseline mode {mode!r}")
