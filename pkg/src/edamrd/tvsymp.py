"""
Time-varying sympathetic index (TVSymp).

The zero-baseline phasic signal is decimated, passed through a fixed-frequency
complex demodulation bank, the components centred inside 0.08-0.24 Hz are
re-modulated and summed, and the Hilbert envelope of that band signal is
scaled to unit standard deviation.

Only the first (fixed-frequency) pass of variable-frequency complex
demodulation is implemented.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSignalError, InvalidInputError, InvalidParameterError
from .signal_core import FilterSpec, Signal, design_butterworth, filter_zero_phase


@dataclass(frozen=True)
class TvsympConfig:
    fs_ds: float = 2.0
    f0: float = 0.04
    n_centers: int = 12
    lp_order: int = 4
    lp_cutoff_hz: float | None = None  # None -> f0
    band_lo: float = 0.08
    band_hi: float = 0.24
    antialias_order: int = 4
    antialias_ratio: float = 0.45


@dataclass(frozen=True, eq=False)
class DemodBank:
    f0: float
    centers: tuple[float, ...]
    lp: FilterSpec

    def __post_init__(self):
        if self.f0 <= 0:
            raise InvalidParameterError("bank base frequency must be positive")
        c = np.asarray(self.centers, dtype=float)
        if c.size and np.any(np.diff(c) <= 0):
            raise InvalidParameterError("bank centers must be strictly increasing")
        if c.size and c[-1] >= self.lp.fs / 2:
            raise InvalidParameterError(f"bank center {c[-1]} Hz is at or above Nyquist")


def make_bank(fs: float, f0: float = 0.04, n_centers: int = 12, lp_order: int = 4,
              lp_cutoff_hz: float | None = None) -> DemodBank:
    """Centers at odd multiples of ``f0``: (2w - 1) * f0 for w = 1..n_centers."""
    centers = tuple((2 * w - 1) * f0 for w in range(1, n_centers + 1))
    lp = design_butterworth(lp_order, f0 if lp_cutoff_hz is None else lp_cutoff_hz, fs, "lowpass")
    return DemodBank(f0=f0, centers=centers, lp=lp)


def downsample(x: Signal, fs_target: float, order: int = 4, ratio: float = 0.45) -> Signal:
    """Anti-alias (zero-phase Butterworth at ``ratio * fs_target``) then decimate."""
    if not 0 < fs_target < x.fs:
        raise InvalidParameterError(f"target rate {fs_target} must be below the input rate {x.fs}")
    factor = x.fs / fs_target
    q = int(round(factor))
    if abs(factor - q) > 1e-9:
        raise InvalidParameterError(f"decimation factor {factor:g} is not an integer")
    aa = design_butterworth(order, ratio * fs_target, x.fs, "lowpass")
    y = filter_zero_phase(x, aa)
    return Signal(y.samples[::q], fs_target)


def cdm_components(x: Signal, bank: DemodBank) -> list[Signal]:
    """Complex baseband component for each bank center."""
    if not bank.centers:
        raise InvalidParameterError("demodulation bank is empty")
    if not np.isclose(bank.lp.fs, x.fs):
        raise InvalidParameterError(f"bank designed for fs={bank.lp.fs}, signal at fs={x.fs}")
    t = x.times
    out = []
    for fw in bank.centers:
        shifted = x.replace(x.samples * np.exp(-2j * np.pi * fw * t))
        out.append(filter_zero_phase(shifted, bank.lp))
    return out


def band_reconstruct(components: list[Signal], bank: DemodBank, lo: float, hi: float) -> Signal:
    """Re-modulate and sum the components whose center lies in [lo, hi]."""
    if not lo < hi:
        raise InvalidParameterError(f"band lower edge {lo} must be below upper edge {hi}")
    if len(components) != len(bank.centers):
        raise InvalidParameterError("component count does not match the bank")
    picked = [(fw, c) for fw, c in zip(bank.centers, components) if lo <= fw <= hi]
    if not picked:
        raise InvalidParameterError(f"no demodulation centers inside band [{lo}, {hi}] Hz")
    t = components[0].times
    acc = np.zeros(t.size, dtype=np.complex128)
    for fw, c in picked:
        acc += 2.0 * c.samples * np.exp(2j * np.pi * fw * t)
    return Signal(acc.real, components[0].fs)


def analytic_signal(x: np.ndarray) -> np.ndarray:
    n = x.size
    spec = np.fft.fft(x)
    gain = np.zeros(n)
    gain[0] = 1.0
    if n % 2 == 0:
        gain[n // 2] = 1.0
        gain[1:n // 2] = 2.0
    else:
        gain[1:(n + 1) // 2] = 2.0
    return np.fft.ifft(spec * gain)


def hilbert_envelope(x: Signal) -> Signal:
    """Modulus of the FFT-based analytic signal."""
    if len(x) < 4:
        raise InvalidInputError("Hilbert envelope needs at least 4 samples")
    return x.replace(np.abs(analytic_signal(np.asarray(x.samples.real))))


def band_envelope(x_pd: Signal, cfg: TvsympConfig = TvsympConfig()) -> Signal:
    """Un-normalised sympathetic-band envelope at the downsampled rate."""
    x = downsample(x_pd, cfg.fs_ds, cfg.antialias_order, cfg.antialias_ratio) if x_pd.fs > cfg.fs_ds else x_pd
    bank = make_bank(x.fs, cfg.f0, cfg.n_centers, cfg.lp_order, cfg.lp_cutoff_hz)
    comps = cdm_components(x, bank)
    band = band_reconstruct(comps, bank, cfg.band_lo, cfg.band_hi)
    return hilbert_envelope(band)


def tvsymp(x_pd: Signal, cfg: TvsympConfig = TvsympConfig()) -> Signal:
    """Band envelope divided by its own standard deviation.

    Raises:
        DegenerateSignalError: if the envelope is (numerically) constant.
    """
    env = band_envelope(x_pd, cfg)
    v = env.samples
    sigma = v.std()
    if not np.isfinite(sigma) or sigma == 0 or sigma <= 1e-12 * np.abs(v).max():
        raise DegenerateSignalError("TVSymp envelope has zero standard deviation")
    return env.replace(v / sigma)
