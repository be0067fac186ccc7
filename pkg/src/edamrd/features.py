"""
Handcrafted EDA feature vector (98 values).

Layout::

    [0:17)   SCR block
    [17:89)  time-scale decomposition (6 windows x 6 statistics x (avg, max))
    [89:94)  spectral block (VLF, LF, HF relative power, entropy, centroid)
    [94:98)  percentiles 10/25/75/90 of the filtered signal

Degenerate statistics (empty event sets, zero-variance windows, zero
spectral power) are reported as 0 so the vector is always finite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps

from .errors import InvalidInputError
from .signal_core import Signal

N_FEATURES = 98
SCR_NAMES = (
    "count", "rate_per_s",
    "amp_mean", "amp_std", "amp_max", "amp_min", "amp_sum",
    "ipi_mean", "ipi_std", "ipi_max", "ipi_min",
    "rise_mean", "rise_std", "rise_max", "rise_min",
    "dynamic_range", "phasic_auc",
)
TSD_STATS = ("mean", "std", "slope", "auc", "skewness", "kurtosis")
SPECTRAL_NAMES = ("relp_vlf", "relp_lf", "relp_hf", "spectral_entropy", "spectral_centroid")
PERCENTILES = (10.0, 25.0, 75.0, 90.0)
BLOCK_BOUNDS = (17, 89, 94, 98)

# relative variance below which a window counts as constant
_FLAT_RATIO = 1e-20


@dataclass(frozen=True)
class FeatureConfig:
    scr_threshold: float = 0.40
    min_ipi_s: float = 0.5
    min_range_us: float = 1e-3
    tsd_windows_s: tuple[float, ...] = (1.0, 2.0, 4.0, 5.0, 8.0, 10.0)
    welch_segment_fraction: float = 1.0
    welch_overlap: float = 0.5
    welch_resolution_hz: float = 0.025
    bands_hz: tuple[float, ...] = field(default=(0.0, 0.045, 0.15, 0.4))


def feature_names(cfg: FeatureConfig = FeatureConfig()) -> list[str]:
    names = [f"scr_{n}" for n in SCR_NAMES]
    for w in cfg.tsd_windows_s:
        for s in TSD_STATS:
            names += [f"tsd_{w:g}s_{s}_avg", f"tsd_{w:g}s_{s}_max"]
    names += list(SPECTRAL_NAMES)
    names += [f"p{int(p)}" for p in PERCENTILES]
    return names


@dataclass(frozen=True)
class ScrEvent:
    peak_idx: int
    onset_idx: int
    amplitude: float
    rise_time_s: float


def detect_scrs(phasic: Signal, threshold: float = 0.40, min_ipi_s: float = 0.5,
                min_range_us: float = 1e-3) -> list[ScrEvent]:
    """Skin conductance responses as strict local maxima of the phasic signal.

    A peak is kept when its height above the window minimum is at least
    ``threshold`` times the dynamic range. Peaks closer than ``min_ipi_s``
    to an already accepted, higher peak are discarded (greedy, tallest
    first; ties broken by earlier index). The onset is the foot of the
    strictly rising edge, i.e. the nearest preceding (non-strict) local
    minimum, or the window start.

    A window whose dynamic range is below ``min_range_us`` has no
    responses: the relative threshold would otherwise turn filter ripple
    on a flat or drifting trace into events.
    """
    x = np.asarray(phasic.samples, dtype=float)
    if x.size < 3:
        return []
    lo, hi = x.min(), x.max()
    span = hi - lo
    if span <= 0 or span < min_range_us:
        return []
    inner = x[1:-1]
    cand = np.flatnonzero((inner > x[:-2]) & (inner > x[2:])) + 1
    cand = cand[x[cand] - lo >= threshold * span]
    order = sorted(cand.tolist(), key=lambda i: (-x[i], i))
    kept: list[int] = []
    for p in order:
        if all(abs(p - q) / phasic.fs >= min_ipi_s for q in kept):
            kept.append(p)
    events = []
    for p in sorted(kept):
        k = p - 1
        while k > 0 and x[k - 1] < x[k]:
            k -= 1
        events.append(ScrEvent(peak_idx=p, onset_idx=k, amplitude=float(x[p] - x[k]),
                               rise_time_s=(p - k) / phasic.fs))
    return events


def _stats4(v) -> list[float]:
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        return [0.0] * 4
    return [float(v.mean()), float(v.std()), float(v.max()), float(v.min())]


def scr_features(events: list[ScrEvent], phasic: Signal) -> np.ndarray:
    x = phasic.samples
    amps = np.array([e.amplitude for e in events])
    rises = np.array([e.rise_time_s for e in events])
    peaks_s = np.array([e.peak_idx for e in events]) / phasic.fs
    ipis = np.diff(peaks_s) if len(events) >= 2 else np.array([])
    a_mean, a_std, a_max, a_min = _stats4(amps)
    out = [
        float(len(events)),
        len(events) / phasic.duration,
        a_mean, a_std, a_max, a_min, float(amps.sum()) if amps.size else 0.0,
        *_stats4(ipis),
        *_stats4(rises),
        float(x.max() - x.min()),
        float(x.sum() / phasic.fs),
    ]
    return np.nan_to_num(np.array(out, dtype=float))


def _window_stats(win: np.ndarray, fs: float) -> np.ndarray:
    """Statistics for a (K, L) stack of windows -> (K, 6)."""
    n = win.shape[1]
    mean = win.mean(axis=1)
    dev = win - mean[:, None]
    m2 = (dev**2).mean(axis=1)
    m3 = (dev**3).mean(axis=1)
    m4 = (dev**4).mean(axis=1)
    flat = m2 <= _FLAT_RATIO * (win**2).mean(axis=1)
    safe = np.where(flat, 1.0, m2)
    skew = np.where(flat, 0.0, m3 / safe**1.5)
    kurt = np.where(flat, 0.0, m4 / safe**2 - 3.0)
    std = np.sqrt(m2)
    t = np.arange(n) / fs
    tc = t - t.mean()
    denom = (tc**2).sum()
    slope = dev @ tc / denom if denom > 0 else np.zeros(win.shape[0])
    auc = win.sum(axis=1) / fs
    return np.stack([mean, std, slope, auc, skew, kurt], axis=1)


def window_starts(n: int, wlen: int) -> list[int]:
    if wlen >= n:
        return [0]
    hop = max(wlen // 2, 1)
    return list(range(0, n - wlen + 1, hop))


def tsd_features(x: Signal, windows_s=FeatureConfig.tsd_windows_s) -> np.ndarray:
    """Average and maximum of six per-window statistics at several window lengths."""
    v = x.samples
    n = v.size
    if n < round(x.fs):
        raise InvalidInputError("time-scale features need at least 1 s of signal")
    out = []
    for w in windows_s:
        wlen = min(int(round(w * x.fs)), n)
        starts = window_starts(n, wlen)
        stack = np.stack([v[s:s + wlen] for s in starts])
        st = _window_stats(stack, x.fs)
        for j in range(len(TSD_STATS)):
            out += [st[:, j].mean(), st[:, j].max()]
    return np.nan_to_num(np.array(out, dtype=float))


def welch_psd(x: Signal, segment_fraction: float = 1.0, overlap: float = 0.5,
              resolution_hz: float = 0.025) -> tuple[np.ndarray, np.ndarray]:
    n = len(x)
    nperseg = max(int(n * segment_fraction), 8)
    nperseg = min(nperseg, n)
    nfft = max(nperseg, 1 << int(np.ceil(np.log2(x.fs / resolution_hz))))
    return sps.welch(x.samples, fs=x.fs, window="hann", nperseg=nperseg,
                     noverlap=int(nperseg * overlap), nfft=nfft, detrend="constant")


def spectral_features(x_filt: Signal, cfg: FeatureConfig = FeatureConfig()) -> np.ndarray:
    if x_filt.duration < 2.0:
        raise InvalidInputError("spectral features need at least 2 s of signal")
    f, p = welch_psd(x_filt, cfg.welch_segment_fraction, cfg.welch_overlap, cfg.welch_resolution_hz)
    b0, b1, b2, b3 = cfg.bands_hz
    keep = (f >= b0) & (f <= b3)
    fk, pk = f[keep], p[keep]
    total = pk.sum()
    if not total > 0 or np.ptp(x_filt.samples) == 0:
        return np.zeros(5)
    vlf = pk[fk < b1].sum() / total
    lf = pk[(fk >= b1) & (fk < b2)].sum() / total
    hf = pk[fk >= b2].sum() / total
    q = pk / total
    nz = q[q > 0]
    entropy = float(-(nz * np.log(nz)).sum() / np.log(q.size)) if q.size > 1 else 0.0
    centroid = float((fk * pk).sum() / total)
    return np.nan_to_num(np.array([vlf, lf, hf, entropy, centroid]))


def percentile_features(x_filt: Signal) -> np.ndarray:
    return np.percentile(x_filt.samples, PERCENTILES)


def extract_features(bundle, cfg: FeatureConfig = FeatureConfig()) -> np.ndarray:
    """Full 98-element vector from a bundle's ``phasic`` and ``filtered`` series."""
    phasic, filt = bundle.phasic, bundle.filtered
    events = detect_scrs(phasic, cfg.scr_threshold, cfg.min_ipi_s, cfg.min_range_us)
    vec = np.concatenate([
        scr_features(events, phasic),
        tsd_features(filt, cfg.tsd_windows_s),
        spectral_features(filt, cfg),
        percentile_features(filt),
    ])
    if vec.size != N_FEATURES:
        raise InvalidInputError(
            f"feature vector has {vec.size} entries; the window list must have 6 lengths"
        )
    return np.nan_to_num(vec, nan=0.0, posinf=0.0, neginf=0.0)
