"""
Synthetic labelled EDA windows for three "pain" classes.

Each window is a drifting tonic level plus a train of Bateman-shaped skin
conductance responses and white noise. Classes differ mainly in response
count and amplitude, so they are close to separable by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataio import Record
from .errors import InvalidParameterError
from .signal_core import Signal

TAU_DECAY = 2.0
TAU_RISE = 0.7


@dataclass(frozen=True)
class ClassParams:
    n_events: tuple[int, int]
    amp_mean: float
    amp_std: float
    slope_range: tuple[float, float]
    noise_sigma: float


def _default_classes():
    return (
        ClassParams(n_events=(0, 1), amp_mean=0.15, amp_std=0.03, slope_range=(-0.01, 0.01), noise_sigma=0.0005),
        ClassParams(n_events=(2, 4), amp_mean=0.40, amp_std=0.06, slope_range=(0.0, 0.02), noise_sigma=0.0005),
        ClassParams(n_events=(5, 8), amp_mean=0.80, amp_std=0.10, slope_range=(0.01, 0.03), noise_sigma=0.0005),
    )


@dataclass(frozen=True)
class SynthSpec:
    fs: float = 100.0
    duration_s: float = 10.0
    level_range: tuple[float, float] = (2.0, 8.0)
    wander_amp_range: tuple[float, float] = (0.03, 0.06)
    wander_period_range_s: tuple[float, float] = (10.0, 20.0)
    min_gap_s: float = 0.9
    event_window_s: tuple[float, float] = (0.3, 8.5)
    classes: tuple[ClassParams, ...] = field(default_factory=_default_classes)


def bateman(t: np.ndarray, onset: float, height: float) -> np.ndarray:
    """SCR template scaled so its maximum equals ``height``."""
    peak_t = np.log(TAU_DECAY / TAU_RISE) * TAU_DECAY * TAU_RISE / (TAU_DECAY - TAU_RISE)
    norm = np.exp(-peak_t / TAU_DECAY) - np.exp(-peak_t / TAU_RISE)
    u = np.clip(t - onset, 0.0, None)
    return height * (np.exp(-u / TAU_DECAY) - np.exp(-u / TAU_RISE)) / norm


def bateman_peak_offset() -> float:
    return float(np.log(TAU_DECAY / TAU_RISE) * TAU_DECAY * TAU_RISE / (TAU_DECAY - TAU_RISE))


def _event_onsets(n: int, spec: SynthSpec, rng) -> np.ndarray:
    lo, hi = spec.event_window_s
    for _ in range(1000):
        onsets = np.sort(rng.uniform(lo, hi, size=n))
        if n < 2 or np.diff(onsets).min() >= spec.min_gap_s:
            return onsets
    # dense trains: evenly spaced with jitter
    base = np.linspace(lo, hi, n)
    return base + rng.uniform(-0.1, 0.1, size=n) * (hi - lo) / max(n, 1)


def generate_window(class_id: int, rng: np.random.Generator, spec: SynthSpec = SynthSpec()) -> tuple[Signal, int]:
    if class_id not in range(len(spec.classes)):
        raise InvalidParameterError(f"class id must be in 0..{len(spec.classes) - 1}, got {class_id!r}")
    p = spec.classes[class_id]
    n = int(round(spec.fs * spec.duration_s))
    t = np.arange(n) / spec.fs
    level = rng.uniform(*spec.level_range)
    slope = rng.uniform(*p.slope_range)
    x = level + slope * t
    if spec.wander_amp_range[1] > 0:
        amp = rng.uniform(*spec.wander_amp_range)
        period = rng.uniform(*spec.wander_period_range_s)
        x = x + amp * np.sin(2 * np.pi * t / period + rng.uniform(0, 2 * np.pi))
    k = int(rng.integers(p.n_events[0], p.n_events[1] + 1))
    if k:
        for onset in _event_onsets(k, spec, rng):
            height = max(rng.normal(p.amp_mean, p.amp_std), 0.2 * p.amp_mean)
            x = x + bateman(t, onset, height)
    if p.noise_sigma > 0:
        x = x + rng.normal(0.0, p.noise_sigma, size=n)
    return Signal(x, spec.fs), class_id


def generate_dataset(n_per_class: int, seed: int, spec: SynthSpec = SynthSpec(),
                     val_fraction: float = 0.2) -> list[Record]:
    """Balanced labelled windows with a stratified train/val split.

    Every window gets its own child seed, so windows are reproducible
    independently of how many others are generated.
    """
    if n_per_class < 1:
        raise InvalidParameterError("n_per_class must be >= 1")
    n_classes = len(spec.classes)
    children = np.random.SeedSequence(seed).spawn(n_classes * n_per_class)
    split_rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    n_val = int(round(n_per_class * val_fraction))
    records = []
    for c in range(n_classes):
        val_idx = set(split_rng.permutation(n_per_class)[:n_val].tolist())
        for i in range(n_per_class):
            rng = np.random.default_rng(children[c * n_per_class + i])
            sig, label = generate_window(c, rng, spec)
            records.append(Record(sig, label, "val" if i in val_idx else "train"))
    return records


def split_records(records: list[Record]) -> tuple[list[Record], list[Record]]:
    train = [r for r in records if r.split != "val"]
    val = [r for r in records if r.split == "val"]
    return train, val
