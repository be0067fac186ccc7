"""Raw window -> six representations + handcrafted vector."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSignalError, InvalidInputError, InvalidParameterError
from .features import FeatureConfig, extract_features
from .signal_core import Signal, decompose, lowpass_filter, zero_baseline
from .tvsymp import TvsympConfig, downsample, tvsymp

log = logging.getLogger(__name__)

REPRESENTATIONS = ("raw", "phasic", "tonic", "detrend", "tvsymp", "hc")
_ALIASES = {"handcrafted": "hc"}


def canonical_name(name: str) -> str:
    key = _ALIASES.get(name.strip().lower(), name.strip().lower())
    if key not in REPRESENTATIONS:
        raise InvalidParameterError(
            f"unknown representation {name!r}; expected one of {', '.join(REPRESENTATIONS)}"
        )
    return key


@dataclass(frozen=True)
class SignalConfig:
    lowpass_cutoff_hz: float = 5.0
    lowpass_order: int = 4
    tonic_cutoff_hz: float = 0.05
    tonic_order: int = 4
    baseline_mode: str = "mean"


@dataclass(frozen=True, eq=False)
class RepresentationBundle:
    raw: Signal
    filtered: Signal
    tonic: Signal
    phasic: Signal
    detrend: Signal
    tvsymp: Signal
    handcrafted: np.ndarray
    tvsymp_degenerate: bool = False

    def __post_init__(self):
        ref = self.raw
        for name in ("filtered", "tonic", "phasic", "detrend"):
            s = getattr(self, name)
            if len(s) != len(ref) or s.fs != ref.fs:
                raise InvalidInputError(f"representation {name!r} does not match the raw window")

    def series(self, name: str) -> np.ndarray:
        key = canonical_name(name)
        if key == "hc":
            return np.asarray(self.handcrafted, dtype=float)
        return np.asarray(getattr(self, key).samples, dtype=float)

    def to_dict(self) -> dict:
        return {
            "fs": self.raw.fs,
            "tvsymp_fs": self.tvsymp.fs,
            "tvsymp_degenerate": self.tvsymp_degenerate,
            "raw": self.raw.samples.tolist(),
            "filtered": self.filtered.samples.tolist(),
            "tonic": self.tonic.samples.tolist(),
            "phasic": self.phasic.samples.tolist(),
            "detrend": self.detrend.samples.tolist(),
            "tvsymp": self.tvsymp.samples.tolist(),
            "handcrafted": [float(v) for v in self.handcrafted],
        }


def build_bundle(raw: Signal, signal_cfg: SignalConfig = SignalConfig(),
                 tvsymp_cfg: TvsympConfig = TvsympConfig(),
                 feature_cfg: FeatureConfig = FeatureConfig()) -> RepresentationBundle:
    """Compute every representation of one raw window.

    A flat TVSymp envelope is replaced by zeros at the downsampled rate and
    flagged with ``tvsymp_degenerate``.
    """
    filt = lowpass_filter(raw, signal_cfg.lowpass_cutoff_hz, signal_cfg.lowpass_order)
    tonic, phasic = decompose(filt, signal_cfg.tonic_cutoff_hz, signal_cfg.tonic_order)
    x_pd = zero_baseline(phasic, signal_cfg.baseline_mode)
    degenerate = False
    try:
        tv = tvsymp(x_pd, tvsymp_cfg)
    except DegenerateSignalError:
        log.warning("flat TVSymp envelope; substituting zeros")
        degenerate = True
        n = len(downsample(x_pd, tvsymp_cfg.fs_ds)) if x_pd.fs > tvsymp_cfg.fs_ds else len(x_pd)
        tv = Signal(np.zeros(n), tvsymp_cfg.fs_ds if x_pd.fs > tvsymp_cfg.fs_ds else x_pd.fs)
    partial = RepresentationBundle(raw=raw, filtered=filt, tonic=tonic, phasic=phasic, detrend=x_pd,
                                   tvsymp=tv, handcrafted=np.zeros(0), tvsymp_degenerate=degenerate)
    hc = extract_features(partial, feature_cfg)
    return RepresentationBundle(raw=raw, filtered=filt, tonic=tonic, phasic=phasic, detrend=x_pd,
                                tvsymp=tv, handcrafted=hc, tvsymp_degenerate=degenerate)
