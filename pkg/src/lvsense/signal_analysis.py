"""Pulse metrics and two-state classification for transmission waveforms.

Peaks are local maxima whose prominence exceeds a fraction of the waveform
range, widths are measured at half prominence with linear interpolation,
and the oscillation frequency is the reciprocal mean peak-to-peak interval
(ms -> kHz).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks, peak_widths

from .observables import TransmissionWaveform

__all__ = [
    "DetectionOptions",
    "PulseMetrics",
    "TwoStateClassification",
    "detect_pulses",
    "classify_two_state",
]


@dataclass(frozen=True)
class DetectionOptions:
    """Peak detection knobs.

    prominence is relative to the waveform range, so metrics are invariant
    under amplitude scaling; min_separation is in ms; smooth_window is a
    moving-average length in samples (0 disables smoothing).
    """

    prominence: float = 0.25
    min_separation: float = 0.0
    smooth_window: int = 0

    def __post_init__(self):
        if not (0.0 < self.prominence < 1.0):
            raise ValueError(f"prominence must be in (0, 1), got {self.prominence!r}")
        if self.min_separation < 0.0:
            raise ValueError("min_separation must be >= 0")
        if self.smooth_window < 0:
            raise ValueError("smooth_window must be >= 0")


@dataclass(frozen=True)
class PulseMetrics:
    """Per-waveform pulse statistics.

    delta_t1 is the mean full width at half prominence (ms), delta_t2 the
    mean peak-to-peak interval (ms), frequency = 1/delta_t2 (kHz). With
    fewer than two pulses delta_t2 and frequency are NaN; no_oscillation
    marks waveforms without any qualifying pulse.
    """

    pulse_count: int
    delta_t1: float
    delta_t2: float
    frequency: float
    widths: np.ndarray
    positions: np.ndarray
    no_oscillation: bool = False

    @classmethod
    def empty(cls) -> "PulseMetrics":
        return cls(0, math.nan, math.nan, math.nan,
                   np.empty(0), np.empty(0), no_oscillation=True)


def _smooth(values: np.ndarray, window: int) -> np.ndarray:
    if window <= 1:
        return values
    kernel = np.ones(window) / window
    # reflect-pad so the average stays unbiased at the edges
    pad = window // 2
    padded = np.concatenate([values[pad:0:-1], values, values[-2:-2 - pad:-1]])
    out = np.convolve(padded, kernel, mode="same")
    return out[pad:pad + values.size]


def _peak_data(w: TransmissionWaveform, opts: DetectionOptions):
    """Shared peak search: (indices, peak times, half-prominence edge times).

    Returns None when the waveform has no range or no qualifying peak.
    """
    values = _smooth(w.values, opts.smooth_window)
    vrange = float(values.max() - values.min())
    if vrange == 0.0:
        return None
    distance = None
    if opts.min_separation > 0.0:
        dt_med = float(np.median(np.diff(w.times)))
        distance = max(1, int(round(opts.min_separation / dt_med)))
    peaks, props = find_peaks(values, prominence=opts.prominence * vrange,
                              distance=distance)
    if peaks.size == 0:
        return None
    _, _, left_ips, right_ips = peak_widths(
        values, peaks, rel_height=0.5,
        prominence_data=(props["prominences"], props["left_bases"], props["right_bases"]))
    sample_idx = np.arange(values.size, dtype=float)
    t_left = np.interp(left_ips, sample_idx, w.times)
    t_right = np.interp(right_ips, sample_idx, w.times)
    return peaks, w.times[peaks], t_left, t_right


def detect_pulses(w: TransmissionWaveform,
                  opts: DetectionOptions = DetectionOptions()) -> PulseMetrics:
    """Find pulses and their widths/intervals in a transmission waveform."""
    if len(w) < 3:
        raise ValueError("pulse detection needs at least 3 samples")
    found = _peak_data(w, opts)
    if found is None:
        return PulseMetrics.empty()
    peaks, positions, t_left, t_right = found
    widths = t_right - t_left

    delta_t1 = float(np.mean(widths))
    if peaks.size >= 2:
        delta_t2 = float(np.mean(np.diff(positions)))
        frequency = 1.0 / delta_t2
    else:
        delta_t2 = math.nan
        frequency = math.nan
    return PulseMetrics(int(peaks.size), delta_t1, delta_t2, frequency,
                        widths, positions)


@dataclass(frozen=True)
class TwoStateClassification:
    """Low/high charge labelling of a waveform.

    labels holds 1 where the sample is classified high-charge. threshold is
    the midpoint of the two cluster centers; dwell fractions are fractions
    of samples. degenerate flags inputs whose two clusters are not separated
    beyond their own spreads.
    """

    labels: np.ndarray
    threshold: float
    centers: tuple[float, float]
    dwell_low: float
    dwell_high: float
    degenerate: bool


def _two_means(values: np.ndarray) -> tuple[float, float]:
    c_lo = float(values.min())
    c_hi = float(values.max())
    for _ in range(500):
        mid = 0.5 * (c_lo + c_hi)
        low = values[values <= mid]
        high = values[values > mid]
        if low.size == 0 or high.size == 0:
            break
        n_lo = float(low.mean())
        n_hi = float(high.mean())
        if n_lo == c_lo and n_hi == c_hi:
            break
        c_lo, c_hi = n_lo, n_hi
    return c_lo, c_hi


def classify_two_state(w: TransmissionWaveform,
                       high_charge_cluster: str = "low-transmission") -> TwoStateClassification:
    """Split a waveform into low/high charge states by 1-D 2-means.

    high_charge_cluster states which transmission cluster corresponds to
    high charge: "low-transmission" (default; charge bursts suppress the
    lock-point transmission) or "high-transmission" (the line sweeps through
    the lock point during bursts). Raises on constant input; near-degenerate
    clusterings are returned with the degenerate flag set.
    """
    if high_charge_cluster not in ("low-transmission", "high-transmission"):
        raise ValueError(f"unknown cluster convention {high_charge_cluster!r}")
    values = w.values
    if float(values.max() - values.min()) == 0.0:
        raise ValueError("two-state classification requires a non-constant waveform")

    c_lo, c_hi = _two_means(values)
    threshold = 0.5 * (c_lo + c_hi)
    in_high_cluster = values > threshold
    std_lo = float(values[~in_high_cluster].std()) if np.any(~in_high_cluster) else 0.0
    std_hi = float(values[in_high_cluster].std()) if np.any(in_high_cluster) else 0.0
    degenerate = (not np.any(in_high_cluster) or not np.any(~in_high_cluster)
                  or (c_hi - c_lo) <= 2.0 * (std_lo + std_hi))

    if high_charge_cluster == "low-transmission":
        labels = (~in_high_cluster).astype(np.int8)
    else:
        labels = in_high_cluster.astype(np.int8)
    dwell_high = float(labels.mean())
    return TwoStateClassification(labels, threshold, (c_lo, c_hi),
                                  1.0 - dwell_high, dwell_high, degenerate)
