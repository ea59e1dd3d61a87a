"""Magnetic-field calibration and inversion of waveforms to field estimates.

Two independent calibrations are exposed: a linear oscillation-frequency law
(kHz = slope * B above a plasma threshold, no oscillation below it) and a
per-rate piecewise-linear map anchored at measured field points. Inverting a
waveform goes through pulse detection: B = frequency / slope, with the slope
error and the peak-interval standard error propagated in quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import LvParams
from .observables import TransmissionWaveform
from .signal_analysis import DetectionOptions, detect_pulses

__all__ = [
    "FieldCalibration",
    "FieldEstimate",
    "params_at_field",
    "frequency_at_field",
    "field_from_waveform",
]

_DEFAULT_ANCHORS = (
    (12.1, LvParams(0.651, 0.217, 0.276, 0.217)),
    (21.3, LvParams(0.868, 0.434, 0.566, 0.434)),
)


@dataclass(frozen=True)
class FieldCalibration:
    """Field-to-dynamics calibration data.

    freq_slope (kHz/G) with its uncertainty; threshold_b (G) below which no
    sustained oscillation exists; param_anchors maps measured fields to rate
    sets (each with beta = delta, as in the anchor measurements).
    """

    freq_slope: float = 1.033
    freq_slope_err: float = 0.006
    threshold_b: float = 4.0
    param_anchors: tuple[tuple[float, LvParams], ...] = _DEFAULT_ANCHORS

    def __post_init__(self):
        if not (self.freq_slope > 0.0 and math.isfinite(self.freq_slope)):
            raise ValueError(f"freq_slope must be positive, got {self.freq_slope!r}")
        if not (self.freq_slope_err >= 0.0 and math.isfinite(self.freq_slope_err)):
            raise ValueError("freq_slope_err must be non-negative")
        if not (self.threshold_b >= 0.0 and math.isfinite(self.threshold_b)):
            raise ValueError("threshold_b must be non-negative")
        if len(self.param_anchors) < 2:
            raise ValueError("at least two parameter anchors are required")
        fields = [b for b, _ in self.param_anchors]
        if any(f2 <= f1 for f1, f2 in zip(fields, fields[1:])):
            raise ValueError("anchors must be sorted by strictly increasing field")
        for b, p in self.param_anchors:
            if p.beta != p.delta:
                raise ValueError(f"anchor at B = {b} G must satisfy beta = delta")

    def supported_span(self) -> tuple[float, float]:
        """Field range usable for interpolation: anchors widened by 50% of their span."""
        b_lo = self.param_anchors[0][0]
        b_hi = self.param_anchors[-1][0]
        margin = 0.5 * (b_hi - b_lo)
        return b_lo - margin, b_hi + margin


def params_at_field(b: float, cal: FieldCalibration = FieldCalibration()) -> LvParams:
    """Rates at field b (G) by per-rate piecewise-linear interpolation.

    Anchor fields reproduce their anchor rates exactly; extrapolation uses
    the edge segments and is limited to 50% of the anchor span on either
    side (beyond that the linear extension is unsupported).
    """
    lo, hi = cal.supported_span()
    if not (lo <= b <= hi):
        raise ValueError(f"B = {b} G outside supported span [{lo:g}, {hi:g}] G")
    fields = np.array([bb for bb, _ in cal.param_anchors])
    idx = int(np.searchsorted(fields, b))
    if idx == 0:
        i0, i1 = 0, 1
    elif idx >= fields.size:
        i0, i1 = fields.size - 2, fields.size - 1
    else:
        i0, i1 = idx - 1, idx
    b0, p0 = cal.param_anchors[i0]
    b1, p1 = cal.param_anchors[i1]
    if b == b0:
        return p0
    if b == b1:
        return p1
    w = (b - b0) / (b1 - b0)

    def lerp(v0: float, v1: float) -> float:
        return (1.0 - w) * v0 + w * v1

    beta = lerp(p0.beta, p1.beta)
    return LvParams(lerp(p0.alpha, p1.alpha), beta, lerp(p0.gamma, p1.gamma), beta)


def frequency_at_field(b: float, cal: FieldCalibration = FieldCalibration()) -> float | None:
    """Oscillation frequency (kHz) at field b (G), or None below threshold.

    Above the plasma threshold the law is a line through the origin,
    freq_slope * b.
    """
    if not (b >= 0.0 and math.isfinite(b)):
        raise ValueError(f"B must be non-negative, got {b!r}")
    if b < cal.threshold_b:
        return None
    return cal.freq_slope * b


@dataclass(frozen=True)
class FieldEstimate:
    """Field inferred from a waveform.

    below_threshold reports waveforms without detectable oscillation, in
    which case only the interval statement "B < threshold" is available and
    b/uncertainty/frequency are None.
    """

    b: float | None
    uncertainty: float | None
    frequency: float | None
    below_threshold: bool
    threshold_b: float

    @property
    def statement(self) -> str:
        if self.below_threshold:
            return f"B < {self.threshold_b:g} G (no oscillation detected)"
        return f"B = {self.b:.6g} G +/- {self.uncertainty:.3g} G"


def field_from_waveform(w: TransmissionWaveform,
                        cal: FieldCalibration = FieldCalibration(),
                        detection: DetectionOptions = DetectionOptions()) -> FieldEstimate:
    """Invert a waveform to a magnetic-field estimate.

    Detects pulses, converts the mean peak interval to a frequency and
    divides by the calibration slope. The reported uncertainty combines, in
    quadrature, the slope uncertainty and the standard error of the mean
    peak interval; at least 3 pulses are required for the latter. A
    waveform with no qualifying pulses yields a below-threshold report.
    """
    metrics = detect_pulses(w, detection)
    if metrics.no_oscillation:
        return FieldEstimate(None, None, None, True, cal.threshold_b)
    if metrics.pulse_count < 3:
        raise ValueError(
            f"field estimation needs at least 3 pulses, found {metrics.pulse_count}")

    intervals = np.diff(metrics.positions)
    mean_dt = float(np.mean(intervals))
    freq = 1.0 / mean_dt
    b = freq / cal.freq_slope

    se_dt = float(np.std(intervals, ddof=1)) / math.sqrt(intervals.size)
    sigma_freq = se_dt / (mean_dt * mean_dt)
    sigma_b = math.hypot(sigma_freq / cal.freq_slope,
                         freq * cal.freq_slope_err / (cal.freq_slope * cal.freq_slope))
    return FieldEstimate(b, sigma_b, freq, False, cal.threshold_b)
