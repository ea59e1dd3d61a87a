"""Map predator populations to probe-transmission waveforms.

The readout is a Gaussian transparency resonance whose centre is pushed by
the charge (predator) population. Transmission is monitored at a fixed lock
detuning, so predator oscillations become transmission waveforms.

The shift saturates as max_shift * y / (y + y_half). max_shift is signed:
with lock_detuning and max_shift on opposite sides of zero the line moves
away from the lock point and bursts of charge suppress transmission (dips);
with both on the same side the line sweeps through the lock point and
bursts appear as transmission pulses, which is the pulsed regime seen with
small beam separations.

Transmission couples to the populations only through the charge-induced
shift (the predator y); a direct coupling to the prey population is
deliberately not modeled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import LvParams, Trajectory

__all__ = [
    "LineshapeModel",
    "TransmissionWaveform",
    "NoiseModel",
    "charge_shift",
    "lineshape",
    "noise_samples",
    "synthesize_waveform",
]

_FOUR_LN2 = 4.0 * math.log(2.0)


@dataclass(frozen=True)
class LineshapeModel:
    """Gaussian resonance with charge-induced shift, evaluated at a lock point.

    fwhm, max_shift and lock_detuning are MHz; amplitude/baseline are
    transmission units. y_half is the predator population at which the shift
    reaches half of max_shift; the default equals the coexistence predator
    level alpha/beta of the reference parameter set (0.75/0.25 = 3).
    """

    fwhm: float = 12.0
    max_shift: float = 9.0
    lock_detuning: float = -8.0
    amplitude: float = 1.0
    baseline: float = 0.0
    y_half: float = 3.0

    def __post_init__(self):
        if not (self.fwhm > 0.0 and math.isfinite(self.fwhm)):
            raise ValueError(f"fwhm must be positive, got {self.fwhm!r}")
        if not (self.y_half > 0.0 and math.isfinite(self.y_half)):
            raise ValueError(f"y_half must be positive, got {self.y_half!r}")
        if not (self.amplitude > 0.0 and math.isfinite(self.amplitude)):
            raise ValueError(f"amplitude must be positive, got {self.amplitude!r}")
        for name in ("max_shift", "lock_detuning", "baseline"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @classmethod
    def for_params(cls, params: LvParams, **overrides) -> "LineshapeModel":
        """Model whose half-saturation sits at the coexistence predator level."""
        overrides.setdefault("y_half", params.alpha / params.beta)
        return cls(**overrides)


@dataclass(frozen=True)
class TransmissionWaveform:
    """Probe transmission samples over strictly increasing times (ms)."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if times.ndim != 1 or values.shape != times.shape:
            raise ValueError("times and values must be 1-D arrays of equal length")
        if not np.all(np.isfinite(times)) or not np.all(np.isfinite(values)):
            raise ValueError("waveform contains non-finite values")
        if np.any(np.diff(times) <= 0.0):
            raise ValueError("times must be strictly increasing")

    def __len__(self) -> int:
        return self.times.size


@dataclass(frozen=True)
class NoiseModel:
    """Additive measurement noise; kind is "none" or "additive-gaussian"."""

    kind: str = "none"
    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("none", "additive-gaussian"):
            raise ValueError(f"kind must be 'none' or 'additive-gaussian', got {self.kind!r}")
        if not (self.sigma >= 0.0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be non-negative, got {self.sigma!r}")


def charge_shift(y, model: LineshapeModel):
    """Resonance shift (MHz) produced by predator population y.

    Saturating form max_shift * y / (y + y_half): zero at y = 0, half of
    max_shift at y = y_half, approaching max_shift as y grows. Accepts
    scalars or arrays.
    """
    y_arr = np.asarray(y, dtype=float)
    if np.any(y_arr < 0.0):
        raise ValueError("predator population must be non-negative")
    out = model.max_shift * y_arr / (y_arr + model.y_half)
    return float(out) if np.isscalar(y) else out


def lineshape(detuning, y, model: LineshapeModel):
    """Transmission at a detuning (MHz) given predator population y.

    baseline + amplitude * exp(-4 ln2 (detuning - shift(y))^2 / fwhm^2).
    Accepts scalar or array detuning/y (broadcast).
    """
    shift = np.asarray(charge_shift(y, model), dtype=float)
    det = np.asarray(detuning, dtype=float)
    arg = det - shift
    out = model.baseline + model.amplitude * np.exp(-_FOUR_LN2 * arg * arg / (model.fwhm * model.fwhm))
    if np.isscalar(detuning) and np.isscalar(y):
        return float(out)
    return out


def noise_samples(noise: NoiseModel, n: int) -> np.ndarray:
    """The exact noise sequence a given model adds to an n-sample waveform."""
    if noise.kind == "none" or noise.sigma == 0.0:
        return np.zeros(n)
    rng = np.random.default_rng(noise.seed)
    return rng.normal(0.0, noise.sigma, n)


def synthesize_waveform(traj: Trajectory, model: LineshapeModel,
                        noise: NoiseModel = NoiseModel()) -> TransmissionWaveform:
    """Evaluate the lock-point transmission along a trajectory, plus noise.

    The waveform shares the trajectory's timestamps. Noise is seeded, so
    identical inputs give bit-identical output.
    """
    clean = lineshape(model.lock_detuning, traj.y, model)
    values = clean + noise_samples(noise, traj.times.size)
    return TransmissionWaveform(traj.times.copy(), values)
