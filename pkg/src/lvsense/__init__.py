"""lvsense: predator-prey oscillation toolkit.

Simulates the two-species competitive dynamics observed in a room
temperature vapour cell, synthesizes the corresponding probe-transmission
waveforms, recovers the model rates from measured waveforms, and turns
oscillation frequencies into magnetic-field estimates.
"""

__version__ = "0.1.0"

from .core import (IntegrationError, IntegratorOptions, LvParams, PeriodError,
                   PopulationState, Trajectory, conserved_quantity, derivative,
                   fixed_points, integrate, period)
from .delay import DelayParams, delayed_derivative, integrate_delayed
from .estimation import (FitProblem, FitResult, GammaDiscriminationReport,
                         MultiStart, WindowTooShortError, fit,
                         gamma_discrimination, simulate_residual)
from .field_sensing import (FieldCalibration, FieldEstimate, field_from_waveform,
                            frequency_at_field, params_at_field)
from .observables import (LineshapeModel, NoiseModel, TransmissionWaveform,
                          charge_shift, lineshape, noise_samples, synthesize_waveform)
from .signal_analysis import (DetectionOptions, PulseMetrics, TwoStateClassification,
                              classify_two_state, detect_pulses)

__all__ = [
    "__version__",
    "LvParams", "PopulationState", "Trajectory", "IntegratorOptions",
    "IntegrationError", "PeriodError",
    "derivative", "fixed_points", "conserved_quantity", "integrate", "period",
    "DelayParams", "delayed_derivative", "integrate_delayed",
    "LineshapeModel", "TransmissionWaveform", "NoiseModel",
    "charge_shift", "lineshape", "noise_samples", "synthesize_waveform",
    "DetectionOptions", "PulseMetrics", "TwoStateClassification",
    "detect_pulses", "classify_two_state",
    "FitProblem", "FitResult", "MultiStart", "WindowTooShortError",
    "simulate_residual", "fit", "gamma_discrimination", "GammaDiscriminationReport",
    "FieldCalibration", "FieldEstimate",
    "params_at_field", "frequency_at_field", "field_from_waveform",
]
