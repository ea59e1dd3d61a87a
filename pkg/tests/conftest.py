import numpy as np
import pytest

from lvsense import LineshapeModel, LvParams, PopulationState, TransmissionWaveform

# headline parameter set used throughout (rates in 1/ms)
FIG4 = LvParams(alpha=0.75, beta=0.25, gamma=0.31755, delta=0.25)
GAMMA_PAIR = (0.31755, 0.31780)

# reference large-amplitude orbit: one sharp predator burst within 5 ms
REF_INIT = PopulationState(12.0, 3.0)

# lock detuning and saturating shift on the same side: bursts show up as
# transmission pulses (the small-beam-separation regime)
PULSE_MODEL = LineshapeModel(max_shift=-9.0, y_half=3.0)


@pytest.fixture
def fig4():
    return FIG4


@pytest.fixture
def ref_init():
    return REF_INIT


@pytest.fixture
def pulse_model():
    return PULSE_MODEL


def make_pulse_train(period_ms: float, n_pulses: int = 8, samples_per_period: int = 50,
                     fwhm_frac: float = 0.15, jitter: np.ndarray | None = None,
                     baseline: float = 0.0) -> TransmissionWaveform:
    """Gaussian pulse train whose peaks land exactly on grid samples."""
    dt = period_ms / samples_per_period
    n = samples_per_period * (n_pulses + 1) + 1
    t = dt * np.arange(n)
    v = np.full(n, baseline)
    sigma = fwhm_frac * period_ms / 2.3548200450309493
    for k in range(1, n_pulses + 1):
        center = k * period_ms
        if jitter is not None:
            center += jitter[k - 1]
        v = v + np.exp(-0.5 * ((t - center) / sigma) ** 2)
    return TransmissionWaveform(t, v)
