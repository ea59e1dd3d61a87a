"""Transit-delay extension: predator growth driven by past prey.

Excited atoms take a finite time tau to drift from the excitation region to
the ionising beam, so the predator gains from the prey population tau
earlier:

    dx/dt = alpha*x(t) - beta*x(t)*y(t)
    dy/dt = -gamma*y(t) + delta*x(t - tau)*y(t)

Only the prey factor of the growth term is delayed; predation loss stays
instantaneous. The delay equation is solved by the method of steps with a
fixed classical 4th-order scheme whose step divides tau exactly, and cubic
Hermite interpolation of the stored prey nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import (IntegrationError, IntegratorOptions, LvParams, PopulationState,
                   Trajectory, integrate, sample_times, _STATUS_MESSAGES)

__all__ = ["DelayParams", "delayed_derivative", "integrate_delayed"]


@dataclass(frozen=True)
class DelayParams:
    """Rates plus transit delay tau (ms) and the prey history on [-tau, 0].

    history None means "constant, equal to the initial prey"; a float is a
    constant history; a (times, values) pair is sampled history with times
    relative to the integration start (so covering [-tau, 0]).
    """

    base: LvParams
    tau: float = 0.024
    history: float | tuple[np.ndarray, np.ndarray] | None = None

    def __post_init__(self):
        if not (math.isfinite(self.tau) and self.tau >= 0.0):
            raise ValueError(f"tau must be finite and >= 0, got {self.tau!r}")
        if isinstance(self.history, (int, float)):
            if not (math.isfinite(self.history) and self.history >= 0.0):
                raise ValueError("constant history must be a finite non-negative prey value")
        elif self.history is not None:
            ht = np.asarray(self.history[0], dtype=float)
            hx = np.asarray(self.history[1], dtype=float)
            if ht.ndim != 1 or ht.shape != hx.shape or ht.size < 2:
                raise ValueError("sampled history needs matching 1-D times and values, length >= 2")
            if np.any(np.diff(ht) <= 0.0):
                raise ValueError("history times must be strictly increasing")
            if ht[0] > -self.tau + 1e-15 or ht[-1] < -1e-15:
                raise ValueError(f"history must cover [-tau, 0] = [{-self.tau!r}, 0]")
            if np.any(hx < 0.0) or not np.all(np.isfinite(hx)):
                raise ValueError("history prey values must be finite and non-negative")
            object.__setattr__(self, "history", (ht, hx))


def delayed_derivative(t: float, state: PopulationState, prey_delayed: float,
                       params: DelayParams) -> tuple[float, float]:
    """(dx/dt, dy/dt) given the prey population at time t - tau."""
    if prey_delayed < 0.0:
        raise ValueError(f"delayed prey must be non-negative, got {prey_delayed!r}")
    p = params.base
    x, y = state.x, state.y
    return (p.alpha * x - p.beta * x * y,
            -p.gamma * y + p.delta * prey_delayed * y)


def _history_arrays(params: DelayParams, init: PopulationState) -> tuple[np.ndarray, np.ndarray]:
    if params.history is None or isinstance(params.history, (int, float)):
        value = init.x if params.history is None else float(params.history)
        return np.array([-params.tau, 0.0]), np.array([value, value])
    return params.history


def integrate_delayed(params: DelayParams, init: PopulationState,
                      t_span: tuple[float, float],
                      opts: IntegratorOptions = IntegratorOptions()) -> Trajectory:
    """Integrate the delay model over t_span (ms).

    tau = 0 reduces exactly to the plain model and delegates to
    core.integrate with the given options. For tau > 0 the step is
    tau/m with m chosen so the step does not exceed opts.step, which keeps
    every delayed lookup inside already-computed history.
    """
    if params.tau == 0.0:
        return integrate(params.base, init, t_span, opts)

    t_out = sample_times(t_span, opts.sample_interval)
    t0, t1 = float(t_span[0]), float(t_span[1])
    m = max(1, int(math.ceil(params.tau / opts.step - 1e-12)))
    h = params.tau / m
    hist_t, hist_x = _history_arrays(params, init)

    xs = np.empty_like(t_out)
    ys = np.empty_like(t_out)
    p = params.base
    status, t_fail, _ = _kernels.dde_rk4(
        p.alpha, p.beta, p.gamma, p.delta, params.tau,
        init.x, init.y, t0, t1, h, hist_t, hist_x, opts.max_steps, t_out, xs, ys)
    if status != _kernels.STATUS_OK:
        raise IntegrationError(_STATUS_MESSAGES[status], t_fail)
    return Trajectory(t_out, xs, ys)
