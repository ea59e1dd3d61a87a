"""Two-species predator-prey model: types, vector field, invariants, integration.

The model is
    dx/dt = alpha*x - beta*x*y
    dy/dt = -gamma*y + delta*x*y
with x the prey population (dimensionless), y the predator population, and
time measured in milliseconds, so all four rates are 1/ms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels

__all__ = [
    "LvParams",
    "PopulationState",
    "Trajectory",
    "IntegratorOptions",
    "IntegrationError",
    "PeriodError",
    "derivative",
    "fixed_points",
    "conserved_quantity",
    "integrate",
    "period",
]


class IntegrationError(RuntimeError):
    """Integration failed; ``t_fail`` is the time (ms) of the failure."""

    def __init__(self, message: str, t_fail: float):
        super().__init__(f"{message} (t = {t_fail:.9g} ms)")
        self.t_fail = t_fail


class PeriodError(RuntimeError):
    """No closed orbit could be measured within the search horizon."""


def _require_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class LvParams:
    """The four positive rates of the predator-prey model, in 1/ms.

    alpha: prey growth; beta: prey loss per unit predator;
    gamma: predator decay; delta: predator growth per unit prey.
    """

    alpha: float
    beta: float
    gamma: float
    delta: float

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "delta"):
            v = getattr(self, name)
            _require_finite(name, v)
            if v <= 0.0:
                raise ValueError(f"{name} must be strictly positive, got {v!r}")

    def coexistence(self) -> "PopulationState":
        """The nontrivial equilibrium (gamma/delta, alpha/beta)."""
        return PopulationState(self.gamma / self.delta, self.alpha / self.beta)

    def scaled(self, k: float) -> "LvParams":
        """All four rates multiplied by k (time axis compressed by k)."""
        return LvParams(self.alpha * k, self.beta * k, self.gamma * k, self.delta * k)


@dataclass(frozen=True)
class PopulationState:
    """A (prey, predator) point; populations are non-negative and unitless."""

    x: float
    y: float

    def __post_init__(self):
        _require_finite("x", self.x)
        _require_finite("y", self.y)
        if self.x < 0.0 or self.y < 0.0:
            raise ValueError(f"populations must be non-negative, got ({self.x!r}, {self.y!r})")


@dataclass(frozen=True)
class Trajectory:
    """Time-stamped sequence of population states.

    times are strictly increasing (ms); x and y are same-length arrays.
    """

    times: np.ndarray
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if times.ndim != 1 or x.shape != times.shape or y.shape != times.shape:
            raise ValueError("times, x, y must be 1-D arrays of equal length")
        if times.size < 2:
            raise ValueError("a trajectory needs at least two samples")
        if not np.all(np.isfinite(times)) or not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
            raise ValueError("trajectory contains non-finite values")
        if np.any(np.diff(times) <= 0.0):
            raise ValueError("times must be strictly increasing")

    def __len__(self) -> int:
        return self.times.size

    def state(self, i: int) -> PopulationState:
        return PopulationState(float(self.x[i]), float(self.y[i]))

    @property
    def states(self) -> list[PopulationState]:
        return [self.state(i) for i in range(self.times.size)]


@dataclass(frozen=True)
class IntegratorOptions:
    """Numerical integration controls.

    method is "adaptive" (embedded 4/5 pair, governed by rtol) or "fixed"
    (classical 4th-order, governed by step, ms). sample_interval sets the
    output spacing; None means span/1000. The tolerance is relative; atol
    None leaves only a deep absolute floor (rtol * 1e-6) against stalls
    when a population gets very small.
    """

    method: str = "adaptive"
    step: float = 1e-3
    rtol: float = 1e-9
    atol: float | None = None
    max_steps: int = 10_000_000
    sample_interval: float | None = None

    def __post_init__(self):
        if self.method not in ("adaptive", "fixed"):
            raise ValueError(f"method must be 'adaptive' or 'fixed', got {self.method!r}")
        if not (self.step > 0.0 and math.isfinite(self.step)):
            raise ValueError(f"step must be positive, got {self.step!r}")
        if not (0.0 < self.rtol <= 1e-2):
            raise ValueError(f"rtol must be in (0, 1e-2], got {self.rtol!r}")
        if self.atol is not None and not (self.atol >= 0.0 and math.isfinite(self.atol)):
            raise ValueError(f"atol must be non-negative, got {self.atol!r}")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if self.sample_interval is not None and not self.sample_interval > 0.0:
            raise ValueError("sample_interval must be positive")

    def resolved_atol(self) -> float:
        return self.rtol * 1e-6 if self.atol is None else self.atol


def derivative(state: PopulationState, params: LvParams) -> tuple[float, float]:
    """Vector field (dx/dt, dy/dt) at a state, in population/ms."""
    x, y = state.x, state.y
    return (params.alpha * x - params.beta * x * y,
            -params.gamma * y + params.delta * x * y)


def fixed_points(params: LvParams) -> list[PopulationState]:
    """Both equilibria: extinction (0, 0) and coexistence (gamma/delta, alpha/beta)."""
    return [PopulationState(0.0, 0.0), params.coexistence()]


def conserved_quantity(state: PopulationState, params: LvParams) -> float:
    """First integral V = delta*x - gamma*ln(x) + beta*y - alpha*ln(y).

    Constant along exact solutions; requires x > 0 and y > 0.
    """
    if state.x <= 0.0 or state.y <= 0.0:
        raise ValueError("conserved quantity requires strictly positive populations")
    return (params.delta * state.x - params.gamma * math.log(state.x)
            + params.beta * state.y - params.alpha * math.log(state.y))


def sample_times(t_span: tuple[float, float], sample_interval: float | None) -> np.ndarray:
    """Output grid: multiples of sample_interval from t0 plus the exact endpoint."""
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not (math.isfinite(t0) and math.isfinite(t1)) or t1 <= t0:
        raise ValueError(f"t_span must be finite and increasing, got {t_span!r}")
    span = t1 - t0
    si = span / 1000.0 if sample_interval is None else float(sample_interval)
    if si <= 0.0:
        raise ValueError("sample_interval must be positive")
    n = int(math.floor(span / si + 1e-9))
    times = t0 + si * np.arange(n + 1, dtype=float)
    if times.size and times[-1] > t1:
        times = times[:-1]
    if times.size == 0 or t1 - times[-1] > 1e-12 * span:
        times = np.append(times, t1)
    else:
        times[-1] = t1
    return times


_STATUS_MESSAGES = {
    _kernels.STATUS_NEGATIVE: "population went negative beyond tolerance",
    _kernels.STATUS_NONFINITE: "non-finite state encountered",
    _kernels.STATUS_STEP_LIMIT: "step limit exceeded",
}


def _run_kernel(params: LvParams, init: PopulationState, t_span, opts: IntegratorOptions,
                t_out: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    xs = np.empty_like(t_out)
    ys = np.empty_like(t_out)
    t0, t1 = float(t_span[0]), float(t_span[1])
    if opts.method == "fixed":
        status, t_fail, _ = _kernels.rk4_fixed(
            params.alpha, params.beta, params.gamma, params.delta,
            init.x, init.y, t0, t1, opts.step, opts.max_steps, t_out, xs, ys)
    else:
        status, t_fail, _ = _kernels.dopri45(
            params.alpha, params.beta, params.gamma, params.delta,
            init.x, init.y, t0, t1, opts.rtol, opts.resolved_atol(),
            opts.max_steps, t_out, xs, ys)
    if status != _kernels.STATUS_OK:
        raise IntegrationError(_STATUS_MESSAGES[status], t_fail)
    return xs, ys


def integrate(params: LvParams, init: PopulationState, t_span: tuple[float, float],
              opts: IntegratorOptions = IntegratorOptions()) -> Trajectory:
    """Integrate the model over t_span (ms), sampling per opts.sample_interval."""
    t_out = sample_times(t_span, opts.sample_interval)
    xs, ys = _run_kernel(params, init, t_span, opts, t_out)
    return Trajectory(t_out, xs, ys)


def _refine_crossing(t_lo: float, t_hi: float, x_lo: float, x_hi: float,
                     f_lo: float, f_hi: float, target: float) -> float:
    # bisection on the cubic Hermite interpolant of x(t) - target
    a, b = t_lo, t_hi
    va = x_lo - target
    for _ in range(80):
        m = 0.5 * (a + b)
        vm = _kernels._hermite(m, t_lo, t_hi, x_lo, x_hi, f_lo, f_hi) - target
        if (va <= 0.0) == (vm <= 0.0):
            a, va = m, vm
        else:
            b = m
        if b - a <= 1e-15 * max(1.0, abs(b)):
            break
    return 0.5 * (a + b)


def period(params: LvParams, init: PopulationState, rtol: float = 1e-10,
           max_periods: float = 64.0) -> float:
    """Period (ms) of the closed orbit through init.

    Measured from successive upward crossings of the section x = gamma/delta,
    with cubic-Hermite refinement of each crossing time. Raises PeriodError
    if no full cycle is found within max_periods linearized periods, and
    ValueError for an equilibrium or non-positive initial state.
    """
    if init.x <= 0.0 or init.y <= 0.0:
        raise ValueError("period requires strictly positive populations")
    x_star = params.gamma / params.delta
    y_star = params.alpha / params.beta
    if abs(init.x - x_star) <= 1e-12 * x_star and abs(init.y - y_star) <= 1e-12 * y_star:
        raise ValueError("initial state is the coexistence equilibrium; no orbit to measure")

    t_lin = 2.0 * math.pi / math.sqrt(params.alpha * params.gamma)
    si = t_lin / 512.0
    opts = IntegratorOptions(method="adaptive", rtol=rtol, sample_interval=si)

    crossings: list[float] = []
    t_start = 0.0
    state = init
    horizon = max_periods * t_lin
    while t_start < horizon:
        chunk = min(8.0 * t_lin, horizon - t_start)
        traj = integrate(params, state, (t_start, t_start + chunk), opts)
        ts, xs, ys = traj.times, traj.x, traj.y
        dx = params.alpha * xs - params.beta * xs * ys
        for i in range(ts.size - 1):
            if xs[i] < x_star <= xs[i + 1] and dx[i] > 0.0:
                tc = _refine_crossing(ts[i], ts[i + 1], xs[i], xs[i + 1], dx[i], dx[i + 1], x_star)
                if not crossings or tc - crossings[-1] > 1e-9 * t_lin:
                    crossings.append(tc)
        if len(crossings) >= 3:
            return (crossings[-1] - crossings[0]) / (len(crossings) - 1)
        t_start += chunk
        state = PopulationState(float(traj.x[-1]), float(traj.y[-1]))
    if len(crossings) >= 2:
        return crossings[-1] - crossings[0]
    raise PeriodError(
        f"no closed orbit found within {max_periods:g} linearized periods "
        f"({max_periods * t_lin:.3g} ms)")
