"""Recover model parameters from waveforms or trajectories by least squares.

The forward model chains integration (plain or delayed) with the lock-point
lineshape; the loss is the sum of squared residuals at the data timestamps.
Rates and populations are optimized in log space so positivity holds by
construction, a beta = delta constraint is available by reparameterization,
and a multi-start downhill simplex provides the minimization. Everything is
deterministic given the start seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .core import (IntegrationError, IntegratorOptions, LvParams, PopulationState,
                   Trajectory, integrate)
from .observables import LineshapeModel, TransmissionWaveform, synthesize_waveform, lineshape
from .signal_analysis import DetectionOptions, _peak_data

__all__ = [
    "FitProblem",
    "FitResult",
    "MultiStart",
    "WindowTooShortError",
    "simulate_residual",
    "predict",
    "fit",
    "gamma_discrimination",
    "GammaDiscriminationReport",
]

_PENALTY = 1e30
_FREE_LINESHAPE_FIELDS = ("amplitude", "baseline", "y_half")

_DEFAULT_BOUNDS = {
    "alpha": (1e-4, 100.0),
    "beta": (1e-4, 100.0),
    "gamma": (1e-4, 100.0),
    "delta": (1e-4, 100.0),
    "x0": (1e-8, 1e4),
    "y0": (1e-8, 1e4),
    "amplitude": (1e-12, 1e6),
    "baseline": (-1e6, 1e6),
    "y_half": (1e-8, 1e6),
}


class WindowTooShortError(RuntimeError):
    """The requested window does not contain enough pulses to compare."""


@dataclass(frozen=True)
class FitProblem:
    """Data plus model configuration for a least-squares fit.

    data is a TransmissionWaveform (fitted through the lineshape) or a
    Trajectory (fitted on both populations directly). tau > 0 switches the
    forward model to the transit-delay equations with that fixed delay.
    free_lineshape names lineshape fields to fit alongside the rates
    (subset of "amplitude", "baseline", "y_half"); everything else in
    lineshape stays frozen. bounds entries override the defaults per
    parameter name. integrator_step None picks the median data spacing
    (capped at 0.01 ms); the forward model always integrates fixed-step so
    the loss surface is smooth in the parameters.
    """

    data: TransmissionWaveform | Trajectory
    lineshape: LineshapeModel = LineshapeModel()
    tau: float = 0.0
    constrain_beta_delta: bool = False
    fit_initial_state: bool = True
    free_lineshape: tuple[str, ...] = ()
    bounds: dict[str, tuple[float, float]] = field(default_factory=dict)
    integrator_step: float | None = None

    def __post_init__(self):
        if not isinstance(self.data, (TransmissionWaveform, Trajectory)):
            raise TypeError("data must be a TransmissionWaveform or Trajectory")
        if not (self.tau >= 0.0 and math.isfinite(self.tau)):
            raise ValueError(f"tau must be finite and >= 0, got {self.tau!r}")
        for name in self.free_lineshape:
            if name not in _FREE_LINESHAPE_FIELDS:
                raise ValueError(f"free_lineshape field {name!r} not one of {_FREE_LINESHAPE_FIELDS}")
        if isinstance(self.data, Trajectory) and self.free_lineshape:
            raise ValueError("lineshape fields cannot be fitted against trajectory data")
        merged = dict(_DEFAULT_BOUNDS)
        merged.update(self.bounds)
        for name, (lo, hi) in merged.items():
            if not lo < hi:
                raise ValueError(f"bounds for {name!r} must satisfy lo < hi")
            if name != "baseline" and lo <= 0.0:
                raise ValueError(f"bounds for {name!r} must keep it strictly positive")
        object.__setattr__(self, "bounds", merged)

    def resolved_step(self) -> float:
        if self.integrator_step is not None:
            return self.integrator_step
        dt = float(np.median(np.diff(self.data.times)))
        return min(dt, 0.01)


@dataclass(frozen=True)
class MultiStart:
    """Multi-start specification: base guess plus seeded perturbations.

    Start 0 is the unperturbed guess; starts 1..n-1 multiply every positive
    parameter by exp(N(0, spread)) (baseline gets additive N(0, spread)
    scaled by its magnitude). Identical seeds give identical results.
    """

    params: LvParams
    init: PopulationState
    n_starts: int = 4
    spread: float = 0.2
    seed: int = 0
    max_iterations: int = 500
    rel_tol: float = 1e-10
    polish_iterations: int = 200

    def __post_init__(self):
        if self.n_starts < 1:
            raise ValueError("n_starts must be at least 1")
        if not (self.spread >= 0.0 and math.isfinite(self.spread)):
            raise ValueError("spread must be non-negative")
        if self.max_iterations < 1 or self.polish_iterations < 0:
            raise ValueError("iteration limits must be positive")


@dataclass(frozen=True)
class FitResult:
    """Best-of-starts fit outcome.

    sensitivity maps each free parameter to the diagonal curvature of the
    loss at the optimum (second central difference in natural units);
    history is the best loss after each simplex iteration of the winning
    start (monotone non-increasing).
    """

    params: LvParams
    init: PopulationState
    lineshape: LineshapeModel
    tau: float
    residual: float
    converged: bool
    iterations: int
    start_index: int
    sensitivity: dict[str, float]
    n_penalized: int
    history: tuple[float, ...]


def _forward_values(problem: FitProblem, params: LvParams, init: PopulationState,
                    model: LineshapeModel):
    """Model prediction at the data timestamps, or None on integration failure."""
    times = problem.data.times
    t0 = float(times[0])
    t1 = float(times[-1])
    step = problem.resolved_step()
    xs = np.empty_like(times)
    ys = np.empty_like(times)
    if problem.tau > 0.0:
        m = max(1, int(math.ceil(problem.tau / step - 1e-12)))
        status, _, _ = _kernels.dde_rk4(
            params.alpha, params.beta, params.gamma, params.delta, problem.tau,
            init.x, init.y, t0, t1, problem.tau / m,
            np.array([-problem.tau, 0.0]), np.array([init.x, init.x]),
            10_000_000, times, xs, ys)
    else:
        status, _, _ = _kernels.rk4_fixed(
            params.alpha, params.beta, params.gamma, params.delta,
            init.x, init.y, t0, t1, step, 10_000_000, times, xs, ys)
    if status != _kernels.STATUS_OK:
        return None
    if isinstance(problem.data, Trajectory):
        return xs, ys
    return lineshape(model.lock_detuning, ys, model)


def simulate_residual(problem: FitProblem, params: LvParams, init: PopulationState,
                      model: LineshapeModel | None = None) -> float:
    """Sum of squared residuals of the forward model against the data.

    Integration failures yield a large finite penalty rather than raising,
    so minimizers can keep moving.
    """
    model = problem.lineshape if model is None else model
    predicted = _forward_values(problem, params, init, model)
    if predicted is None:
        return _PENALTY
    if isinstance(problem.data, Trajectory):
        xs, ys = predicted
        return float(np.sum((xs - problem.data.x) ** 2) + np.sum((ys - problem.data.y) ** 2))
    return float(np.sum((predicted - problem.data.values) ** 2))


def predict(problem: FitProblem, params: LvParams, init: PopulationState,
            model: LineshapeModel | None = None):
    """Forward-model values at the problem's data timestamps.

    Returns a waveform-value array (or an (x, y) pair for trajectory data);
    raises IntegrationError when the candidate cannot be integrated.
    """
    model = problem.lineshape if model is None else model
    predicted = _forward_values(problem, params, init, model)
    if predicted is None:
        raise IntegrationError("forward model failed to integrate",
                               float(problem.data.times[0]))
    return predicted


class _Packer:
    """Maps between named natural-unit parameters and the optimizer vector."""

    def __init__(self, problem: FitProblem):
        names = ["alpha", "beta", "gamma"]
        if not problem.constrain_beta_delta:
            names.append("delta")
        if problem.fit_initial_state:
            names += ["x0", "y0"]
        names += list(problem.free_lineshape)
        self.names = names
        self.log_scale = [n != "baseline" for n in names]
        self.problem = problem
        lo, hi = [], []
        for n, is_log in zip(names, self.log_scale):
            b_lo, b_hi = problem.bounds[n]
            lo.append(math.log(b_lo) if is_log else b_lo)
            hi.append(math.log(b_hi) if is_log else b_hi)
        self.lo = np.array(lo)
        self.hi = np.array(hi)

    def pack(self, params: LvParams, init: PopulationState, model: LineshapeModel) -> np.ndarray:
        values = {"alpha": params.alpha, "beta": params.beta, "gamma": params.gamma,
                  "delta": params.delta, "x0": init.x, "y0": init.y,
                  "amplitude": model.amplitude, "baseline": model.baseline,
                  "y_half": model.y_half}
        vec = []
        for n, is_log in zip(self.names, self.log_scale):
            v = values[n]
            vec.append(math.log(v) if is_log else v)
        return np.clip(np.array(vec), self.lo, self.hi)

    def unpack(self, vec: np.ndarray, fixed_init: PopulationState,
               base_model: LineshapeModel) -> tuple[LvParams, PopulationState, LineshapeModel]:
        values = {}
        for n, is_log, v in zip(self.names, self.log_scale, vec):
            values[n] = math.exp(v) if is_log else v
        beta = values["beta"]
        delta = beta if self.problem.constrain_beta_delta else values["delta"]
        params = LvParams(values["alpha"], beta, values["gamma"], delta)
        if self.problem.fit_initial_state:
            init = PopulationState(values["x0"], values["y0"])
        else:
            init = fixed_init
        overrides = {k: values[k] for k in self.problem.free_lineshape}
        model = replace(base_model, **overrides) if overrides else base_model
        return params, init, model


def _nelder_mead(fun, x0: np.ndarray, lo: np.ndarray, hi: np.ndarray,
                 step: float, max_iter: int, rel_tol: float):
    """Bounded downhill simplex; returns (x, f, iterations, converged, history).

    history[i] is the best loss after iteration i (monotone non-increasing);
    candidate points are clipped to the box. Deterministic.
    """
    n = x0.size
    pts = [np.clip(x0, lo, hi)]
    for i in range(n):
        p = pts[0].copy()
        width = hi[i] - lo[i]
        delta = min(step, 0.25 * width)
        p[i] = p[i] + delta if p[i] + delta <= hi[i] else p[i] - delta
        pts.append(p)
    simplex = np.array(pts)
    fvals = np.array([fun(p) for p in simplex])

    history = []
    iterations = 0
    converged = False
    for _ in range(max_iter):
        order = np.argsort(fvals, kind="stable")
        simplex = simplex[order]
        fvals = fvals[order]
        iterations += 1

        spread = fvals[-1] - fvals[0]
        if spread <= rel_tol * max(abs(fvals[0]), 1e-300):
            history.append(fvals[0])
            converged = True
            break

        centroid = simplex[:-1].mean(axis=0)
        xr = np.clip(centroid + (centroid - simplex[-1]), lo, hi)
        fr = fun(xr)
        if fr < fvals[0]:
            xe = np.clip(centroid + 2.0 * (centroid - simplex[-1]), lo, hi)
            fe = fun(xe)
            if fe < fr:
                simplex[-1], fvals[-1] = xe, fe
            else:
                simplex[-1], fvals[-1] = xr, fr
        elif fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
        else:
            if fr < fvals[-1]:
                xc = np.clip(centroid + 0.5 * (xr - centroid), lo, hi)
            else:
                xc = np.clip(centroid + 0.5 * (simplex[-1] - centroid), lo, hi)
            fc = fun(xc)
            if fc < min(fr, fvals[-1]):
                simplex[-1], fvals[-1] = xc, fc
            else:
                for i in range(1, n + 1):
                    simplex[i] = simplex[0] + 0.5 * (simplex[i] - simplex[0])
                    fvals[i] = fun(simplex[i])
        history.append(float(np.min(fvals)))

    order = np.argsort(fvals, kind="stable")
    return simplex[order[0]], float(fvals[order[0]]), iterations, converged, history


def fit(problem: FitProblem, starts: MultiStart) -> FitResult:
    """Best-of-starts least-squares fit of the problem's free parameters.

    Each start runs the simplex from a seeded perturbation of the guess and
    is then polished with a small fresh simplex around its best point; the
    winner is the lowest loss (ties broken by start index).
    """
    packer = _Packer(problem)
    n_free = len(packer.names)
    if len(problem.data.times) < 10 * n_free:
        raise ValueError(
            f"{n_free} free parameters need at least {10 * n_free} data points, "
            f"got {len(problem.data.times)}")

    n_penalized = 0

    def loss(vec: np.ndarray) -> float:
        nonlocal n_penalized
        params, init, model = packer.unpack(vec, starts.init, problem.lineshape)
        value = simulate_residual(problem, params, init, model)
        if value >= _PENALTY:
            n_penalized += 1
        return value

    base = packer.pack(starts.params, starts.init, problem.lineshape)
    rng = np.random.default_rng(starts.seed)
    offsets = rng.normal(0.0, starts.spread, size=(starts.n_starts, n_free))
    offsets[0, :] = 0.0
    for j, is_log in enumerate(packer.log_scale):
        if not is_log:  # additive perturbation scaled to the guess magnitude
            offsets[:, j] *= max(1.0, abs(base[j]))

    results = []
    for k in range(starts.n_starts):
        x0 = np.clip(base + offsets[k], packer.lo, packer.hi)
        x, f, iters, conv, hist = _nelder_mead(
            loss, x0, packer.lo, packer.hi, 0.05, starts.max_iterations, starts.rel_tol)
        if starts.polish_iterations > 0:
            x2, f2, it2, conv2, hist2 = _nelder_mead(
                loss, x, packer.lo, packer.hi, 1e-3, starts.polish_iterations, starts.rel_tol)
            if f2 <= f:
                x, f, conv = x2, f2, conv2
            iters += it2
            hist = hist + [min(h, hist[-1] if hist else h) for h in hist2]
        results.append((f, k, x, iters, conv, hist))

    best = min(results, key=lambda r: (r[0], r[1]))
    f_best, k_best, x_best, iters_best, conv_best, hist_best = best
    params, init, model = packer.unpack(x_best, starts.init, problem.lineshape)

    sensitivity = {}
    for j, name in enumerate(packer.names):
        h = 1e-4 * max(abs(x_best[j]), 1e-4)
        vp = x_best.copy()
        vp[j] += h
        vm = x_best.copy()
        vm[j] -= h
        lp, lm = loss(vp), loss(vm)
        # convert the log-space curvature to natural units where applicable
        if packer.log_scale[j]:
            theta = math.exp(x_best[j])
            dtheta = theta * math.sinh(h)  # effective half-step in natural units
        else:
            dtheta = h
        sensitivity[name] = (lp - 2.0 * f_best + lm) / (dtheta * dtheta)

    return FitResult(params=params, init=init, lineshape=model, tau=problem.tau,
                     residual=f_best, converged=conv_best, iterations=iters_best,
                     start_index=k_best, sensitivity=sensitivity,
                     n_penalized=n_penalized, history=tuple(hist_best))


@dataclass(frozen=True)
class GammaDiscriminationReport:
    """Waveform divergence between two predator decay rates.

    Pulses are detected on the gamma_a (reference) waveform; each pulse's
    RMS difference is evaluated over its half-prominence support, and
    peak_drift is the absolute peak-time offset of the matching pulse in
    the gamma_b waveform.
    """

    gamma_a: float
    gamma_b: float
    pulse_positions: np.ndarray
    pulse_rms: np.ndarray
    peak_drift: np.ndarray

    @property
    def first_pulse_rms(self) -> float:
        return float(self.pulse_rms[0])

    @property
    def last_pulse_rms(self) -> float:
        return float(self.pulse_rms[-1])

    @property
    def rms_ratio(self) -> float:
        return self.last_pulse_rms / self.first_pulse_rms


def gamma_discrimination(params: LvParams, gamma_a: float, gamma_b: float,
                         window: float, init: PopulationState,
                         model: LineshapeModel,
                         sample_interval: float | None = None,
                         detection: DetectionOptions = DetectionOptions(),
                         rtol: float = 1e-10) -> GammaDiscriminationReport:
    """Compare the waveforms produced by two gamma values over a window (ms).

    Both runs share the other rates, the initial state and the clock; no
    alignment is applied. Raises WindowTooShortError when the reference
    waveform does not contain at least two pulses.
    """
    si = window / 5000.0 if sample_interval is None else sample_interval
    opts = IntegratorOptions(method="adaptive", rtol=rtol, sample_interval=si)

    def run(g: float) -> TransmissionWaveform:
        p = LvParams(params.alpha, params.beta, g, params.delta)
        traj = integrate(p, init, (0.0, window), opts)
        return synthesize_waveform(traj, model)

    wa = run(gamma_a)
    wb = run(gamma_b)
    found_a = _peak_data(wa, detection)
    n_pulses = 0 if found_a is None else found_a[0].size
    if n_pulses < 2:
        raise WindowTooShortError(
            f"window of {window:g} ms contains {n_pulses} pulse(s); "
            "need at least 2 to compare first and last")
    _, positions_a, t_left, t_right = found_a
    found_b = _peak_data(wb, detection)

    # per-pulse RMS difference over each half-prominence support
    diff = wa.values - wb.values
    rms = []
    for t_lo, t_hi in zip(t_left, t_right):
        mask = (wa.times >= t_lo) & (wa.times <= t_hi)
        seg = diff[mask]
        rms.append(math.sqrt(float(np.mean(seg * seg))))

    drift = []
    for t_a in positions_a:
        if found_b is None:
            drift.append(math.nan)
        else:
            positions_b = found_b[1]
            j = int(np.argmin(np.abs(positions_b - t_a)))
            drift.append(abs(float(positions_b[j]) - float(t_a)))

    return GammaDiscriminationReport(
        gamma_a=gamma_a, gamma_b=gamma_b,
        pulse_positions=positions_a.copy(),
        pulse_rms=np.array(rms), peak_drift=np.array(drift))
