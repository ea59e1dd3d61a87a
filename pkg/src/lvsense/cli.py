"""Command-line interface: reproducible simulation, analysis and sensing runs.

Modes: simulate, simulate-delayed, spectra, fit, discriminate, sense.
Options come from a flat key = value config file plus command-line flags
(flags win). Every run prints a stable key=value summary to stdout, writes
CSV outputs with a provenance comment block, and funnels all randomness
through the single seed recorded in the summary, so identical config + seed
gives byte-identical outputs.

Exit codes: 0 success, 2 configuration or input-format error, 3 numerical
failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .core import (IntegrationError, IntegratorOptions, LvParams, PeriodError,
                   PopulationState, integrate)
from .delay import DelayParams, integrate_delayed
from .estimation import (FitProblem, MultiStart, WindowTooShortError, fit,
                         gamma_discrimination, predict)
from .field_sensing import FieldCalibration, field_from_waveform
from .fileio import (ConfigError, CsvFormatError, calibration_from_config,
                     read_config, read_waveform, write_config, write_table,
                     write_trajectory, write_waveform)
from .observables import (LineshapeModel, NoiseModel, TransmissionWaveform,
                          charge_shift, lineshape, synthesize_waveform)
from .signal_analysis import DetectionOptions, detect_pulses

__all__ = ["RunConfig", "run", "spectra_scan", "main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

_FIG4_DEFAULTS = {
    "alpha": 0.75, "beta": 0.25, "gamma": 0.31755, "delta": 0.25,
}

# (default, converter tag); "auto" y_half resolves to alpha/beta at run time
_MODEL_KEYS = {
    "fwhm": (12.0, "float"),
    "max_shift": (9.0, "float"),
    "lock_detuning": (-8.0, "float"),
    "amplitude": (1.0, "float"),
    "baseline": (0.0, "float"),
    "y_half": ("auto", "float_or_auto"),
}
_DETECTION_KEYS = {
    "prominence": (0.25, "float"),
    "min_separation": (0.0, "float"),
    "smooth_window": (0, "int"),
}
_INTEGRATOR_KEYS = {
    "method": ("adaptive", "str"),
    "step": (1e-3, "float"),
    "rtol": (1e-9, "float"),
    "max_steps": (10_000_000, "int"),
}
_PARAM_KEYS = {k: (v, "float") for k, v in _FIG4_DEFAULTS.items()}
_INIT_KEYS = {"x0": (12.0, "float"), "y0": (3.0, "float")}

_MODE_KEYS: dict[str, dict[str, tuple]] = {
    "simulate": {
        **_PARAM_KEYS, **_INIT_KEYS, **_MODEL_KEYS, **_INTEGRATOR_KEYS, **_DETECTION_KEYS,
        "t_end": (5.0, "float"),
        "sample_interval": (0.0025, "float"),
        "noise": ("none", "str"),
        "sigma": (0.0, "float"),
        "seed": (0, "int"),
        "out_trajectory": ("trajectory.csv", "str"),
        "out_waveform": ("waveform.csv", "str"),
    },
    "spectra": {
        **_MODEL_KEYS,
        "detuning_min": (-30.0, "float"),
        "detuning_max": (30.0, "float"),
        "detuning_points": (601, "int"),
        "charge_levels": ((0.0, 1e15), "floats"),
        "seed": (0, "int"),
        "output": ("spectra.csv", "str"),
    },
    "fit": {
        **_PARAM_KEYS, **_INIT_KEYS, **_MODEL_KEYS,
        "input": (None, "str"),
        "tau": (0.0, "float"),
        "constrain_beta_delta": (False, "bool"),
        "fit_initial_state": (True, "bool"),
        "free_lineshape": ((), "strs"),
        "n_starts": (4, "int"),
        "spread": (0.2, "float"),
        "seed": (0, "int"),
        "max_iterations": (500, "int"),
        "integrator_step": (None, "float_or_none"),
        "output": (None, "str_or_none"),
    },
    "discriminate": {
        "alpha": (0.75, "float"), "beta": (0.25, "float"), "delta": (0.25, "float"),
        **_INIT_KEYS, **_MODEL_KEYS, **_DETECTION_KEYS,
        "gamma_a": (0.31755, "float"),
        "gamma_b": (0.31780, "float"),
        "window": (90.0, "float"),
        "sample_interval": (None, "float_or_none"),
        "seed": (0, "int"),
        "output": ("discrimination.csv", "str"),
    },
    "sense": {
        **_DETECTION_KEYS,
        "input": (None, "str"),
        "calibration": (None, "str_or_none"),
        "seed": (0, "int"),
        "output": (None, "str_or_none"),
    },
}
_MODE_KEYS["simulate-delayed"] = {
    **_MODE_KEYS["simulate"],
    "tau": (0.024, "float"),
    "history_value": (None, "float_or_none"),
}

_REQUIRED = {"fit": ("input",), "sense": ("input",)}


def _convert(key: str, tag: str, text: str):
    text = text.strip()
    try:
        if tag == "float":
            return float(text)
        if tag == "int":
            return int(text)
        if tag == "str":
            return text
        if tag == "str_or_none":
            return None if text.lower() == "none" or text == "" else text
        if tag == "float_or_none":
            return None if text.lower() == "none" or text == "" else float(text)
        if tag == "float_or_auto":
            return "auto" if text.lower() == "auto" else float(text)
        if tag == "bool":
            low = text.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(text)
        if tag == "floats":
            return tuple(float(part) for part in text.split(",") if part.strip() != "")
        if tag == "strs":
            return tuple(part.strip() for part in text.split(",") if part.strip() != "")
    except ValueError:
        raise ConfigError(f"invalid value for {key!r}: {text!r}") from None
    raise ConfigError(f"unhandled option type {tag!r} for {key!r}")


@dataclass(frozen=True)
class RunConfig:
    """One resolved run: the mode plus its fully-typed option mapping."""

    mode: str
    options: dict

    def __post_init__(self):
        if self.mode not in _MODE_KEYS:
            raise ConfigError(f"unknown mode {self.mode!r}")
        spec = _MODE_KEYS[self.mode]
        resolved = {k: default for k, (default, _) in spec.items()}
        for key, value in self.options.items():
            if key not in spec:
                raise ConfigError(f"unknown option {key!r} for mode {self.mode!r}")
            resolved[key] = value
        for key in _REQUIRED.get(self.mode, ()):
            if resolved[key] is None:
                raise ConfigError(f"mode {self.mode!r} requires option {key!r}")
        object.__setattr__(self, "options", resolved)

    def config_hash(self) -> str:
        payload = [self.mode]
        for key in sorted(self.options):
            payload.append(f"{key}={self.options[key]!r}")
        return hashlib.sha256("\n".join(payload).encode()).hexdigest()[:16]


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(float(value))
    if isinstance(value, (tuple, list)):
        return ",".join(_fmt(v) for v in value)
    return str(value)


def _summary(lines: list[tuple[str, object]]) -> None:
    for key, value in lines:
        print(f"{key}={_fmt(value)}")


def _provenance(config: RunConfig) -> dict[str, str]:
    return {
        "generator": f"lvsense {__version__}",
        "mode": config.mode,
        "config_hash": config.config_hash(),
        "seed": str(config.options.get("seed", 0)),
    }


def _build_params(o: dict) -> LvParams:
    try:
        return LvParams(o["alpha"], o["beta"], o["gamma"], o["delta"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _build_model(o: dict, params: LvParams | None) -> LineshapeModel:
    y_half = o["y_half"]
    if y_half == "auto":
        y_half = params.alpha / params.beta if params is not None else 3.0
    try:
        return LineshapeModel(fwhm=o["fwhm"], max_shift=o["max_shift"],
                              lock_detuning=o["lock_detuning"], amplitude=o["amplitude"],
                              baseline=o["baseline"], y_half=y_half)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _build_detection(o: dict) -> DetectionOptions:
    try:
        return DetectionOptions(prominence=o["prominence"],
                                min_separation=o["min_separation"],
                                smooth_window=o["smooth_window"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _build_integrator(o: dict, sample_interval) -> IntegratorOptions:
    try:
        return IntegratorOptions(method=o["method"], step=o["step"], rtol=o["rtol"],
                                 max_steps=o["max_steps"], sample_interval=sample_interval)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _metrics_summary(metrics) -> list[tuple[str, object]]:
    return [
        ("pulse_count", metrics.pulse_count),
        ("delta_t1_ms", metrics.delta_t1),
        ("delta_t2_ms", metrics.delta_t2),
        ("frequency_khz", metrics.frequency),
    ]


def _run_simulate(config: RunConfig, delayed: bool) -> int:
    o = config.options
    params = _build_params(o)
    try:
        init = PopulationState(o["x0"], o["y0"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    model = _build_model(o, params)
    try:
        noise = NoiseModel(kind=o["noise"], sigma=o["sigma"], seed=o["seed"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    iopts = _build_integrator(o, o["sample_interval"])

    if delayed:
        try:
            dparams = DelayParams(params, o["tau"], o["history_value"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        traj = integrate_delayed(dparams, init, (0.0, o["t_end"]), iopts)
    else:
        traj = integrate(params, init, (0.0, o["t_end"]), iopts)
    waveform = synthesize_waveform(traj, model, noise)

    comments = _provenance(config)
    write_trajectory(o["out_trajectory"], traj, comments)
    write_waveform(o["out_waveform"], waveform, comments)
    metrics = detect_pulses(waveform, _build_detection(o))

    lines: list[tuple[str, object]] = [
        ("mode", config.mode), ("config_hash", config.config_hash()),
        ("seed", o["seed"]),
        ("alpha", params.alpha), ("beta", params.beta),
        ("gamma", params.gamma), ("delta", params.delta),
    ]
    if delayed:
        lines.append(("tau_ms", o["tau"]))
    lines += [
        ("x0", init.x), ("y0", init.y), ("t_end_ms", o["t_end"]),
        ("y_half", model.y_half),
        ("out_trajectory", o["out_trajectory"]), ("out_waveform", o["out_waveform"]),
    ]
    lines += _metrics_summary(metrics)
    _summary(lines)
    return EXIT_OK


def spectra_scan(model: LineshapeModel, detunings: np.ndarray,
                 charge_levels) -> list[tuple[float, float, float]]:
    """Evaluate the lineshape over a detuning grid at each charge level.

    Returns (detuning, level, transmission) rows, level-major, mirroring the
    low/high-charge envelope pair seen in locked spectra.
    """
    if len(detunings) == 0:
        raise ValueError("detuning grid must be non-empty")
    rows = []
    for level in charge_levels:
        values = lineshape(detunings, float(level), model)
        for det, val in zip(detunings, np.atleast_1d(values)):
            rows.append((float(det), float(level), float(val)))
    return rows


def _run_spectra(config: RunConfig) -> int:
    o = config.options
    model = _build_model(o, None)
    if o["detuning_points"] < 1 or o["detuning_max"] <= o["detuning_min"]:
        raise ConfigError("detuning grid must be non-empty and increasing")
    if not o["charge_levels"]:
        raise ConfigError("charge_levels must contain at least one level")
    if any(level < 0.0 for level in o["charge_levels"]):
        raise ConfigError("charge_levels must be non-negative")
    grid = np.linspace(o["detuning_min"], o["detuning_max"], o["detuning_points"])
    rows = spectra_scan(model, grid, o["charge_levels"])

    cols = list(zip(*rows))
    write_table(o["output"], "detuning_mhz,charge_level,transmission",
                cols, _provenance(config))

    shifts = [charge_shift(level, model) for level in o["charge_levels"]]
    lines = [("mode", config.mode), ("config_hash", config.config_hash()),
             ("seed", o["seed"]), ("output", o["output"]),
             ("n_levels", len(o["charge_levels"]))]
    for i, (level, shift) in enumerate(zip(o["charge_levels"], shifts)):
        lines.append((f"level{i}", level))
        lines.append((f"peak_detuning{i}_mhz", shift))
    lines.append(("peak_separation_mhz", abs(max(shifts) - min(shifts))))
    lines.append(("fwhm_mhz", model.fwhm))
    _summary(lines)
    return EXIT_OK


def _run_fit(config: RunConfig) -> int:
    o = config.options
    data = read_waveform(o["input"])
    guess_params = _build_params(o)
    try:
        guess_init = PopulationState(o["x0"], o["y0"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    model = _build_model(o, guess_params)
    try:
        problem = FitProblem(data=data, lineshape=model, tau=o["tau"],
                             constrain_beta_delta=o["constrain_beta_delta"],
                             fit_initial_state=o["fit_initial_state"],
                             free_lineshape=o["free_lineshape"],
                             integrator_step=o["integrator_step"])
        starts = MultiStart(params=guess_params, init=guess_init,
                            n_starts=o["n_starts"], spread=o["spread"],
                            seed=o["seed"], max_iterations=o["max_iterations"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    result = fit(problem, starts)

    if o["output"] is not None:
        fitted = predict(problem, result.params, result.init, result.lineshape)
        write_waveform(o["output"],
                       TransmissionWaveform(data.times.copy(), np.asarray(fitted)),
                       _provenance(config))

    lines = [("mode", config.mode), ("config_hash", config.config_hash()),
             ("seed", o["seed"]), ("input", o["input"]),
             ("alpha", result.params.alpha), ("beta", result.params.beta),
             ("gamma", result.params.gamma), ("delta", result.params.delta),
             ("x0", result.init.x), ("y0", result.init.y),
             ("residual", result.residual), ("converged", result.converged),
             ("iterations", result.iterations), ("start_index", result.start_index),
             ("n_penalized", result.n_penalized)]
    for name in sorted(result.sensitivity):
        lines.append((f"curvature_{name}", result.sensitivity[name]))
    for name in ("amplitude", "baseline", "y_half"):
        if name in problem.free_lineshape:
            lines.append((name, getattr(result.lineshape, name)))
    if o["output"] is not None:
        lines.append(("output", o["output"]))
    _summary(lines)
    return EXIT_OK


def _run_discriminate(config: RunConfig) -> int:
    o = config.options
    try:
        params = LvParams(o["alpha"], o["beta"], o["gamma_a"], o["delta"])
        init = PopulationState(o["x0"], o["y0"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    model = _build_model(o, params)
    detection = _build_detection(o)
    report = gamma_discrimination(params, o["gamma_a"], o["gamma_b"], o["window"],
                                  init, model, sample_interval=o["sample_interval"],
                                  detection=detection)

    pulse_index = np.arange(report.pulse_positions.size, dtype=float)
    write_table(o["output"], "pulse,t_peak_ms,rms_diff,drift_ms",
                (pulse_index, report.pulse_positions, report.pulse_rms,
                 report.peak_drift), _provenance(config))

    drift = report.peak_drift
    lines = [("mode", config.mode), ("config_hash", config.config_hash()),
             ("seed", o["seed"]),
             ("gamma_a", o["gamma_a"]), ("gamma_b", o["gamma_b"]),
             ("window_ms", o["window"]), ("pulse_count", report.pulse_positions.size),
             ("first_pulse_rms", report.first_pulse_rms),
             ("last_pulse_rms", report.last_pulse_rms),
             ("rms_ratio", report.rms_ratio),
             ("drift_non_decreasing", bool(np.all(np.diff(drift) >= -1e-12))),
             ("max_drift_ms", float(np.max(drift))),
             ("output", o["output"])]
    _summary(lines)
    return EXIT_OK


def _run_sense(config: RunConfig) -> int:
    o = config.options
    waveform = read_waveform(o["input"])
    if o["calibration"] is not None:
        cal = calibration_from_config(read_config(o["calibration"]))
    else:
        cal = FieldCalibration()
    estimate = field_from_waveform(waveform, cal, _build_detection(o))

    lines = [("mode", config.mode), ("config_hash", config.config_hash()),
             ("seed", o["seed"]), ("input", o["input"]),
             ("below_threshold", estimate.below_threshold),
             ("statement", estimate.statement)]
    if not estimate.below_threshold:
        lines += [("frequency_khz", estimate.frequency),
                  ("b_gauss", estimate.b),
                  ("uncertainty_gauss", estimate.uncertainty)]
    _summary(lines)
    if o["output"] is not None:
        report = {key: _fmt(value) for key, value in lines}
        write_config(o["output"], report)
    return EXIT_OK


def run(config: RunConfig) -> int:
    """Execute one mode; returns the process exit code."""
    handlers = {
        "simulate": lambda c: _run_simulate(c, delayed=False),
        "simulate-delayed": lambda c: _run_simulate(c, delayed=True),
        "spectra": _run_spectra,
        "fit": _run_fit,
        "discriminate": _run_discriminate,
        "sense": _run_sense,
    }
    return handlers[config.mode](config)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lvsense",
        description="Predator-prey oscillation toolkit: simulate, analyse, sense.")
    parser.add_argument("--version", action="version", version=f"lvsense {__version__}")
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode, keys in _MODE_KEYS.items():
        p = sub.add_parser(mode)
        p.add_argument("--config", default=None, help="flat key = value config file")
        for key in keys:
            p.add_argument(f"--{key.replace('_', '-')}", dest=key, default=None)
    return parser


def resolve_config(mode: str, config_path: str | None, flag_values: dict) -> RunConfig:
    """Merge defaults, config file and flags (flags win) into a RunConfig."""
    spec = _MODE_KEYS[mode]
    options: dict = {}
    if config_path is not None:
        for key, text in read_config(config_path).items():
            if key == "mode":
                if text.strip() != mode:
                    raise ConfigError(
                        f"config file mode {text.strip()!r} does not match subcommand {mode!r}")
                continue
            if key not in spec:
                raise ConfigError(f"unknown option {key!r} for mode {mode!r}")
            options[key] = _convert(key, spec[key][1], text)
    for key, text in flag_values.items():
        if text is None:
            continue
        options[key] = _convert(key, spec[key][1], text)
    return RunConfig(mode, options)


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    mode = args.mode
    flag_values = {key: getattr(args, key) for key in _MODE_KEYS[mode]}
    try:
        config = resolve_config(mode, args.config, flag_values)
        return run(config)
    except (ConfigError, CsvFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, PeriodError, WindowTooShortError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
