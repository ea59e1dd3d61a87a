"""Plain-text data and configuration formats.

Trajectory files are CSV with header ``t_ms,x,y``; waveform files use
``t_ms,transmission``. Lines starting with ``#`` are comments (used for
provenance) and floats are written with shortest round-trip precision, so
write-then-read reproduces the in-memory doubles exactly. Config files are
flat ``key = value`` lines with ``#`` comments.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .core import LvParams, Trajectory
from .field_sensing import FieldCalibration
from .observables import TransmissionWaveform

__all__ = [
    "CsvFormatError",
    "ConfigError",
    "write_table",
    "write_trajectory",
    "read_trajectory",
    "write_waveform",
    "read_waveform",
    "read_config",
    "write_config",
    "calibration_to_config",
    "calibration_from_config",
]


class CsvFormatError(ValueError):
    """Malformed data file; carries 1-based line and column of the problem."""

    def __init__(self, path, line: int, column: int, message: str):
        super().__init__(f"{path}: line {line}, column {column}: {message}")
        self.path = str(path)
        self.line = line
        self.column = column


class ConfigError(ValueError):
    """Malformed configuration file or unknown/invalid key."""


def write_table(path, header: str, columns, comments: dict[str, str] | None = None) -> None:
    """Write float columns as CSV with an optional '#' comment block.

    Values use shortest round-trip precision, as in the trajectory and
    waveform formats.
    """
    lines = []
    if comments:
        for key, value in comments.items():
            lines.append(f"# {key}={value}")
    lines.append(header)
    for row in zip(*columns):
        lines.append(",".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _read_columns(path, expected_header: str) -> list[list[float]]:
    n_cols = expected_header.count(",") + 1
    columns: list[list[float]] = [[] for _ in range(n_cols)]
    header_seen = False
    prev_t = None
    with open(path, "r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if not header_seen:
                if line != expected_header:
                    raise CsvFormatError(path, lineno, 1,
                                         f"expected header {expected_header!r}, got {line!r}")
                header_seen = True
                continue
            fields = line.split(",")
            if len(fields) != n_cols:
                raise CsvFormatError(path, lineno, len(fields),
                                     f"expected {n_cols} columns, got {len(fields)}")
            for col, text in enumerate(fields, start=1):
                try:
                    value = float(text)
                except ValueError:
                    raise CsvFormatError(path, lineno, col,
                                         f"not a number: {text.strip()!r}") from None
                if not np.isfinite(value):
                    raise CsvFormatError(path, lineno, col, f"non-finite value: {text.strip()!r}")
                columns[col - 1].append(value)
            t = columns[0][-1]
            if prev_t is not None and t <= prev_t:
                raise CsvFormatError(path, lineno, 1,
                                     f"t_ms not strictly increasing: {t!r} after {prev_t!r}")
            prev_t = t
    if not header_seen:
        raise CsvFormatError(path, 1, 1, "missing header line")
    if len(columns[0]) < 2:
        raise CsvFormatError(path, 1, 1, "need at least 2 data rows")
    return columns


def write_trajectory(path, traj: Trajectory, comments: dict[str, str] | None = None) -> None:
    write_table(path, "t_ms,x,y", (traj.times, traj.x, traj.y), comments)


def read_trajectory(path) -> Trajectory:
    t, x, y = _read_columns(path, "t_ms,x,y")
    return Trajectory(np.array(t), np.array(x), np.array(y))


def write_waveform(path, w: TransmissionWaveform, comments: dict[str, str] | None = None) -> None:
    write_table(path, "t_ms,transmission", (w.times, w.values), comments)


def read_waveform(path) -> TransmissionWaveform:
    t, v = _read_columns(path, "t_ms,transmission")
    return TransmissionWaveform(np.array(t), np.array(v))


def read_config(path) -> dict[str, str]:
    """Parse a flat key = value file; later duplicate keys are rejected."""
    out: dict[str, str] = {}
    with open(path, "r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}: line {lineno}: expected 'key = value', got {line!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if not key:
                raise ConfigError(f"{path}: line {lineno}: empty key")
            if key in out:
                raise ConfigError(f"{path}: line {lineno}: duplicate key {key!r}")
            out[key] = value
    return out


def write_config(path, values: dict[str, str]) -> None:
    lines = [f"{key} = {value}" for key, value in values.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def calibration_to_config(cal: FieldCalibration) -> dict[str, str]:
    """Flatten a calibration into config keys (anchors indexed anchor0_*, ...)."""
    out = {
        "freq_slope": repr(cal.freq_slope),
        "freq_slope_err": repr(cal.freq_slope_err),
        "threshold_b": repr(cal.threshold_b),
        "n_anchors": str(len(cal.param_anchors)),
    }
    for i, (b, p) in enumerate(cal.param_anchors):
        out[f"anchor{i}_b"] = repr(b)
        out[f"anchor{i}_alpha"] = repr(p.alpha)
        out[f"anchor{i}_beta"] = repr(p.beta)
        out[f"anchor{i}_gamma"] = repr(p.gamma)
        out[f"anchor{i}_delta"] = repr(p.delta)
    return out


def calibration_from_config(values: dict[str, str]) -> FieldCalibration:
    """Inverse of calibration_to_config; unknown keys are rejected."""
    try:
        n = int(values["n_anchors"])
    except KeyError:
        raise ConfigError("calibration config missing 'n_anchors'") from None
    except ValueError:
        raise ConfigError(f"n_anchors must be an integer, got {values['n_anchors']!r}") from None
    expected = {"freq_slope", "freq_slope_err", "threshold_b", "n_anchors"}
    for i in range(n):
        expected |= {f"anchor{i}_{f}" for f in ("b", "alpha", "beta", "gamma", "delta")}
    unknown = set(values) - expected
    if unknown:
        raise ConfigError(f"unknown calibration keys: {sorted(unknown)}")
    missing = expected - set(values)
    if missing:
        raise ConfigError(f"missing calibration keys: {sorted(missing)}")

    def num(key: str) -> float:
        try:
            return float(values[key])
        except ValueError:
            raise ConfigError(f"{key} must be a number, got {values[key]!r}") from None

    anchors = tuple(
        (num(f"anchor{i}_b"),
         LvParams(num(f"anchor{i}_alpha"), num(f"anchor{i}_beta"),
                  num(f"anchor{i}_gamma"), num(f"anchor{i}_delta")))
        for i in range(n))
    return FieldCalibration(freq_slope=num("freq_slope"),
                            freq_slope_err=num("freq_slope_err"),
                            threshold_b=num("threshold_b"),
                            param_anchors=anchors)
