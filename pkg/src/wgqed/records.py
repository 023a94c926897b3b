"""Result records (spectra, time traces, fits) and their file formats.

CSV files are UTF-8 with LF line endings and %.12e numeric formatting so
repeated runs of the same configuration are byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SpectrumScan",
    "TimeTrace",
    "FitResult",
    "write_scan_csv",
    "write_trace_csv",
    "fit_result_json",
]

_FMT = "%.12e"


@dataclass(frozen=True)
class SpectrumScan:
    """Complex transmission amplitude versus drive detuning (MHz)."""

    detunings: np.ndarray
    t_complex: np.ndarray
    metadata: dict = field(default_factory=dict)
    drive: object | None = None

    def __post_init__(self):
        det = np.asarray(self.detunings, dtype=float)
        t = np.asarray(self.t_complex, dtype=complex)
        if det.shape != t.shape or det.ndim != 1:
            raise ValueError("detunings and t_complex must be equal-length 1D arrays")
        object.__setattr__(self, "detunings", det)
        object.__setattr__(self, "t_complex", t)

    @property
    def abs_t(self) -> np.ndarray:
        return np.abs(self.t_complex)

    @property
    def abs_t_sq(self) -> np.ndarray:
        return np.abs(self.t_complex) ** 2


@dataclass(frozen=True)
class TimeTrace:
    """Real-valued observable (population or coherence) versus time in ns."""

    times: np.ndarray
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1:
            raise ValueError("times and values must be equal-length 1D arrays")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class FitResult:
    """Least-squares fit output with one-sigma parameter uncertainties."""

    model: str
    parameters: dict[str, tuple[float, float]]
    residual_norm: float

    def __post_init__(self):
        for name, (value, sigma) in self.parameters.items():
            if sigma < 0 or not np.isfinite(value):
                raise ValueError(f"bad fit parameter {name}: {value} +/- {sigma}")

    def value(self, name: str) -> float:
        return self.parameters[name][0]

    def sigma(self, name: str) -> float:
        return self.parameters[name][1]


def _metadata_lines(metadata: dict) -> list[str]:
    return [f"# {key}={metadata[key]}" for key in sorted(metadata)]


def write_scan_csv(scan: SpectrumScan, path) -> None:
    lines = _metadata_lines(scan.metadata)
    lines.append("detuning_mhz,re_t,im_t,abs_t,abs_t_sq")
    for d, t in zip(scan.detunings, scan.t_complex):
        row = (d, t.real, t.imag, abs(t), abs(t) ** 2)
        lines.append(",".join(_FMT % x for x in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_trace_csv(trace: TimeTrace, path) -> None:
    lines = _metadata_lines(trace.metadata)
    lines.append("time_ns,value")
    for t, v in zip(trace.times, trace.values):
        lines.append(",".join(_FMT % x for x in (t, v)))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def fit_result_json(fit: FitResult) -> str:
    payload = {
        "model": fit.model,
        "parameters": {
            name: {"value": value, "uncertainty": sigma}
            for name, (value, sigma) in sorted(fit.parameters.items())
        },
        "residual_norm": fit.residual_norm,
    }
    return json.dumps(payload, indent=2, sort_keys=True)
