"""Transmon frequency model, dispersive readout shift and flux crosstalk."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "TransmonModel",
    "CrosstalkMatrix",
    "ReadoutResonator",
    "transmon_frequency",
    "dispersive_shift",
    "crosstalk_bias",
    "crosstalk_frequencies",
    "resonator_purcell_estimate",
    "load_crosstalk_matrix",
]


@dataclass(frozen=True)
class TransmonModel:
    """Asymmetric-SQUID transmon energies in GHz (ej1 >= ej2)."""

    ej1: float
    ej2: float
    ec: float

    def __post_init__(self):
        if not self.ej1 >= self.ej2 > 0:
            raise ValueError("junction energies must satisfy ej1 >= ej2 > 0")
        if self.ec <= 0:
            raise ValueError("charging energy must be positive")

    @property
    def asymmetry(self) -> float:
        return (self.ej1 - self.ej2) / (self.ej1 + self.ej2)


@dataclass(frozen=True)
class CrosstalkMatrix:
    """Linearized flux-bias response f = f0 + m (v - v0).

    m is in GHz/V over the in-use qubits; valid within about 100 MHz of
    the recorded working point (f0, v0).
    """

    m: np.ndarray
    f0: np.ndarray
    v0: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        f0 = np.asarray(self.f0, dtype=float)
        v0 = np.asarray(self.v0, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("crosstalk matrix must be square")
        if f0.shape != (m.shape[0],) or v0.shape != (m.shape[0],):
            raise ValueError("f0 and v0 must match the matrix size")
        if np.linalg.cond(m) >= 1e6:
            raise ValueError("crosstalk matrix is too ill-conditioned to invert")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "f0", f0)
        object.__setattr__(self, "v0", v0)


@dataclass(frozen=True)
class ReadoutResonator:
    """Readout resonator: bare frequency (GHz), coupling (MHz), qualities."""

    f_r: float
    g: float
    qi: float
    qe: float

    def __post_init__(self):
        if min(self.f_r, self.g, self.qi, self.qe) <= 0:
            raise ValueError("resonator parameters must be positive")


def transmon_frequency(model: TransmonModel, flux: float) -> float:
    """Leading-order qubit frequency (GHz) versus flux in units of Phi0.

    f01 = sqrt(8 Ec Ej(flux)) - Ec with the SQUID's flux-tunable
    Ej(flux) = (Ej1 + Ej2) sqrt(cos^2 + d^2 sin^2)(pi flux); maximum at
    integer flux, minimum at half-integer.
    """
    angle = math.pi * flux
    ej_total = model.ej1 + model.ej2
    ej = ej_total * math.sqrt(
        math.cos(angle) ** 2 + model.asymmetry**2 * math.sin(angle) ** 2
    )
    return math.sqrt(8.0 * model.ec * ej) - model.ec


def dispersive_shift(g: float, delta: float, eta: float) -> float:
    """Qubit-state readout shift chi (MHz) for coupling g (MHz).

    chi = g^2 eta / (Delta (Delta + eta)) with qubit-resonator detuning
    Delta (GHz) and transmon anharmonicity eta (MHz, negative); the
    straddling regime (resonator between the two transmon transitions)
    is rejected.
    """
    eta_ghz = eta * 1e-3
    if delta == 0 or delta + eta_ghz == 0:
        raise ZeroDivisionError("dispersive formula diverges on resonance")
    if (delta > 0) != (delta + eta_ghz > 0):
        raise ValueError("resonator straddles the transmon transitions")
    g_ghz = g * 1e-3
    return 1e3 * g_ghz**2 * eta_ghz / (delta * (delta + eta_ghz))


def crosstalk_frequencies(ct: CrosstalkMatrix, voltages) -> np.ndarray:
    """Qubit frequencies (GHz) at the given bias voltages."""
    voltages = np.asarray(voltages, dtype=float)
    return ct.f0 + ct.m @ (voltages - ct.v0)


def crosstalk_bias(ct: CrosstalkMatrix, f_target) -> np.ndarray:
    """Bias voltages steering the qubits to the target frequencies (GHz).

    Inverts the linearized response: v = v0 + m^-1 (f - f0).  Targets
    more than 100 MHz from the recorded working point draw a warning
    (the interpolation is local).
    """
    f_target = np.asarray(f_target, dtype=float)
    if f_target.shape != ct.f0.shape:
        raise ValueError("target frequency vector size mismatch")
    shift = f_target - ct.f0
    if np.max(np.abs(shift)) > 0.100:
        warnings.warn(
            "target is more than 100 MHz from the linearization point", stacklevel=2
        )
    return ct.v0 + np.linalg.solve(ct.m, shift)


def resonator_purcell_estimate(res: ReadoutResonator, f_q: float) -> float:
    """Order-of-magnitude resonator-induced decay rate (kHz).

    (g/Delta)^2 * kappa_e with kappa_e = f_r / Q_e; treated as an
    estimator only (multi-mode and internal-loss corrections are not
    modeled).
    """
    delta = f_q - res.f_r
    if delta == 0:
        raise ZeroDivisionError("qubit resonant with the readout resonator")
    kappa_e_ghz = res.f_r / res.qe
    return (res.g * 1e-3 / delta) ** 2 * kappa_e_ghz * 1e6


def load_crosstalk_matrix(path) -> CrosstalkMatrix:
    """Read a crosstalk matrix from JSON: m (row-major), f0 (GHz), v0 (V)."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    for key in ("m", "f0", "v0"):
        if key not in payload:
            raise ValueError(f"crosstalk file missing key {key!r}")
    n = len(payload["f0"])
    m = np.asarray(payload["m"], dtype=float).reshape(n, n)
    return CrosstalkMatrix(m=m, f0=payload["f0"], v0=payload["v0"])
