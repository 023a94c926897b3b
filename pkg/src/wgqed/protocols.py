"""Pulse-sequence simulations of probe / atomic-cavity experiments.

Sequences are piecewise-constant: flux steps are instantaneous detuning
changes and state preparation pulses are idealized as instantaneous
rotations of the probe (a resonant-drive segment is available for finite
pulses).  Public time arguments and TimeTrace records are in ns; the
underlying master-equation work runs in us.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit

from . import core, lindblad
from .records import FitResult, TimeTrace

__all__ = [
    "Segment",
    "PulseSequence",
    "CompoundResult",
    "FitConvergenceError",
    "run_sequence",
    "rotate_qubit",
    "dark_state_vector",
    "dark_population",
    "interaction_detuning",
    "iswap_duration_ns",
    "iswap",
    "simulate_vacuum_rabi",
    "simulate_t1_dark",
    "simulate_ramsey_dark",
    "simulate_two_excitation",
    "linear_cavity_model",
    "simulate_compound_mirrors",
    "fit_exponential",
    "fit_damped_sinusoid",
]

TWO_PI = 2.0 * math.pi

# default parking offset (MHz) that decouples the probe during waits
PARK_DETUNING = -50.0


class FitConvergenceError(RuntimeError):
    """Trace fit failed; carries the best parameters found so far."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class Segment:
    """One piecewise-constant interval of a pulse sequence."""

    duration_ns: float
    detunings: tuple[float, ...]
    drives: tuple[tuple[int, float, float], ...] = ()

    def __post_init__(self):
        if not (self.duration_ns > 0 and math.isfinite(self.duration_ns)):
            raise ValueError(f"segment duration must be positive, got {self.duration_ns}")
        for value in self.detunings:
            if not math.isfinite(value):
                raise ValueError("segment detunings must be finite")
        for _, omega, phase in self.drives:
            if not (math.isfinite(omega) and math.isfinite(phase)):
                raise ValueError("segment drives must be finite")


@dataclass(frozen=True)
class PulseSequence:
    segments: tuple[Segment, ...]
    readout: str = "probe_population"


@dataclass(frozen=True)
class CompoundResult:
    """Probe Rabi traces against the two compound dark states."""

    traces: tuple[TimeTrace, TimeTrace]
    splitting_mhz: float
    dark_frequencies: tuple[float, float]


def _require_probe(spec: core.SystemSpec) -> int:
    if spec.probe_index is None:
        raise ValueError("spec has no designated probe qubit")
    return spec.probe_index


def rotate_qubit(rho: np.ndarray, basis, qubit: int, angle: float, axis_phase: float = 0.0):
    """Apply an instantaneous rotation about an equatorial axis to one qubit."""
    if basis.truncated:
        raise ValueError("rotations need the full product space")
    sx = basis.lowering(qubit) + basis.raising(qubit)
    sy = 1j * (basis.raising(qubit) - basis.lowering(qubit))
    axis = math.cos(axis_phase) * sx + math.sin(axis_phase) * sy
    unitary = math.cos(angle / 2.0) * np.eye(basis.dimension) - 1j * math.sin(angle / 2.0) * axis
    return unitary @ rho @ unitary.conj().T


def dark_state_vector(spec: core.SystemSpec, basis) -> np.ndarray:
    """Single-excitation dark state of the mirror array in the full space."""
    probe = _require_probe(spec)
    mirrors = list(spec.mirror_indices)
    gamma = core.waveguide_decay_matrix(spec)[np.ix_(mirrors, mirrors)]
    values, vectors = np.linalg.eigh(gamma)
    weights = vectors[:, np.argmin(values)]
    vec = np.zeros(basis.dimension, dtype=complex)
    for w, m in zip(weights, mirrors):
        vec += w * basis.basis_vector(1 << m)
    return vec / np.linalg.norm(vec)


def dark_population(spec: core.SystemSpec, basis, rho: np.ndarray) -> float:
    """Population of the single-excitation mirror dark state."""
    dark = dark_state_vector(spec, basis)
    return float(np.real(np.vdot(dark, rho @ dark)))


def _segment_model(spec, segment, max_excitations=None):
    drives = tuple(
        (q, omega * complex(math.cos(phase), math.sin(phase)))
        for q, omega, phase in segment.drives
    )
    return lindblad.build_model(
        spec, detunings=segment.detunings, drives=drives, max_excitations=max_excitations
    )


def run_sequence(spec: core.SystemSpec, sequence: PulseSequence, rho0) -> lindblad.DensityMatrix:
    """Evolve an initial state through every segment of a sequence."""
    rho = rho0.elements if isinstance(rho0, lindblad.DensityMatrix) else np.asarray(rho0)
    for segment in sequence.segments:
        model = _segment_model(spec, segment)
        rho = lindblad.evolve(model, rho, np.array([0.0, segment.duration_ns * 1e-3]))[-1].elements
    return lindblad.DensityMatrix(rho)


def _probe_excited(spec, basis):
    return np.outer(
        basis.basis_vector(1 << spec.probe_index),
        basis.basis_vector(1 << spec.probe_index).conj(),
    )


def interaction_detuning(spec: core.SystemSpec) -> float:
    """Probe detuning from the mean mirror frequency (MHz)."""
    probe = spec.probe_index
    mirror_detunings = [spec.detunings[m] for m in spec.mirror_indices]
    return spec.detunings[probe] - float(np.mean(mirror_detunings))


def iswap_duration_ns(spec: core.SystemSpec) -> float:
    """Half a Rabi period at the generalized oscillation frequency.

    At zero probe-dark detuning this is 1/(4J) in us, i.e. the hold time
    that transfers the probe excitation into the dark state; with a
    residual detuning the first transfer maximum arrives at the
    generalized frequency sqrt((2J)^2 + delta^2) instead.
    """
    two_j = core.probe_dark_coupling(spec)
    if two_j <= 0:
        raise ValueError("probe is not coupled to the dark state")
    f_osc = math.hypot(two_j, interaction_detuning(spec))
    return 1e3 / (2.0 * f_osc)


def iswap(spec: core.SystemSpec) -> tuple[PulseSequence, lindblad.DensityMatrix]:
    """Resonant hold transferring the probe excitation to the dark state.

    Returns the one-segment sequence and the state it produces from an
    initially excited probe; the transferred population approaches
    1 - O(1/C) for a lossless system.
    """
    _require_probe(spec)
    duration = iswap_duration_ns(spec)
    sequence = PulseSequence(
        segments=(Segment(duration, tuple(spec.detunings)),), readout="dark_population"
    )
    basis = lindblad.ProductBasis(spec.n_qubits)
    final = run_sequence(spec, sequence, _probe_excited(spec, basis))
    return sequence, final


def simulate_vacuum_rabi(spec: core.SystemSpec, taus, probe_detuning=None) -> TimeTrace:
    """Probe population after preparing |e>_p and holding for each tau (ns).

    probe_detuning (MHz) overrides the probe entry of spec.detunings; far
    detuning gives the free-decay reference trace.
    """
    probe = _require_probe(spec)
    taus = np.asarray(taus, dtype=float)
    if probe_detuning is not None:
        detunings = list(spec.detunings)
        detunings[probe] = probe_detuning
        spec = spec.with_detunings(detunings)
    model = lindblad.build_model(spec)
    basis = model.basis
    number_op = basis.number(probe)
    states = lindblad.evolve(model, _probe_excited(spec, basis), taus * 1e-3)
    values = [state.population(number_op) for state in states]
    return TimeTrace(taus, np.array(values), metadata={"observable": "probe_population"})


def _staged_wait_protocol(spec, wait_spec, delays_ns, prepare, finish, measure):
    """Shared engine: resonant swap, variable wait, resonant swap, readout.

    The wait Liouvillian is time-independent, so a single integration pass
    over the delay grid yields every intermediate state.
    """
    delays_ns = np.asarray(delays_ns, dtype=float)
    swap_us = iswap_duration_ns(spec) * 1e-3
    model = lindblad.build_model(spec)
    basis = model.basis
    rho = prepare(basis)
    rho = lindblad.evolve(model, rho, np.array([0.0, swap_us]))[-1].elements

    grid_us = delays_ns * 1e-3
    prepend = grid_us.size == 0 or grid_us[0] > 0.0
    if prepend:
        grid_us = np.concatenate(([0.0], grid_us))
    wait_model = lindblad.build_model(wait_spec)
    waited = lindblad.evolve(wait_model, rho, grid_us)
    if prepend:
        waited = waited[1:]

    values = []
    for state in waited:
        back = lindblad.evolve(model, state.elements, np.array([0.0, swap_us]))[-1].elements
        values.append(measure(finish(back, basis), basis))
    return np.array(values)


def simulate_t1_dark(
    spec: core.SystemSpec, delays, park_detuning: float = PARK_DETUNING, fit: bool = True
) -> tuple[TimeTrace, FitResult | None]:
    """Dark-state population decay: excite, swap in, wait, swap out, read.

    The probe is parked at park_detuning (MHz) during the wait.  Returns
    the probe-population trace over the delays (ns) and its exponential
    fit; the fitted rate_mhz estimates the dark-state decay rate.  Fit
    failures propagate unless fit=False (e.g. a decay-free trace).
    """
    probe = _require_probe(spec)
    park = list(spec.detunings)
    park[probe] = park_detuning
    number_op = lindblad.ProductBasis(spec.n_qubits).number(probe)
    values = _staged_wait_protocol(
        spec,
        spec.with_detunings(park),
        delays,
        prepare=lambda basis: _probe_excited(spec, basis),
        finish=lambda rho, basis: rho,
        measure=lambda rho, basis: float(np.real(np.trace(number_op @ rho))),
    )
    trace = TimeTrace(np.asarray(delays, float), values, metadata={"observable": "probe_population"})
    return trace, fit_exponential(trace) if fit else None


def simulate_ramsey_dark(
    spec: core.SystemSpec,
    delays,
    artificial_detuning: float = 2.0,
    park_detuning: float = PARK_DETUNING,
) -> tuple[TimeTrace, FitResult]:
    """Dark-state Ramsey fringes: half swap in, wait, half swap out.

    A half-rotation puts the probe in superposition, a full swap maps its
    excited component onto the dark state, the mirrors run at the
    artificial detuning (MHz) during the wait, and the returning
    coherence is converted to population by a final half-rotation.  The
    damped-sinusoid fit rate_mhz estimates the dark-state decoherence.
    """
    probe = _require_probe(spec)
    wait = [d + artificial_detuning for d in spec.detunings]
    wait[probe] = park_detuning
    values = _staged_wait_protocol(
        spec,
        spec.with_detunings(wait),
        delays,
        prepare=lambda basis: rotate_qubit(
            _ground_state(basis), basis, probe, math.pi / 2.0
        ),
        finish=lambda rho, basis: rotate_qubit(rho, basis, probe, math.pi / 2.0),
        measure=lambda rho, basis: float(np.real(np.trace(basis.number(probe) @ rho))),
    )
    trace = TimeTrace(np.asarray(delays, float), values, metadata={"observable": "probe_population"})
    fit = fit_damped_sinusoid(trace)
    return trace, fit


def _ground_state(basis):
    vec = basis.ground_vector()
    return np.outer(vec, vec.conj())


def simulate_two_excitation(spec: core.SystemSpec, taus) -> tuple[TimeTrace, TimeTrace]:
    """Probe dynamics with a second excitation loaded into the cavity.

    After a swap stores one excitation in the dark state, the probe is
    re-excited and evolved for each tau (ns).  The companion trace runs
    the same protocol against an equivalent linear cavity (bosonic mode
    with the same coupling and dark-state loss), which oscillates sqrt(2)
    faster instead of damping out.
    """
    probe = _require_probe(spec)
    taus = np.asarray(taus, dtype=float)
    swap_us = iswap_duration_ns(spec) * 1e-3
    model = lindblad.build_model(spec)
    basis = model.basis
    rho = _probe_excited(spec, basis)
    rho = lindblad.evolve(model, rho, np.array([0.0, swap_us]))[-1].elements
    rho = rotate_qubit(rho, basis, probe, math.pi)
    number_op = basis.number(probe)
    states = lindblad.evolve(model, rho, taus * 1e-3)
    atomic = TimeTrace(
        taus,
        np.array([state.population(number_op) for state in states]),
        metadata={"observable": "probe_population", "system": "atomic_cavity"},
    )

    cavity_model, ops = linear_cavity_model(spec)
    rho_c = np.outer(ops["excited_one_photon"], ops["excited_one_photon"].conj())
    states = lindblad.evolve(cavity_model, rho_c, taus * 1e-3)
    companion = TimeTrace(
        taus,
        np.array([state.population(ops["probe_number"]) for state in states]),
        metadata={"observable": "probe_population", "system": "linear_cavity"},
    )
    return atomic, companion


def linear_cavity_model(spec: core.SystemSpec) -> tuple[lindblad.LindbladModel, dict]:
    """Equivalent linear-cavity system: probe qubit + 3-level bosonic mode.

    The mode inherits the probe-dark coupling (2J) and the dark-state
    loss of the mirror array; returns the model and its operators.
    """
    probe = _require_probe(spec)
    params = spec.params[probe]
    mirror = spec.params[spec.mirror_indices[0]]
    correlated = 0.0
    for i, j, rate in spec.dephasing_correlations:
        if probe not in (i, j):
            correlated = rate
    kappa, _ = lindblad.dark_state_rates(mirror.gamma_loss, mirror.gamma_phi, correlated)
    coupling_j = core.probe_dark_coupling(spec) / 2.0
    delta = interaction_detuning(spec)

    qubit_eye, mode_eye = np.eye(2), np.eye(3)
    lower_q = np.kron(np.array([[0.0, 1.0], [0.0, 0.0]]), mode_eye)
    annihilate = np.kron(qubit_eye, np.diag(np.sqrt([1.0, 2.0]), k=1))
    number_q = lower_q.T @ lower_q
    ham = TWO_PI * (
        delta * number_q + coupling_j * (lower_q.T @ annihilate + annihilate.T @ lower_q)
    )
    dissipators = [(lower_q, params.gamma_1)]
    if kappa > 0:
        dissipators.append((annihilate, kappa))
    if params.gamma_phi > 0:
        sz_q = np.kron(np.diag([-1.0, 1.0]), mode_eye)
        dissipators.append((sz_q, params.gamma_phi / 2.0))
    model = lindblad.LindbladModel(6, ham, tuple(dissipators))
    excited_one = np.zeros(6, dtype=complex)
    excited_one[1 * 3 + 1] = 1.0
    ops = {
        "probe_number": number_q,
        "mode_number": annihilate.T @ annihilate,
        "excited_one_photon": excited_one,
    }
    return model, ops


def simulate_compound_mirrors(spec: core.SystemSpec, taus) -> CompoundResult:
    """Probe Rabi traces against each dark state of compound mirror pairs.

    The two sub-radiant modes of the four-qubit mirror block are located
    from the effective Hamiltonian (their separation is
    sqrt(4 g^2 + delta^2) for direct coupling g and pair detuning delta);
    the probe is tuned onto each in turn and its population recorded over
    the taus grid (ns).
    """
    probe = _require_probe(spec)
    if len(spec.mirror_indices) != 4 or not spec.direct_couplings:
        raise ValueError("compound-mirror spec needs four directly coupled mirrors")
    taus = np.asarray(taus, dtype=float)
    mirrors = list(spec.mirror_indices)
    block = core.build_effective_hamiltonian(spec)[np.ix_(mirrors, mirrors)]
    values, vectors = np.linalg.eig(block)
    decays = -2.0 * values.imag
    couplings = np.abs(
        core.exchange_matrix(spec)[probe, mirrors] @ vectors
    )
    # sub-radiant modes only; prefer the ones the probe actually talks to
    # (at zero pair detuning one of the dark pair decouples exactly)
    sub_radiant = np.argsort(decays)[:-1]
    ranked = sorted(sub_radiant, key=lambda k: -couplings[k])[:2]
    dark_freqs = tuple(sorted(float(values[k].real) for k in ranked))
    splitting = abs(dark_freqs[1] - dark_freqs[0])

    traces = []
    for freq in dark_freqs:
        detunings = list(spec.detunings)
        detunings[probe] = freq
        tuned = spec.with_detunings(detunings)
        model = lindblad.build_model(tuned, max_excitations=1)
        basis = model.basis
        number_op = basis.number(probe)
        states = lindblad.evolve(model, _probe_excited(tuned, basis), taus * 1e-3)
        traces.append(
            TimeTrace(
                taus,
                np.array([state.population(number_op) for state in states]),
                metadata={"observable": "probe_population", "dark_frequency_mhz": freq},
            )
        )
    return CompoundResult(tuple(traces), splitting, dark_freqs)


def _rate_from_lifetime(lifetime_ns, sigma_ns):
    rate = 1e3 / (TWO_PI * lifetime_ns)
    return rate, rate * sigma_ns / lifetime_ns if lifetime_ns > 0 else math.inf


def fit_exponential(trace: TimeTrace) -> FitResult:
    """Least-squares fit of a * exp(-t/T) + c to a time trace."""
    t, y = trace.times, trace.values
    if t.size < 8:
        raise FitConvergenceError("need at least 8 points for an exponential fit")
    spread = float(np.ptp(y))
    if spread < 1e-9 * max(1.0, float(np.max(np.abs(y)))):
        raise FitConvergenceError("constant trace: decay rate is unidentifiable")
    offset0 = float(y[-1])
    amp0 = float(y[0] - offset0)
    shifted = np.abs(y - offset0)
    above = shifted > abs(amp0) / math.e
    t_half = t[above][-1] if np.any(above) else t[t.size // 3]
    lifetime0 = max(float(t_half - t[0]), (t[-1] - t[0]) / 20.0)

    def model(t, amp, lifetime, offset):
        return amp * np.exp(-t / lifetime) + offset

    try:
        params, cov = curve_fit(
            model, t, y, p0=[amp0, lifetime0, offset0], maxfev=20000
        )
    except RuntimeError as err:
        raise FitConvergenceError(f"exponential fit failed: {err}") from err
    sigmas = np.sqrt(np.abs(np.diag(cov)))
    residual = float(np.linalg.norm(model(t, *params) - y))
    rate, rate_sigma = _rate_from_lifetime(params[1], sigmas[1])
    return FitResult(
        model="exponential",
        parameters={
            "amplitude": (float(params[0]), float(sigmas[0])),
            "lifetime_ns": (float(params[1]), float(sigmas[1])),
            "offset": (float(params[2]), float(sigmas[2])),
            "rate_mhz": (rate, rate_sigma),
        },
        residual_norm=residual,
    )


def fit_damped_sinusoid(trace: TimeTrace) -> FitResult:
    """Least-squares fit of a * exp(-t/T) * cos(2 pi f t + phi) + c."""
    t, y = trace.times, trace.values
    if t.size < 8:
        raise FitConvergenceError("need at least 8 points for a sinusoid fit")
    steps = np.diff(t)
    if np.max(np.abs(steps - steps[0])) > 1e-6 * steps[0]:
        raise FitConvergenceError("sinusoid fit needs a uniform time grid")
    spectrum = np.fft.rfft(y - np.mean(y))
    freqs_mhz = np.fft.rfftfreq(t.size, d=steps[0] * 1e-3)
    # bins 0-1 hold the leakage of any decaying baseline, and a legitimate
    # fit needs two visible periods (>= bin 2) anyway; prefer the
    # strongest local maximum there over a bare argmax
    magnitude = np.abs(spectrum)
    interior = np.arange(2, magnitude.size - 1)
    local_max = interior[
        (magnitude[interior] >= magnitude[interior - 1])
        & (magnitude[interior] >= magnitude[interior + 1])
    ]
    if local_max.size:
        peak = int(local_max[np.argmax(magnitude[local_max])])
    else:
        peak = int(np.argmax(magnitude[2:])) + 2
    if 1 <= peak < spectrum.size - 1:  # parabolic sub-bin refinement
        magnitudes = np.abs(spectrum[peak - 1 : peak + 2])
        denom = magnitudes[0] - 2 * magnitudes[1] + magnitudes[2]
        shift = 0.5 * (magnitudes[0] - magnitudes[2]) / denom if denom else 0.0
        f0 = float(freqs_mhz[peak] + shift * (freqs_mhz[1] - freqs_mhz[0]))
    else:
        f0 = float(freqs_mhz[peak])
    span_us = (t[-1] - t[0]) * 1e-3
    if f0 * span_us < 2.0:
        raise FitConvergenceError(
            f"fewer than two visible periods (f ~ {f0:.3g} MHz over {span_us:.3g} us)"
        )
    phi0 = float(np.angle(spectrum[peak]))

    # subtract a one-period moving average before fitting: baselines of
    # any slowly varying shape are suppressed, while the fringe passes
    # through with its frequency and envelope intact (damped exponentials
    # are eigenfunctions of the filter); half a window is trimmed at each
    # edge, and a plain constant-offset model would instead let the
    # optimizer absorb the baseline into a spurious detuned cosine
    period_samples = int(round(1e3 / (f0 * float(steps[0]))))
    period_samples = max(3, min(period_samples, t.size // 2))
    if t.size - period_samples >= 12:
        smooth = np.convolve(y, np.ones(period_samples) / period_samples, mode="valid")
        start = (period_samples - 1) // 2
        window = slice(start, start + smooth.size)
        t_fit = t[window]
        y_fit = y[window] - smooth
    else:
        t_fit, y_fit = t, y - float(np.mean(y))
    amp0 = float(np.ptp(y_fit)) / 2.0
    if amp0 <= 0:
        raise FitConvergenceError("no oscillation amplitude left after detrending")

    def model(t, amp, lifetime, f, phi, offset):
        return amp * np.exp(-t / lifetime) * np.cos(TWO_PI * f * t * 1e-3 + phi) + offset

    span_ns = span_us * 1e3
    bounds = ([-np.inf, 1e-3, 0.0, -np.inf, -np.inf], [np.inf] * 5)
    best = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for phase_guess in (phi0, 0.0, math.pi / 2.0, math.pi, -math.pi / 2.0):
            for lifetime_guess in (span_ns / 2.0, span_ns * 5.0):
                p0 = [amp0, lifetime_guess, f0, phase_guess, 0.0]
                try:
                    params, cov = curve_fit(
                        model, t_fit, y_fit, p0=p0, bounds=bounds, maxfev=20000
                    )
                except RuntimeError:
                    continue
                residual = float(np.linalg.norm(model(t_fit, *params) - y_fit))
                if best is None or residual < best[2]:
                    best = (params, cov, residual)
    if best is None:
        raise FitConvergenceError(
            "sinusoid fit failed from every starting point",
            best=(amp0, span_ns / 2.0, f0, phi0, 0.0),
        )
    params, cov, residual = best
    params = list(params)
    if params[0] < 0:  # fold the sign into the phase
        params[0] = -params[0]
        params[3] += math.pi
    if params[2] * span_us < 2.0:
        raise FitConvergenceError(
            f"fewer than two visible periods (fit found {params[2]:.3g} MHz "
            f"over {span_us:.3g} us)",
            best=tuple(params),
        )
    sigmas = np.sqrt(np.abs(np.diag(cov)))
    rate, rate_sigma = _rate_from_lifetime(params[1], sigmas[1])
    return FitResult(
        model="damped-sinusoid",
        parameters={
            "amplitude": (float(params[0]), float(sigmas[0])),
            "lifetime_ns": (float(params[1]), float(sigmas[1])),
            "frequency_mhz": (float(params[2]), float(sigmas[2])),
            "phase_rad": (float(params[3]), float(sigmas[3])),
            "offset": (float(params[4]), float(sigmas[4])),
            "rate_mhz": (rate, rate_sigma),
        },
        residual_norm=residual,
    )
