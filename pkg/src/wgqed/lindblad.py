"""Master-equation assembly, time evolution and steady states.

Hamiltonians inside :class:`LindbladModel` are angular (rad/us, i.e. 2*pi
times a value in MHz); dissipator rates stay in MHz and pick up their
2*pi factor exactly once, during Liouvillian assembly.  Times are in us.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from . import core
from .records import TimeTrace

__all__ = [
    "ProductBasis",
    "DensityMatrix",
    "LindbladModel",
    "NoiseSpec",
    "IntegrationError",
    "DegenerateSteadyStateError",
    "build_model",
    "assemble_liouvillian",
    "evolve",
    "steady_state",
    "dominant_oscillation",
    "thermal_qubit_steady",
    "correlated_dephasing_dissipator",
    "dark_state_rates",
    "quasi_static_average",
]

TWO_PI = 2.0 * math.pi


class IntegrationError(RuntimeError):
    """Adaptive integrator failed to reach the requested tolerance."""


class DegenerateSteadyStateError(RuntimeError):
    """The Liouvillian null space is not one-dimensional."""


class ProductBasis:
    """Qubit product space, optionally truncated by total excitation number.

    Basis states are bitmasks (bit j set = qubit j excited) kept in
    ascending integer order; with ``max_excitations=k`` only states with
    at most k excitations are retained, which is exact for zero-
    temperature dynamics that start inside the retained manifold.
    """

    def __init__(self, n_qubits: int, max_excitations: int | None = None):
        if n_qubits < 1:
            raise ValueError("need at least one qubit")
        self.n_qubits = n_qubits
        self.max_excitations = max_excitations
        kmax = n_qubits if max_excitations is None else max_excitations
        self.states = tuple(s for s in range(2**n_qubits) if bin(s).count("1") <= kmax)
        self._index = {s: i for i, s in enumerate(self.states)}

    @property
    def dimension(self) -> int:
        return len(self.states)

    @property
    def truncated(self) -> bool:
        return len(self.states) < 2**self.n_qubits

    def index_of(self, bitmask: int) -> int:
        return self._index[bitmask]

    def basis_vector(self, bitmask: int) -> np.ndarray:
        vec = np.zeros(self.dimension, dtype=complex)
        vec[self._index[bitmask]] = 1.0
        return vec

    def ground_vector(self) -> np.ndarray:
        return self.basis_vector(0)

    def lowering(self, j: int) -> np.ndarray:
        bit = 1 << j
        op = np.zeros((self.dimension, self.dimension))
        for i, s in enumerate(self.states):
            if s & bit:
                op[self._index[s & ~bit], i] = 1.0
        return op

    def raising(self, j: int) -> np.ndarray:
        return self.lowering(j).T

    def number(self, j: int) -> np.ndarray:
        bit = 1 << j
        return np.diag([1.0 if s & bit else 0.0 for s in self.states])

    def sigma_z(self, j: int) -> np.ndarray:
        bit = 1 << j
        return np.diag([1.0 if s & bit else -1.0 for s in self.states])

    def total_excitation(self) -> np.ndarray:
        return np.diag([float(bin(s).count("1")) for s in self.states])


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive-semidefinite state matrix."""

    elements: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.elements, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError("density matrix must be square")
        if np.max(np.abs(rho - rho.conj().T)) > 1e-10:
            raise ValueError("density matrix is not Hermitian within 1e-10")
        if abs(np.trace(rho) - 1.0) > 1e-9:
            raise ValueError(f"trace {np.trace(rho)} differs from 1 beyond 1e-9")
        if np.linalg.eigvalsh((rho + rho.conj().T) / 2.0).min() < -1e-8:
            raise ValueError("density matrix has an eigenvalue below -1e-8")
        object.__setattr__(self, "elements", rho)

    @classmethod
    def from_state_vector(cls, vec) -> "DensityMatrix":
        v = np.asarray(vec, dtype=complex)
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()))

    @property
    def dimension(self) -> int:
        return self.elements.shape[0]

    def expectation(self, op: np.ndarray) -> complex:
        return complex(np.trace(op @ self.elements))

    def population(self, op: np.ndarray) -> float:
        return float(np.real(np.trace(op @ self.elements)))


@dataclass(frozen=True)
class NoiseSpec:
    """Quasi-static Gaussian frequency jitter, sampled once per shot."""

    sigma_common: float
    sigma_diff: float
    samples: int
    seed: int = 0

    def __post_init__(self):
        if self.sigma_common < 0 or self.sigma_diff < 0:
            raise ValueError("noise standard deviations must be >= 0")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")


@dataclass(frozen=True)
class LindbladModel:
    """Hamiltonian (angular, rad/us) plus dissipators (rates in MHz).

    dephasing_matrix, when present, is the symmetric matrix of individual
    (diagonal) and correlated (off-diagonal) pure dephasing rates over the
    qubit sites of ``basis``.
    """

    dimension: int
    hamiltonian: np.ndarray
    dissipators: tuple[tuple[np.ndarray, float], ...] = ()
    dephasing_matrix: np.ndarray | None = None
    basis: ProductBasis | None = None

    def __post_init__(self):
        ham = np.asarray(self.hamiltonian, dtype=complex)
        if ham.shape != (self.dimension, self.dimension):
            raise ValueError("hamiltonian shape does not match dimension")
        scale = max(1.0, float(np.max(np.abs(ham)))) if ham.size else 1.0
        if np.max(np.abs(ham - ham.conj().T)) > 1e-12 * scale:
            raise ValueError("hamiltonian is not Hermitian within 1e-12")
        object.__setattr__(self, "hamiltonian", ham)
        checked = []
        for op, rate in self.dissipators:
            op = np.asarray(op, dtype=complex)
            if op.shape != (self.dimension, self.dimension):
                raise ValueError("jump operator shape does not match dimension")
            if rate < 0:
                raise ValueError(f"negative dissipator rate {rate}")
            checked.append((op, float(rate)))
        object.__setattr__(self, "dissipators", tuple(checked))
        if self.dephasing_matrix is not None:
            mat = np.asarray(self.dephasing_matrix, dtype=float)
            _check_dephasing_psd(mat)
            if self.basis is None or mat.shape != (self.basis.n_qubits,) * 2:
                raise ValueError("dephasing matrix requires a matching qubit basis")
            object.__setattr__(self, "dephasing_matrix", mat)


def _check_dephasing_psd(mat: np.ndarray) -> np.ndarray:
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError("dephasing matrix must be square")
    if np.max(np.abs(mat - mat.T)) > 1e-12 * max(1.0, np.max(np.abs(mat))):
        raise ValueError("dephasing matrix must be symmetric")
    eigenvalues = np.linalg.eigvalsh(mat)
    if eigenvalues.min() < -1e-9:
        raise ValueError(
            f"dephasing matrix is not positive semidefinite; eigenvalues {eigenvalues}"
        )
    return eigenvalues


def correlated_dephasing_dissipator(
    dephasing_matrix, basis: ProductBasis | int | None = None
) -> list[tuple[np.ndarray, float]]:
    """Equivalent independent jump operators for a dephasing-rate matrix.

    Diagonalizing the (PSD) rate matrix turns the cross terms
    (rate_jk/2)(sz_j rho sz_k - ...) into one collective sz-type jump per
    eigenvector, at half the eigenvalue rate, which keeps the generator in
    manifestly completely positive form.
    """
    mat = np.asarray(dephasing_matrix, dtype=float)
    _check_dephasing_psd(mat)
    if basis is None or isinstance(basis, int):
        basis = ProductBasis(mat.shape[0] if basis is None else basis)
    if mat.shape[0] != basis.n_qubits:
        raise ValueError("dephasing matrix size does not match qubit count")
    eigenvalues, eigenvectors = np.linalg.eigh(mat)
    scale = max(1.0, float(np.max(np.abs(eigenvalues))))
    terms = []
    sz = [basis.sigma_z(j) for j in range(basis.n_qubits)]
    for k in range(len(eigenvalues)):
        if eigenvalues[k] <= 1e-12 * scale:
            continue
        op = sum(eigenvectors[j, k] * sz[j] for j in range(basis.n_qubits))
        terms.append((op, float(eigenvalues[k]) / 2.0))
    return terms


def build_model(
    spec: core.SystemSpec,
    detunings=None,
    drives: tuple[tuple[int, complex], ...] = (),
    max_excitations: int | None = None,
) -> LindbladModel:
    """Full master-equation model of a SystemSpec.

    drives lists (qubit index, complex Rabi amplitude in MHz) entries that
    enter the Hamiltonian as (omega/2) sigma+ + h.c. in the drive rotating
    frame.  Correlated waveguide decay is diagonalized into independent
    collective jump operators; thermal excitation acts per qubit.
    ``max_excitations`` truncates the product space, which is only valid
    with no drives and no thermal occupancy.
    """
    if detunings is not None:
        spec = spec.with_detunings(detunings)
    n = spec.n_qubits
    if max_excitations is not None and (drives or spec.n_th > 0):
        raise ValueError("excitation truncation requires no drives and n_th = 0")
    basis = ProductBasis(n, max_excitations)
    lower = [basis.lowering(j) for j in range(n)]

    exchange = core.exchange_matrix(spec)
    ham = np.zeros((basis.dimension, basis.dimension), dtype=complex)
    for j in range(n):
        ham += exchange[j, j] * basis.number(j)
    for i in range(n):
        for j in range(i + 1, n):
            if exchange[i, j] != 0.0:
                ham += exchange[i, j] * (lower[i].T @ lower[j] + lower[j].T @ lower[i])
    for q, amplitude in drives:
        ham += 0.5 * amplitude * lower[q].T + 0.5 * np.conj(amplitude) * lower[q]
    ham *= TWO_PI

    dissipators = []
    gamma = core.waveguide_decay_matrix(spec)
    rates, vectors = np.linalg.eigh(gamma)
    scale = max(1.0, float(np.max(np.abs(rates))))
    if rates.min() < -1e-9 * scale:
        raise ValueError(f"waveguide decay matrix not PSD; eigenvalues {rates}")
    for k in range(n):
        if rates[k] <= 1e-12 * scale:
            continue
        op = sum(vectors[j, k] * lower[j] for j in range(n))
        dissipators.append((op, float(rates[k])))
    for j, q in enumerate(spec.params):
        if q.gamma_loss > 0:
            dissipators.append((lower[j], q.gamma_loss))
        if spec.n_th > 0 and q.gamma_1 > 0:
            dissipators.append((lower[j], spec.n_th * q.gamma_1))
            dissipators.append((lower[j].T, spec.n_th * q.gamma_1))

    dephasing = np.diag([q.gamma_phi for q in spec.params]).astype(float)
    for i, j, rate in spec.dephasing_correlations:
        dephasing[i, j] += rate
        dephasing[j, i] += rate
    if not dephasing.any():
        dephasing_matrix = None
    else:
        dephasing_matrix = dephasing

    return LindbladModel(
        dimension=basis.dimension,
        hamiltonian=ham,
        dissipators=tuple(dissipators),
        dephasing_matrix=dephasing_matrix,
        basis=basis,
    )


def assemble_liouvillian(model: LindbladModel) -> np.ndarray:
    """Superoperator L with vec(drho/dt) = L vec(rho), row-major vec.

    Output is angular (rad/us): dissipator rates are multiplied by 2*pi
    here, the single place linear-frequency rates become angular.
    """
    d = model.dimension
    eye = np.eye(d)
    ham = model.hamiltonian
    liouville = -1j * (np.kron(ham, eye) - np.kron(eye, ham.T))
    terms = list(model.dissipators)
    if model.dephasing_matrix is not None:
        terms += correlated_dephasing_dissipator(model.dephasing_matrix, model.basis)
    for op, rate in terms:
        op = np.asarray(op, dtype=complex)
        if op.shape != (d, d):
            raise ValueError("jump operator dimension mismatch")
        opdop = op.conj().T @ op
        liouville += TWO_PI * rate * (
            np.kron(op, op.conj())
            - 0.5 * np.kron(opdop, eye)
            - 0.5 * np.kron(eye, opdop.T)
        )
    return liouville


def _as_matrix(rho) -> np.ndarray:
    if isinstance(rho, DensityMatrix):
        return rho.elements
    return np.asarray(rho, dtype=complex)


def _integrate(model: LindbladModel, rho0, times) -> list[np.ndarray]:
    """Adaptive integration (DOP853, rtol 1e-9 / atol 1e-12), raw matrices."""
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 1:
        raise ValueError("times must be a non-empty 1D grid")
    if times.size > 1 and np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    rho = _as_matrix(rho0)
    if rho.shape != (model.dimension,) * 2:
        raise ValueError("initial state dimension mismatch")
    if times.size == 1 or times[-1] == times[0]:
        return [rho]
    liouville = assemble_liouvillian(model)
    sol = solve_ivp(
        lambda _t, y: liouville @ y,
        (times[0], times[-1]),
        rho.reshape(-1),
        method="DOP853",
        rtol=1e-9,
        atol=1e-12,
        t_eval=times,
    )
    if not sol.success:
        reached = sol.t[-1] if sol.t.size else times[0]
        raise IntegrationError(f"integration failed at t = {reached:.6g} us: {sol.message}")
    out = []
    for k in range(times.size):
        mat = sol.y[:, k].reshape(model.dimension, model.dimension)
        out.append((mat + mat.conj().T) / 2.0)
    return out


def evolve(model: LindbladModel, rho0, times) -> list[DensityMatrix]:
    """Integrate the master equation, returning the state at each grid time.

    The initial state is taken at times[0]; every output is validated as a
    physical density matrix (trace, Hermiticity, positivity).
    """
    return [DensityMatrix(mat) for mat in _integrate(model, rho0, times)]


def steady_state(model: LindbladModel) -> DensityMatrix:
    """Unique null vector of the Liouvillian, normalized to unit trace.

    Raises DegenerateSteadyStateError when the second-smallest singular
    value is below 1e-10 of the largest (e.g. a disconnected dark
    subspace with no decay path).
    """
    liouville = assemble_liouvillian(model)
    _, singular, vh = np.linalg.svd(liouville)
    if singular[-2] <= 1e-10 * singular[0]:
        raise DegenerateSteadyStateError(
            "Liouvillian null space is degenerate "
            f"(singular values {singular[-2]:.3e}, {singular[-1]:.3e})"
        )
    null = vh[-1].conj()
    rho = null.reshape(model.dimension, model.dimension)
    rho = (rho + rho.conj().T) / 2.0
    trace = np.trace(rho).real
    if abs(trace) < 1e-12:
        raise DegenerateSteadyStateError("null vector has vanishing trace")
    rho /= trace
    residual = np.max(np.abs(liouville @ rho.reshape(-1)))
    if residual > 1e-10 * max(1.0, singular[0]):
        raise DegenerateSteadyStateError(f"steady-state residual too large: {residual:.3e}")
    return DensityMatrix(rho)


def dominant_oscillation(model: LindbladModel, rho0, observable, min_freq: float = 0.05):
    """Frequency and damping (MHz) of the strongest fringe in a signal.

    Decomposes tr(O rho(t)) into Liouvillian eigenmodes and returns the
    oscillating mode (|Im lambda|/2pi > min_freq) with the largest
    amplitude for the given initial state; exact where a least-squares
    fit of a multi-component damped signal would be biased.
    """
    from scipy.linalg import eig

    liouville = assemble_liouvillian(model)
    values, left, right = eig(liouville, left=True)
    rho = _as_matrix(rho0).reshape(-1)
    obs_vec = np.asarray(observable, dtype=complex).T.reshape(-1)
    best = None
    for k in range(values.size):
        freq = abs(values[k].imag) / TWO_PI
        if freq <= min_freq:
            continue
        norm = left[:, k].conj() @ right[:, k]
        if abs(norm) < 1e-12:
            continue
        amplitude = (obs_vec @ right[:, k]) * (left[:, k].conj() @ rho) / norm
        if best is None or abs(amplitude) > best[0]:
            best = (abs(amplitude), freq, -values[k].real / TWO_PI)
    if best is None:
        raise ValueError("no oscillating mode found above the frequency floor")
    return best[1], best[2]


def thermal_qubit_steady(
    g1d: float,
    gloss: float,
    gphi: float,
    n_th: float,
    omega_rabi: float,
    delta: float,
) -> tuple[float, complex]:
    """Closed-form driven steady state of a single qubit in a thermal bath.

    Returns (rho_ee, rho_eg) for drive detuning delta, using the thermally
    enhanced rates gamma1_th = (2 n_th + 1)(g1d + gloss) and gamma2_th =
    gamma1_th/2 + gphi.  All rates in MHz (ratios only).
    """
    if min(g1d, gloss, gphi, n_th) < 0:
        raise ValueError("rates and occupancy must be >= 0")
    gamma1_th = (2.0 * n_th + 1.0) * (g1d + gloss)
    gamma2_th = gamma1_th / 2.0 + gphi
    if gamma2_th <= 0:
        raise ValueError("qubit without decoherence has no unique steady state")
    x = delta / gamma2_th
    saturation = omega_rabi**2 / (gamma1_th * gamma2_th) if omega_rabi else 0.0
    denom = 1.0 + x**2 + saturation
    rho_ee = (n_th / (2.0 * n_th + 1.0)) * (1.0 + x**2) / denom + 0.5 * saturation / denom
    rho_eg = -1j * omega_rabi / (2.0 * gamma2_th * (2.0 * n_th + 1.0)) * (1.0 + 1j * x) / denom
    return float(rho_ee), complex(rho_eg)


def dark_state_rates(gloss: float, gphi: float, gphi_c: float) -> tuple[float, float]:
    """Decay and decoherence rates of a half-wavelength pair's dark state.

    gamma1_dark = gloss + gphi - gphi_c (differential dephasing leaks the
    dark state into the fast-decaying bright state) and gamma2_dark =
    gloss/2 + gphi, independent of the correlation.
    """
    if gloss < 0 or gphi < 0:
        raise ValueError("gloss and gphi must be >= 0")
    return gloss + gphi - gphi_c, gloss / 2.0 + gphi


def quasi_static_average(
    model_builder,
    rho0,
    observable,
    noise: NoiseSpec,
    times,
) -> TimeTrace:
    """Mean observable over a quasi-static Gaussian frequency-jitter ensemble.

    model_builder(delta_common, delta_diff) must return the LindbladModel
    for one static draw of the common/differential jitter (MHz).  The
    observable is an operator matrix or a callable on the state matrix.
    Sampling and the reduction order are fixed by the seed, so results are
    bit-identical across runs.
    """
    times = np.asarray(times, dtype=float)
    rng = np.random.default_rng(noise.seed)
    common = rng.normal(0.0, noise.sigma_common, noise.samples)
    diff = rng.normal(0.0, noise.sigma_diff, noise.samples)
    if callable(observable):
        measure = observable
    else:
        op = np.asarray(observable, dtype=complex)
        measure = lambda rho: float(np.real(np.trace(op @ rho)))
    total = np.zeros(times.size)
    for k in range(noise.samples):
        model = model_builder(float(common[k]), float(diff[k]))
        try:
            states = _integrate(model, rho0, times)
        except IntegrationError as err:
            raise IntegrationError(f"sample {k}: {err}") from err
        total += np.array([measure(state) for state in states])
    return TimeTrace(times * 1e3, total / noise.samples, metadata={"samples": noise.samples})
