import math

import numpy as np
import pytest

from wgqed import core
from wgqed.core import Placement, QubitParams, SystemSpec


def identical_pair(g1d, gloss=0.0, gphi=0.0, sep=math.pi):
    q = QubitParams("M", g1d, gloss, gphi)
    return SystemSpec(qubits=((q, Placement(0.0)), (q, Placement(sep))))


def random_spec(rng, n=None):
    n = n or rng.integers(1, 6)
    qubits = tuple(
        (
            QubitParams(f"Q{j}", rng.uniform(0.5, 100.0), rng.uniform(0, 1.0), rng.uniform(0, 1.0)),
            Placement(rng.uniform(-4 * math.pi, 4 * math.pi)),
        )
        for j in range(n)
    )
    return SystemSpec(qubits=qubits, detunings=tuple(rng.uniform(-5, 5, n)))


class TestEffectiveHamiltonian:
    def test_pair_at_pi_separation(self):
        # correlated decay maximal (-g1d), exchange zero
        ham = core.build_effective_hamiltonian(identical_pair(13.4))
        assert ham[0, 1] == pytest.approx(0.5j * 13.4, abs=1e-12)
        assert ham[0, 0] == pytest.approx(-0.5j * 13.4, abs=1e-12)

    def test_pair_at_quarter_wavelength(self):
        # J = g1d/2, no correlated decay
        ham = core.build_effective_hamiltonian(identical_pair(13.4, sep=math.pi / 2))
        assert ham[0, 1] == pytest.approx(13.4 / 2, abs=1e-12)

    def test_centered_probe_geometry(self):
        mirror = QubitParams("M", 13.4)
        probe = QubitParams("P", 1.19)
        ham = core.build_effective_hamiltonian(core.cavity_spec(mirror, probe))
        expected_j = math.sqrt(13.4 * 1.19) / 2
        assert ham[0, 1] == pytest.approx(expected_j, abs=1e-12)
        assert ham[1, 2] == pytest.approx(expected_j, abs=1e-12)

    def test_rejects_non_finite_phase(self):
        with pytest.raises(ValueError):
            Placement(math.inf)

    def test_hermiticity_split(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            spec = random_spec(rng)
            ham = core.build_effective_hamiltonian(spec)
            sym = (ham + ham.conj().T) / 2
            antisym = 1j * (ham - ham.conj().T)
            assert np.max(np.abs(sym - core.exchange_matrix(spec))) < 1e-12
            assert np.max(np.abs(antisym - core.dissipation_matrix(spec))) < 1e-12

    def test_phase_periodicity(self):
        rng = np.random.default_rng(11)
        spec = random_spec(rng, n=4)
        shifted = SystemSpec(
            qubits=tuple((q, Placement(p.phase + 2 * math.pi)) for q, p in spec.qubits),
            detunings=spec.detunings,
        )
        delta = core.build_effective_hamiltonian(spec) - core.build_effective_hamiltonian(shifted)
        assert np.max(np.abs(delta)) < 1e-12

    def test_direct_coupling_is_hermitian_only(self):
        q = QubitParams("M", 13.4)
        spec = SystemSpec(
            qubits=((q, Placement(0.0)), (q, Placement(0.0))),
            direct_couplings=((0, 1, 46.0),),
        )
        ham = core.build_effective_hamiltonian(spec)
        assert ham[0, 1].real == pytest.approx(46.0)
        # co-located pair: waveguide exchange is zero, correlated decay full
        assert ham[0, 1].imag == pytest.approx(-13.4 / 2)


class TestCollectiveModes:
    def test_pair_dark_bright_rates(self):
        modes = core.collective_modes(identical_pair(13.4))
        assert modes[0].decay_rate == pytest.approx(2 * 13.4, rel=1e-12)
        assert modes[1].decay_rate == 0.0

    def test_array_brightest_mode(self):
        # lambda0/2-spaced array of N qubits: brightest mode decays at N*g1d
        for n in (2, 3, 4, 5):
            q = QubitParams("M", 18.1)
            spec = SystemSpec(
                qubits=tuple((q, Placement(k * math.pi)) for k in range(n))
            )
            modes = core.collective_modes(spec)
            assert modes[0].decay_rate == pytest.approx(n * 18.1, rel=1e-9)

    def test_single_qubit(self):
        q = QubitParams("Q", 0.91, gamma_loss=0.081)
        spec = SystemSpec(qubits=((q, Placement(0.3)),), detunings=(2.5,))
        (mode,) = core.collective_modes(spec)
        assert mode.decay_rate == pytest.approx(0.91 + 0.081, rel=1e-12)
        assert mode.frequency_shift == pytest.approx(2.5)

    def test_decay_sum_conservation(self):
        rng = np.random.default_rng(2024)
        for _ in range(100):
            spec = random_spec(rng)
            total = sum(m.decay_rate for m in core.collective_modes(spec))
            expected = sum(q.gamma_1d + q.gamma_loss for q in spec.params)
            assert total == pytest.approx(expected, abs=1e-9)

    def test_dark_mode_iff_half_wavelength(self):
        modes = core.collective_modes(identical_pair(13.4, sep=math.pi))
        assert modes[-1].decay_rate < 1e-9 * 13.4
        modes = core.collective_modes(identical_pair(13.4, sep=0.97 * math.pi))
        assert modes[-1].decay_rate > 1e-9 * 13.4


class TestAsymmetricPair:
    def test_symmetric_limit(self):
        pair = core.dark_bright_asymmetric(13.4, 13.4)
        assert np.allclose(pair.dark.amplitudes, [1 / math.sqrt(2)] * 2)
        assert pair.j_bright == 0.0

    def test_type1_mirror_asymmetry(self):
        # Q2/Q6 rates: small asymmetry, sub-percent probe decay contribution
        pair = core.dark_bright_asymmetric(16.5, 18.1, g1d_probe=1.19)
        asym = abs(16.5 - 18.1) / (16.5 + 18.1)
        assert asym == pytest.approx(0.0462, abs=5e-4)
        spurious = (2 * pair.j_bright) ** 2 / (16.5 + 18.1)
        assert spurious / 1.19 == pytest.approx(asym**2, rel=1e-12)
        assert spurious / 1.19 == pytest.approx(0.00214, abs=5e-5)

    def test_type2_mirror_asymmetry(self):
        pair = core.dark_bright_asymmetric(94.1, 99.5)
        assert abs(94.1 - 99.5) / (94.1 + 99.5) == pytest.approx(0.0279, abs=2e-4)
        assert pair.bright.decay_rate == pytest.approx(94.1 + 99.5)

    def test_dark_is_null_vector_of_decay_matrix(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            g1, g2 = rng.uniform(0.1, 100.0, 2)
            pair = core.dark_bright_asymmetric(g1, g2)
            decay = np.array([[g1, -math.sqrt(g1 * g2)], [-math.sqrt(g1 * g2), g2]])
            assert np.max(np.abs(decay @ pair.dark.amplitudes)) < 1e-12 * max(g1, g2)

    def test_ratio_relation(self):
        pair = core.dark_bright_asymmetric(20.0, 5.0)
        assert pair.j_dark / pair.j_bright == pytest.approx(
            2 * math.sqrt(20.0 * 5.0) / (20.0 - 5.0), rel=1e-12
        )

    def test_rejects_zero_rate(self):
        with pytest.raises(ValueError):
            core.dark_bright_asymmetric(0.0, 1.0)


class TestClosedFormRates:
    def test_coupling_rate_values(self):
        assert core.coupling_rate_2j(2, 13.4, 1.19) == pytest.approx(5.647, abs=5e-4)
        assert core.coupling_rate_2j(2, 96.7, 0.87) == pytest.approx(12.971, abs=5e-4)
        assert core.coupling_rate_2j(2, 0.0, 0.0) == 0.0

    def test_coupling_rate_matches_spectral_splitting(self):
        # oracle: diagonalize the lossless 3-qubit exchange matrix
        rng = np.random.default_rng(3)
        for _ in range(25):
            g1d_m, g1d_p = rng.uniform(0.5, 100.0, 2)
            mirror = QubitParams("M", g1d_m)
            probe = QubitParams("P", g1d_p)
            exchange = core.exchange_matrix(core.cavity_spec(mirror, probe))
            freqs = np.linalg.eigvalsh(exchange)
            splitting = freqs.max() - freqs.min()
            assert splitting == pytest.approx(core.coupling_rate_2j(2, g1d_m, g1d_p), abs=1e-9)

    def test_cooperativity_values(self):
        assert core.cooperativity(5.647, 1.19, 0.3885, 0.210) == pytest.approx(96.2, abs=0.1)
        assert core.cooperativity(12.97, 0.87, 0.6705, 0.581) == pytest.approx(187.9, abs=0.2)
        assert core.cooperativity(0.0, 1.0, 0.1, 0.1) == 0.0

    def test_cooperativity_rejects_zero_denominator(self):
        with pytest.raises(ZeroDivisionError):
            core.cooperativity(1.0, 1.0, 1.0, 0.0)

    def test_purcell_factors(self):
        assert core.purcell_factor(0.91, 0.081) == pytest.approx(11.23, abs=0.01)
        assert core.purcell_factor(94.1, 0.430) == pytest.approx(218.8, abs=0.1)
        assert core.purcell_factor(18.1, 0.185) == pytest.approx(97.8, abs=0.1)

    def test_phase_mismatch_decay(self):
        assert core.phase_mismatch_decay(13.4, math.pi) == 0.0
        # 5% mismatch on the slow mirror pair stays below its measured decay
        value = core.phase_mismatch_decay(13.4, math.pi * 1.05)
        assert value == pytest.approx(0.16498, abs=2e-5)
        assert value < 0.210
        # formula value at the 3.5% bound for the fast pair; the quadratic
        # expansion is the independent cross-check
        value = core.phase_mismatch_decay(96.7, math.pi * 1.035)
        assert value == pytest.approx(0.58398, abs=2e-5)
        assert value == pytest.approx(96.7 * (0.035 * math.pi) ** 2 / 2, rel=2e-3)

    def test_second_excitation_cooperativity_below_unity(self):
        rng = np.random.default_rng(17)
        for _ in range(1000):
            g1d_p, g1d_m, gp_p, gp_m = rng.uniform(1e-3, 200.0, 4)
            value = core.second_excitation_cooperativity(g1d_p, g1d_m, gp_p, gp_m)
            assert 0.0 < value < 1.0


class TestSpecValidation:
    def test_rejects_too_many_qubits(self):
        q = QubitParams("Q", 1.0)
        with pytest.raises(ValueError):
            SystemSpec(qubits=tuple((q, Placement(0.0)) for _ in range(6)))

    def test_rejects_negative_rates(self):
        with pytest.raises(ValueError):
            QubitParams("Q", -1.0)

    def test_rejects_bad_probe_index(self):
        q = QubitParams("Q", 1.0)
        with pytest.raises(ValueError):
            SystemSpec(qubits=((q, Placement(0.0)),), probe_index=3)

    def test_rejects_self_coupling(self):
        q = QubitParams("Q", 1.0)
        with pytest.raises(ValueError):
            SystemSpec(
                qubits=((q, Placement(0.0)), (q, Placement(1.0))),
                direct_couplings=((1, 1, 10.0),),
            )

    def test_gamma_prime_split(self):
        q = QubitParams.from_gamma_prime("Q1", 94.1, 0.430)
        assert q.gamma_prime == pytest.approx(0.430, rel=1e-12)
        assert q.gamma_loss == pytest.approx(0.0065)
