import numpy as np
import pytest

from dpsqkd.fock import (
    FockOperator,
    FockVector,
    beam_splitter,
    coherent_vector,
    loss_channel,
    number_vector,
    overlap,
    partial_trace,
    suggest_cutoff,
    tensor,
    total_photon_distribution,
    total_photon_projector,
    vacuum_vector,
)


def poisson_pmf(mean, size):
    """Reference Poisson weights by direct series evaluation."""
    out = np.zeros(size)
    out[0] = np.exp(-mean)
    for n in range(1, size):
        out[n] = out[n - 1] * mean / n
    return out


def fidelity(rho: FockOperator, target: FockVector) -> float:
    return float(np.real(target.amplitudes.conj() @ rho.entries @ target.amplitudes))


class TestIndexConvention:
    def test_first_mode_is_most_significant(self):
        d = 5
        v = tensor([number_vector(1, d - 1), number_vector(0, d - 1)])
        assert v.amplitudes[1 * d + 0] == 1.0
        assert v.grid()[1, 0] == 1.0

    def test_amplitude_accessor_matches_grid(self):
        v = tensor([number_vector(2, 3), number_vector(1, 3)])
        assert v.amplitude(2, 1) == 1.0
        assert v.amplitude(1, 2) == 0.0


class TestCoherentVector:
    def test_zero_amplitude_is_vacuum(self):
        v = coherent_vector(0.0, 10)
        assert v.amplitudes[0] == 1.0
        assert np.all(v.amplitudes[1:] == 0.0)

    def test_norm_close_to_one(self):
        # direct sum of Poisson(0.2) weights over 0..12
        expected = poisson_pmf(0.2, 13).sum()
        v = coherent_vector(np.sqrt(0.2), 12)
        assert abs(v.norm**2 - 1.0) < 1e-12
        assert abs(v.norm**2 - expected) < 1e-15

    def test_vacuum_amplitude(self):
        v = coherent_vector(np.sqrt(0.2), 12)
        assert abs(v.amplitudes[0] - 0.9048374180359595) < 1e-12

    def test_amplitude_series(self):
        alpha = 0.3 + 0.2j
        v = coherent_vector(alpha, 8)
        fact = 1.0
        for n in range(9):
            if n:
                fact *= n
            expected = np.exp(-abs(alpha) ** 2 / 2) * alpha**n / np.sqrt(fact)
            assert abs(v.amplitudes[n] - expected) < 1e-12

    def test_negative_cutoff_rejected(self):
        with pytest.raises(ValueError):
            coherent_vector(0.1, -1)


class TestOverlap:
    def test_vacuum_self_overlap(self):
        v = vacuum_vector(6)
        assert overlap(v, v) == 1.0

    def test_coherent_normalization(self):
        v = coherent_vector(np.sqrt(0.1), 12)
        assert abs(overlap(v, v) - 1.0) < 1e-10

    def test_opposite_phase_overlap(self):
        # closed form <beta|alpha> = exp(-|alpha-beta|^2/2) x phase
        a = coherent_vector(np.sqrt(0.1), 12)
        b = coherent_vector(-np.sqrt(0.1), 12)
        assert abs(overlap(b, a) - 0.8187307530779818) < 1e-10

    def test_conjugate_linearity(self):
        rng = np.random.default_rng(3)
        u = FockVector(4, 1, rng.normal(size=5) + 1j * rng.normal(size=5))
        v = FockVector(4, 1, rng.normal(size=5) + 1j * rng.normal(size=5))
        assert overlap(u, v) == pytest.approx(np.conj(overlap(v, u)))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            overlap(vacuum_vector(4), vacuum_vector(5))


class TestTensor:
    def test_three_mode_vacuum(self):
        v = tensor([vacuum_vector(4)] * 3)
        assert v.modes == 3
        assert v.amplitudes[0] == 1.0
        assert np.count_nonzero(v.amplitudes) == 1

    def test_norm_multiplicative(self):
        rng = np.random.default_rng(11)
        u = FockVector(5, 1, rng.normal(size=6) + 1j * rng.normal(size=6))
        v = FockVector(5, 1, rng.normal(size=6) + 1j * rng.normal(size=6))
        assert tensor([u, v]).norm == pytest.approx(u.norm * v.norm, rel=1e-12)

    def test_triple_coherent_total_photon_poisson(self):
        # total photon number of three independent coherent pulses: convolve
        # three Poisson(0.1) mass functions
        cutoff = 8
        v = tensor([coherent_vector(np.sqrt(0.1), cutoff)] * 3)
        got = total_photon_distribution(v)
        single = poisson_pmf(0.1, cutoff + 1)
        expected = np.convolve(np.convolve(single, single), single)
        assert np.max(np.abs(got - expected[: got.size])) < 1e-10

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError):
            tensor([])

    def test_cutoff_mismatch_rejected(self):
        with pytest.raises(ValueError):
            tensor([vacuum_vector(4), vacuum_vector(5)])


class TestBeamSplitter:
    def test_full_transmission_is_identity(self):
        rng = np.random.default_rng(5)
        v = FockVector(4, 2, rng.normal(size=25) + 1j * rng.normal(size=25))
        out = beam_splitter(v, 1.0)
        assert np.allclose(out.amplitudes, v.amplitudes, atol=1e-12)

    def test_single_photon_balanced(self):
        v = tensor([number_vector(1, 4), vacuum_vector(4)])
        out = beam_splitter(v, 0.5)
        s = 1.0 / np.sqrt(2.0)
        assert abs(out.amplitude(1, 0) - s) < 1e-12
        assert abs(out.amplitude(0, 1) - s) < 1e-12

    def test_sign_convention_second_mode(self):
        v = tensor([vacuum_vector(4), number_vector(1, 4)])
        out = beam_splitter(v, 0.3)
        assert abs(out.amplitude(0, 1) - np.sqrt(0.3)) < 1e-12
        assert abs(out.amplitude(1, 0) + np.sqrt(0.7)) < 1e-12

    def test_coherent_splitting_closed_form(self):
        alpha = np.sqrt(0.2)
        cutoff = 12
        v = tensor([coherent_vector(alpha, cutoff), vacuum_vector(cutoff)])
        out = beam_splitter(v, 0.5)
        target = tensor([coherent_vector(alpha / np.sqrt(2), cutoff)] * 2)
        fid = abs(overlap(target, out)) ** 2
        assert fid >= 1.0 - 1e-10

    def test_norm_preserved(self):
        rng = np.random.default_rng(17)
        for _ in range(5):
            v = FockVector(6, 2, rng.normal(size=49) + 1j * rng.normal(size=49))
            out = beam_splitter(v, rng.uniform())
            assert v.norm - 1e-10 <= out.norm <= v.norm + 1e-12

    def test_mode_selection_in_multimode_state(self):
        v = tensor([vacuum_vector(3), number_vector(1, 3), vacuum_vector(3)])
        out = beam_splitter(v, 0.5, modes=(1, 2))
        s = 1.0 / np.sqrt(2.0)
        assert abs(out.amplitude(0, 1, 0) - s) < 1e-12
        assert abs(out.amplitude(0, 0, 1) - s) < 1e-12

    def test_domain_error(self):
        v = tensor([vacuum_vector(3)] * 2)
        with pytest.raises(ValueError):
            beam_splitter(v, 1.2)
        with pytest.raises(ValueError):
            beam_splitter(v, -0.1)


class TestProjectors:
    def test_vacuum_probability_of_coherent(self):
        mu = 0.37
        v = coherent_vector(np.sqrt(mu), 15)
        p = total_photon_projector(1, 0, 15)
        assert abs(np.real(p.expectation(v)) - np.exp(-mu)) < 1e-12

    def test_completeness_two_modes(self):
        total = sum(total_photon_projector(2, n, 4).entries for n in range(9))
        assert np.max(np.abs(total - np.eye(25))) < 1e-12

    def test_orthogonality_and_idempotence(self):
        p2 = total_photon_projector(2, 2, 3)
        p3 = total_photon_projector(2, 3, 3)
        assert np.max(np.abs(p2.entries @ p3.entries)) < 1e-12
        assert np.max(np.abs(p2.entries @ p2.entries - p2.entries)) < 1e-12
        assert p2.is_hermitian()

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            total_photon_projector(2, 9, 4)


class TestLossChannel:
    def test_coherent_closed_form(self):
        alpha = np.sqrt(0.2)
        eta = 0.3
        rho = loss_channel(coherent_vector(alpha, 12), eta)
        target = coherent_vector(np.sqrt(eta) * alpha, 12)
        assert fidelity(rho, target) >= 1.0 - 1e-10
        assert abs(rho.trace - 1.0) < 1e-12

    def test_survival_one_is_identity(self):
        v = coherent_vector(0.4 + 0.1j, 10)
        rho = loss_channel(v, 1.0)
        assert np.max(np.abs(rho.entries - v.density().entries)) < 1e-12

    def test_survival_zero_maps_to_vacuum(self):
        rho = loss_channel(number_vector(3, 6), 0.0)
        expected = vacuum_vector(6).density()
        assert np.max(np.abs(rho.entries - expected.entries)) < 1e-12

    def test_trace_preserving_on_number_states(self):
        for n in range(7):
            rho = loss_channel(number_vector(n, 6), 0.37)
            assert abs(rho.trace - 1.0) < 1e-12

    def test_multimode_rejected(self):
        with pytest.raises(ValueError):
            loss_channel(tensor([vacuum_vector(3)] * 2), 0.5)


class TestPartialTrace:
    def test_product_state_reduction(self):
        a = coherent_vector(0.3, 5)
        b = number_vector(2, 5)
        rho = partial_trace(tensor([a, b]), keep=(0,))
        assert np.max(np.abs(rho.entries - a.density().entries)) < 1e-12

    def test_keep_order(self):
        a = number_vector(1, 3)
        b = number_vector(2, 3)
        rho = partial_trace(tensor([a, b]), keep=(1, 0))
        expected = tensor([b, a]).density()
        assert np.max(np.abs(rho.entries - expected.entries)) < 1e-12

    def test_entangled_state_reduction(self):
        # (|0,0> + |1,1>)/sqrt(2) reduces to maximally mixed on either mode
        amps = np.zeros((3, 3), dtype=complex)
        amps[0, 0] = amps[1, 1] = 1 / np.sqrt(2)
        v = FockVector(2, 2, amps.ravel())
        rho = partial_trace(v, keep=(0,))
        expected = np.diag([0.5, 0.5, 0.0])
        assert np.max(np.abs(rho.entries - expected)) < 1e-12


class TestSuggestCutoff:
    def test_tail_below_tolerance(self):
        for mean in (0.05, 0.3, 1.0, 3.0):
            n = suggest_cutoff(mean)
            tail = 1.0 - poisson_pmf(mean, n + 1).sum()
            assert tail < 1e-12

    def test_zero_mean(self):
        assert suggest_cutoff(0.0) == 4

    def test_monotone_in_mean(self):
        assert suggest_cutoff(3.0) >= suggest_cutoff(0.3)


class TestInvariants:
    def test_vector_amplitude_length_checked(self):
        with pytest.raises(ValueError):
            FockVector(3, 2, np.zeros(7))

    def test_operator_shape_checked(self):
        with pytest.raises(ValueError):
            FockOperator(3, 1, np.zeros((4, 5)))

    def test_amplitudes_read_only(self):
        v = vacuum_vector(4)
        with pytest.raises(ValueError):
            v.amplitudes[0] = 2.0
