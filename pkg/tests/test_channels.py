import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from proctomo.channels import (ChannelSpec, ChoiMatrix, DensityMatrix,
                               KrausSet, apply_kraus, apply_via_choi,
                               choi_from_kraus, choi_rank, distance,
                               fidelity, kraus_rank, make_channel,
                               maximally_entangled_state, partial_trace,
                               qft_unitary)

from conftest import random_density, random_hermitian, random_kraus_ops, random_unitary


class TestMaximallyEntangled:
    def test_d2_explicit(self):
        omega = maximally_entangled_state(2).matrix
        vec = np.array([1, 0, 0, 1]) / np.sqrt(2)
        assert_allclose(omega, np.outer(vec, vec), atol=1e-15)

    def test_marginals_maximally_mixed(self):
        for d in (2, 3, 5):
            omega = maximally_entangled_state(d).matrix
            assert_allclose(partial_trace(omega, "system"), np.eye(d) / d, atol=1e-12)
            assert_allclose(partial_trace(omega, "ancilla"), np.eye(d) / d, atol=1e-12)

    def test_purity(self):
        omega = maximally_entangled_state(3).matrix
        assert np.trace(omega @ omega).real == pytest.approx(1.0, abs=1e-12)

    def test_invalid_dimension(self):
        with pytest.raises(ValueError):
            maximally_entangled_state(1)


class TestChoiFromKraus:
    def test_identity_channel_gives_omega(self):
        choi = choi_from_kraus(KrausSet((np.eye(3),)))
        assert_allclose(choi.matrix, maximally_entangled_state(3).matrix, atol=1e-14)

    def test_depolarizing_pauli_kraus(self):
        # half-strength Pauli mixture averages to the maximally mixed state
        paulis = [np.eye(2), np.array([[0, 1], [1, 0]]),
                  np.array([[0, -1j], [1j, 0]]), np.diag([1, -1])]
        choi = choi_from_kraus(KrausSet(tuple(p / 2 for p in paulis)))
        assert_allclose(choi.matrix, np.eye(4) / 4, atol=1e-14)

    def test_noisy_qft_rank_two(self):
        kraus = make_channel(ChannelSpec("noisy_qft", 2, measure_prob=0.25))
        # Gram-matrix rank of the vectorized Kraus operators
        vecs = np.stack([k.reshape(-1) for k in kraus.operators])
        gram_rank = np.linalg.matrix_rank(vecs @ vecs.conj().T, tol=1e-9)
        assert gram_rank == 2
        assert choi_rank(choi_from_kraus(kraus)) == 2

    def test_non_tp_rejected(self):
        with pytest.raises(ValueError):
            KrausSet((0.5 * np.eye(2),))


class TestApplyViaChoi:
    def test_identity(self, rng):
        omega = choi_from_kraus(KrausSet((np.eye(2),)))
        rho = DensityMatrix(random_density(2, rng))
        assert_allclose(apply_via_choi(omega, rho).matrix, rho.matrix, atol=1e-12)

    def test_completely_depolarizing(self, rng):
        choi = ChoiMatrix(np.eye(4) / 4)
        rho = DensityMatrix(random_density(2, rng))
        assert_allclose(apply_via_choi(choi, rho).matrix, np.eye(2) / 2, atol=1e-12)

    @pytest.mark.parametrize("d", [2, 4])
    def test_agrees_with_kraus_application(self, d, rng):
        for _ in range(50):
            kraus = KrausSet(tuple(random_kraus_ops(d, 3, rng)))
            rho = DensityMatrix(random_density(d, rng))
            via_choi = apply_via_choi(choi_from_kraus(kraus), rho)
            direct = apply_kraus(kraus, rho)
            assert np.abs(via_choi.matrix - direct.matrix).max() < 1e-10


class TestPartialTrace:
    def test_omega_marginal(self):
        omega = maximally_entangled_state(4).matrix
        assert_allclose(partial_trace(omega, "system"), np.eye(4) / 4, atol=1e-12)

    def test_product_rule(self, rng):
        a = random_hermitian(3, rng)
        b = random_hermitian(3, rng)
        assert_allclose(partial_trace(np.kron(a, b), "system"),
                        np.trace(a) * b, atol=1e-12)
        assert_allclose(partial_trace(np.kron(a, b), "ancilla"),
                        np.trace(b) * a, atol=1e-12)

    def test_diagonal_example(self):
        mat = np.diag([0.75, 0.25, -0.25, 0.25]).astype(complex)
        assert_allclose(partial_trace(mat, "system"), np.diag([0.5, 0.5]), atol=1e-15)

    def test_index_summation_oracle(self, rng):
        d = 3
        m = random_hermitian(d * d, rng)
        expected = np.zeros((d, d), dtype=complex)
        for a in range(d):
            for b in range(d):
                expected[a, b] = sum(m[s * d + a, s * d + b] for s in range(d))
        assert_allclose(partial_trace(m, "system"), expected, atol=1e-13)

    def test_trace_preserved(self, rng):
        m = random_hermitian(4, rng)
        assert np.trace(partial_trace(m, "ancilla")) == pytest.approx(
            np.trace(m).real, abs=1e-12)

    def test_bad_dimension(self):
        with pytest.raises(ValueError):
            partial_trace(np.eye(6), "system")


class TestDistance:
    def test_zero_for_equal(self, rng):
        a = random_hermitian(4, rng)
        for metric in ("frobenius", "trace", "operator"):
            assert distance(a, a, metric) == pytest.approx(0.0, abs=1e-14)

    def test_orthogonal_pure_choi_states(self):
        # orthogonal unitaries give Choi matrices at the maximal trace distance
        u1 = choi_from_kraus(KrausSet((np.eye(2),))).matrix
        u2 = choi_from_kraus(KrausSet((np.diag([1.0, -1.0]),))).matrix
        assert distance(u1, u2, "trace") == pytest.approx(2.0, abs=1e-12)

    def test_two_by_two_diagonal(self):
        a, b = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
        assert distance(a, b, "frobenius") == pytest.approx(np.sqrt(2))
        assert distance(a, b, "trace") == pytest.approx(2.0)
        assert distance(a, b, "operator") == pytest.approx(1.0)

    @given(seed=st.integers(0, 10**6))
    @settings(max_examples=30, deadline=None)
    def test_norm_ordering(self, seed):
        rng = np.random.default_rng(seed)
        diff = random_hermitian(4, rng)
        op = distance(diff, 0 * diff, "operator")
        fro = distance(diff, 0 * diff, "frobenius")
        tr = distance(diff, 0 * diff, "trace")
        assert op <= fro + 1e-12
        assert fro <= tr + 1e-12
        assert tr <= 16 * op + 1e-12


class TestMakeChannel:
    def test_rank_one_mixed_unitary_is_projector(self, rng):
        w = random_unitary(4, rng)
        choi = choi_from_kraus(make_channel(
            ChannelSpec("mixed_unitary", 4, unitary=w, rank=1)))
        lam = np.linalg.eigvalsh(choi.matrix)
        assert_allclose(sorted(lam)[-1], 1.0, atol=1e-10)
        assert choi_rank(choi) == 1

    def test_mixed_unitary_flat_spectrum(self):
        choi = choi_from_kraus(make_channel(ChannelSpec("mixed_unitary", 4, rank=4)))
        lam = np.sort(np.linalg.eigvalsh(choi.matrix))[::-1]
        assert_allclose(lam[:4], 0.25, atol=1e-12)
        assert_allclose(lam[4:], 0.0, atol=1e-12)

    def test_noiseless_qft_matches_unitary(self):
        noiseless = choi_from_kraus(make_channel(
            ChannelSpec("noisy_qft", 4, measure_prob=0.0)))
        pure = choi_from_kraus(make_channel(
            ChannelSpec("unitary", 4, unitary=qft_unitary(4))))
        assert_allclose(noiseless.matrix, pure.matrix, atol=1e-13)

    def test_invalid_rank(self):
        with pytest.raises(ValueError):
            ChannelSpec("mixed_unitary", 2, rank=5)

    @pytest.mark.parametrize("d", [2, 4, 8, 16])
    def test_constructions_are_physical(self, d):
        specs = [ChannelSpec("identity", d),
                 ChannelSpec("noisy_qft", d, measure_prob=0.25),
                 ChannelSpec("mixed_unitary", d, rank=min(4, d * d))]
        for spec in specs:
            kraus = make_channel(spec)
            choi = choi_from_kraus(kraus)  # validates PSD/trace/partial trace
            assert kraus_rank(kraus) == choi_rank(choi)

    def test_odd_prime_mixed_unitary(self):
        # Weyl strings keep the flat spectrum in non-qubit dimensions
        choi = choi_from_kraus(make_channel(ChannelSpec("mixed_unitary", 3, rank=9)))
        assert_allclose(choi.matrix, np.eye(9) / 9, atol=1e-12)


def test_fidelity_of_identical_states(rng):
    rho = random_density(4, rng)
    assert fidelity(rho, rho) == pytest.approx(1.0, abs=1e-10)


def test_fidelity_orthogonal_pure_states():
    assert fidelity(np.diag([1.0, 0.0]), np.diag([0.0, 1.0])) == pytest.approx(0.0, abs=1e-12)
