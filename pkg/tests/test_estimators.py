import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from proctomo.channels import (ChannelSpec, choi_from_kraus, make_channel,
                               maximally_entangled_state, qft_unitary)
from proctomo.designs import all_settings, mub_family, pauli_operator_stack
from proctomo.estimators import (ls_estimate, ls_scenario1, ls_scenario2,
                                 ls_scenario3, ls_scenario4, pauli_assemble)
from proctomo.simulate import FrequencyTable, SamplingPlan, exact_table, sample

from conftest import random_unitary


def _channels(d, rng):
    specs = [ChannelSpec("identity", d),
             ChannelSpec("unitary", d, unitary=random_unitary(d, rng)),
             ChannelSpec("mixed_unitary", d, unitary=random_unitary(d, rng), rank=2)]
    if d & (d - 1) == 0:
        specs.append(ChannelSpec("noisy_qft", d, measure_prob=0.25))
    return specs


class TestIdentifiability:
    """Exact probabilities reproduce the Choi matrix for every scenario."""

    @pytest.mark.parametrize("scenario,dims", [(1, (2, 4)), (2, (2, 4)),
                                               (3, (2, 4)), (4, (2, 3))])
    def test_exact_recovery(self, scenario, dims, rng):
        for d in dims:
            for spec in _channels(d, rng):
                truth = choi_from_kraus(make_channel(spec))
                est = ls_estimate(exact_table(truth, scenario))
                err = np.linalg.norm(est.matrix - truth.matrix, "fro")
                assert err < 1e-9, f"{spec.kind} d={d}: {err:.2e}"


class TestScenario1:
    def test_uniform_frequencies_give_maximally_mixed(self):
        table = FrequencyTable(scenario=1, dim=2, values=np.full((9, 4), 0.25),
                               nu=1.0, total_shots=9, scheme="fixed")
        est = ls_scenario1(table)
        assert_allclose(est.matrix, np.eye(4) / 4, atol=1e-12)

    def test_trace_exactly_one(self, rng):
        values = rng.dirichlet(np.ones(4), size=9)
        table = FrequencyTable(scenario=1, dim=2, values=values,
                               nu=1.0, total_shots=9, scheme="fixed")
        est = ls_scenario1(table)
        assert np.trace(est.matrix).real == pytest.approx(1.0, abs=1e-12)

    def test_assemble_against_projector_loop(self, rng):
        from proctomo.designs import pauli_projector
        freqs = rng.random((9, 4))
        fast = pauli_assemble(freqs, 2)
        slow = np.zeros((4, 4), dtype=complex)
        for s_idx, setting in enumerate(all_settings(2)):
            for o_idx, bits in enumerate(itertools.product((0, 1), repeat=2)):
                factor = np.array([[1.0 + 0j]])
                for axis, bit in zip(setting, bits):
                    proj = pauli_projector((axis,), (bit,))
                    factor = np.kron(factor, 3 * proj - np.eye(2))
                slow += freqs[s_idx, o_idx] * factor
        assert_allclose(fast, slow, atol=1e-12)


class TestScenario2:
    def test_exact_nontrivial_channel_k2(self, rng):
        truth = choi_from_kraus(make_channel(
            ChannelSpec("noisy_qft", 4, measure_prob=0.25)))
        est = ls_scenario2(exact_table(truth, 2))
        assert np.linalg.norm(est.matrix - truth.matrix, "fro") < 1e-10

    def test_degenerate_table_structure(self):
        # all outcome mass on p = q for a = b = z
        values = np.zeros((3, 3, 2, 2))
        values[:, :, 0, 0] = 1.0
        values[:, :, 1, 1] = 1.0
        table = FrequencyTable(scenario=2, dim=2, values=values,
                               nu=1.0, total_shots=18, scheme="fixed")
        est = ls_scenario2(table)
        assert np.abs(est.matrix - est.matrix.conj().T).max() < 1e-12
        assert np.trace(est.matrix).real == pytest.approx(1.0, abs=1e-10)


class TestScenario3:
    def test_uniform_frequencies(self):
        table = FrequencyTable(scenario=3, dim=2, values=np.full(20, 1 / 20),
                               nu=1.0, total_shots=20, scheme="fixed")
        est = ls_scenario3(table)
        assert_allclose(est.matrix, np.eye(4) / 4, atol=1e-12)

    def test_single_outcome_spike(self):
        values = np.zeros(20)
        values[7] = 1.0
        table = FrequencyTable(scenario=3, dim=2, values=values,
                               nu=1.0, total_shots=1, scheme="fixed")
        est = ls_scenario3(table)
        vec = mub_family(4).vectors()[7]
        expected = 5 * np.outer(vec, vec.conj()) - np.eye(4)
        assert_allclose(est.matrix, expected, atol=1e-12)
        assert np.trace(est.matrix).real == pytest.approx(1.0, abs=1e-12)
        assert np.linalg.eigvalsh(est.matrix).min() == pytest.approx(-1.0, abs=1e-10)


class TestScenario4:
    def test_depolarizing_d3(self):
        truth = choi_from_kraus(make_channel(ChannelSpec("mixed_unitary", 3, rank=9)))
        est = ls_scenario4(exact_table(truth, 4))
        assert_allclose(est.matrix, np.eye(9) / 9, atol=1e-10)

    def test_trace_identity(self, rng):
        values = rng.dirichlet(np.ones(6), size=6)  # rows sum to one
        table = FrequencyTable(scenario=4, dim=2, values=values,
                               nu=1.0, total_shots=36, scheme="fixed")
        est = ls_scenario4(table)
        assert np.trace(est.matrix).real == pytest.approx(1.0, abs=1e-8)


class TestLinearity:
    @given(alpha=st.floats(0.0, 1.0))
    @settings(max_examples=20, deadline=None)
    def test_affine_mixture(self, alpha):
        rng = np.random.default_rng(7)
        va = rng.dirichlet(np.ones(4), size=9)
        vb = rng.dirichlet(np.ones(4), size=9)
        make = lambda v: FrequencyTable(scenario=1, dim=2, values=v, nu=1.0,
                                        total_shots=9, scheme="fixed")
        mixed = ls_scenario1(make(alpha * va + (1 - alpha) * vb)).matrix
        combo = (alpha * ls_scenario1(make(va)).matrix
                 + (1 - alpha) * ls_scenario1(make(vb)).matrix)
        assert_allclose(mixed, combo, atol=1e-12)


class TestStatisticalUnbiasedness:
    def test_mean_over_seeds_matches_truth(self):
        truth = choi_from_kraus(make_channel(
            ChannelSpec("noisy_qft", 2, measure_prob=0.25)))
        n_seeds, n_shots = 500, 10**4
        acc = np.zeros((4, 4), dtype=complex)
        acc2 = np.zeros((4, 4))
        for seed in range(n_seeds):
            est = ls_estimate(sample(truth, 1, SamplingPlan("random", n_shots, seed)))
            acc += est.matrix
            acc2 += np.abs(est.matrix) ** 2
        mean = acc / n_seeds
        # entrywise Monte Carlo standard error
        var = acc2 / n_seeds - np.abs(mean) ** 2
        stderr = np.sqrt(np.clip(var, 0, None) / n_seeds)
        dev = np.abs(mean - truth.matrix)
        assert np.all(dev <= 3 * stderr + 1e-12)


def test_dispatch_rejects_mismatched_scenario():
    table = FrequencyTable(scenario=1, dim=2, values=np.full((9, 4), 0.25),
                           nu=1.0, total_shots=9, scheme="fixed")
    with pytest.raises(ValueError):
        ls_scenario3(table)
