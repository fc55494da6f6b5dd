import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose

from proctomo.channels import (ChannelSpec, ChoiMatrix, choi_from_kraus,
                               make_channel, maximally_entangled_state)
from proctomo.designs import all_settings, pauli_projector, setting_index
from proctomo.simulate import (FrequencyTable, SamplingPlan, born_probabilities,
                               exact_table, load_table,
                               pauli_joint_probabilities, probability_array,
                               sample, save_table, setting_count)

from conftest import random_kraus_ops


@pytest.fixture(scope="module")
def omega2():
    return ChoiMatrix(maximally_entangled_state(2).matrix)


@pytest.fixture(scope="module")
def noisy2():
    return choi_from_kraus(make_channel(ChannelSpec("noisy_qft", 2, measure_prob=0.25)))


class TestBornProbabilities:
    def test_scenario1_entangled_correlations(self, omega2):
        idx = setting_index(("z", "z"))
        p = born_probabilities(omega2, 1, idx)
        assert_allclose(p, [0.5, 0.0, 0.0, 0.5], atol=1e-12)

    def test_scenario3_depolarized(self):
        choi = ChoiMatrix(np.eye(4) / 4)
        p = born_probabilities(choi, 3)
        assert_allclose(p, np.full(20, 1 / 20), atol=1e-12)

    def test_scenario2_identity_z_input(self, omega2):
        # input |0><0| (a=z, q=0), measure z: outcome 0 is certain
        idx = (setting_index(("z",)) * 3 + setting_index(("z",))) * 2 + 0
        p = born_probabilities(omega2, 2, idx)
        assert_allclose(p, [1.0, 0.0], atol=1e-12)

    def test_joint_kernel_against_projector_loop(self, rng):
        kraus = random_kraus_ops(4, 2, rng)
        from proctomo.channels import KrausSet
        choi = choi_from_kraus(KrausSet(tuple(kraus)))
        fast = pauli_joint_probabilities(choi.matrix, 4)
        for s_idx, setting in enumerate(all_settings(4)):
            if s_idx % 17:  # spot-check a deterministic subset
                continue
            for o_idx, bits in enumerate(itertools.product((0, 1), repeat=4)):
                proj = pauli_projector(setting, bits)
                expected = np.trace(choi.matrix @ proj).real
                assert fast[s_idx, o_idx] == pytest.approx(expected, abs=1e-12)

    def test_rows_normalized(self, noisy2):
        for scenario in (1, 2, 3, 4):
            values = probability_array(noisy2, scenario)
            sums = values.sum(axis=-1)
            assert_allclose(sums, np.ones_like(sums), atol=1e-10)

    def test_unphysical_choi_rejected(self):
        with pytest.raises(ValueError):
            ChoiMatrix(np.diag([1.5, -0.5, 0.0, 0.0]).astype(complex))


class TestSampling:
    def test_fixed_cycle_exact_counts(self, noisy2):
        table = sample(noisy2, 1, SamplingPlan("fixed", 9 * 50, seed=3))
        assert table.nu == 50
        assert_allclose(table.values.sum(axis=1), np.ones(9), atol=1e-12)
        counts = table.values * table.nu
        assert_allclose(counts, np.round(counts), atol=1e-9)

    def test_fixed_needs_divisible_shots(self, noisy2):
        with pytest.raises(ValueError, match="divisible"):
            sample(noisy2, 1, SamplingPlan("fixed", 100, seed=0))

    def test_impossible_outcome_never_sampled(self, omega2):
        table = sample(omega2, 1, SamplingPlan("random", 10**5, seed=8))
        idx = setting_index(("z", "z"))
        assert table.values[idx, 1] == 0.0  # outcome 01 has probability zero
        assert table.values[idx, 2] == 0.0

    def test_random_scheme_total_mass(self, noisy2):
        n = 12345
        table = sample(noisy2, 4, SamplingPlan("random", n, seed=5))
        assert table.values.sum() * table.nu == pytest.approx(n, abs=1e-6)

    def test_determinism(self, noisy2):
        a = sample(noisy2, 2, SamplingPlan("random", 10**4, seed=21))
        b = sample(noisy2, 2, SamplingPlan("random", 10**4, seed=21))
        assert np.array_equal(a.values, b.values)

    def test_seed_changes_table(self, noisy2):
        a = sample(noisy2, 2, SamplingPlan("random", 10**4, seed=21))
        b = sample(noisy2, 2, SamplingPlan("random", 10**4, seed=22))
        assert not np.array_equal(a.values, b.values)

    def test_unbiasedness_fixed_scheme(self, noisy2):
        nu = 100
        acc = np.zeros((9, 4))
        n_seeds = 200
        for seed in range(n_seeds):
            acc += sample(noisy2, 1, SamplingPlan("fixed", 9 * nu, seed)).values
        mean = acc / n_seeds
        probs = probability_array(noisy2, 1)
        assert np.abs(mean - probs).max() <= 5 / np.sqrt(n_seeds * nu)

    @pytest.mark.parametrize("scenario", [1, 2, 3, 4])
    def test_setting_counts(self, scenario):
        expected = {1: 9, 2: 18, 3: 1, 4: 6}[scenario]
        assert setting_count(scenario, k=1, d=2) == expected


class TestExactTable:
    def test_matches_probability_array(self, noisy2):
        table = exact_table(noisy2, 3)
        assert table.scheme == "exact"
        assert_allclose(table.values, probability_array(noisy2, 3), atol=0)

    def test_round_trip_serialization(self, noisy2, tmp_path):
        table = sample(noisy2, 2, SamplingPlan("random", 3000, seed=13))
        path = tmp_path / "table.csv"
        save_table(table, path)
        loaded = load_table(path)
        assert loaded.scenario == table.scenario
        assert loaded.nu == table.nu
        assert loaded.total_shots == table.total_shots
        assert np.array_equal(loaded.values, table.values)
