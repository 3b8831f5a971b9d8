import numpy as np
import pytest
from scipy.stats import ks_2samp, kstest

from llpmcm.bags import (
    Bag,
    ClassConditionals,
    Gaussian,
    LPDistribution,
    Triangular01,
    Uniform01,
    draw_count_cibm,
    empirical_lp,
    gaussian_pair,
    load_bags,
    sample_bag_cibm,
    sample_bag_ciim,
    sample_lps,
    save_bags,
    simulate_bags,
    walk_step,
)
from llpmcm.exceptions import ConfigError

CC2 = gaussian_pair(2, 1.0, 1.0)
CC1 = ClassConditionals(Gaussian((1.0,), 1.0), Gaussian((-1.0,), 1.0))


class TestEmpiricalLP:
    @pytest.mark.parametrize("labels, expected", [
        ((1, 1, 1, 1), 1.0),
        ((1, -1, -1, -1), 0.25),
        ((-1, -1), 0.0),
    ])
    def test_values(self, labels, expected):
        assert empirical_lp(labels) == expected

    def test_rejects_bad_labels(self):
        with pytest.raises(ValueError):
            empirical_lp([0, 1])
        with pytest.raises(ValueError):
            empirical_lp([])


class TestBag:
    def test_immutable(self):
        bag = Bag(np.zeros((3, 2)), 0.5)
        with pytest.raises(ValueError):
            bag.instances[0, 0] = 1.0
        assert bag.size == 3 and bag.dim == 2

    def test_rejects_bad_lp(self):
        with pytest.raises(ValueError):
            Bag(np.zeros((2, 1)), 1.5)


class TestSampleLPs:
    def test_constant(self):
        np.testing.assert_array_equal(sample_lps(LPDistribution("constant", value=0.5), 3, 0),
                                      [0.5, 0.5, 0.5])

    def test_walk_truncation(self):
        assert walk_step(0.9, 0.3) == pytest.approx(1.0)
        assert walk_step(0.2, -0.5) == 0.0
        assert walk_step(0.5, 0.1) == pytest.approx(0.6)

    def test_uniform_mean(self):
        lps = sample_lps(LPDistribution("uniform", 0.0, 0.5), 10_000, 11)
        assert abs(lps.mean() - 0.25) < 0.01
        assert lps.min() >= 0.0 and lps.max() <= 0.5

    def test_walk_stays_in_unit_interval(self):
        lps = sample_lps(LPDistribution("walk", scale=1.0), 5000, 2)
        assert lps[0] == 0.5
        assert lps.min() >= 0.0 and lps.max() <= 1.0

    @pytest.mark.parametrize("text, expected", [
        ("constant:0.5", LPDistribution("constant", value=0.5)),
        ("uniform:0,0.5", LPDistribution("uniform", 0.0, 0.5)),
        ("walk:0.3", LPDistribution("walk", scale=0.3)),
        ("walk:0.3,0.1", LPDistribution("walk", scale=0.3, start=0.1)),
    ])
    def test_parse_roundtrip(self, text, expected):
        dist = LPDistribution.parse(text)
        assert dist == expected
        assert LPDistribution.parse(str(dist)) == dist

    @pytest.mark.parametrize("text", ["uniform:0.6,0.2", "beta:1,1", "constant:"])
    def test_parse_errors(self, text):
        with pytest.raises((ConfigError, ValueError)):
            LPDistribution.parse(text)


class TestSamplers:
    def test_triangular_cdf(self):
        x = Triangular01().sample(np.random.default_rng(0), 20_000)[:, 0]
        assert kstest(x, Triangular01().cdf).pvalue > 0.01
        np.testing.assert_allclose(Triangular01().cdf(0.5), 0.25)
        np.testing.assert_allclose(Uniform01().cdf(0.5), 0.5)

    @pytest.mark.parametrize("gamma, label", [(1.0, 1), (0.0, -1)])
    def test_ciim_pure(self, gamma, label):
        bag = sample_bag_ciim(gamma, 8, CC2, 0)
        assert np.all(bag.hidden_labels == label)
        assert bag.lp == gamma

    def test_ciim_mean_lp(self):
        lps = [sample_bag_ciim(0.5, 8, CC1, (5, i)).lp for i in range(10_000)]
        assert abs(np.mean(lps) - 0.5) < 0.01

    def test_ciim_marginal_ks(self):
        rng = np.random.default_rng(99)
        pooled = np.concatenate([sample_bag_ciim(0.3, 8, CC1, (1, i)).instances[:, 0]
                                 for i in range(1000)])
        labels = np.where(rng.random(pooled.size) < 0.3, 1, -1)
        reference = CC1.sample(labels, rng)[:, 0]
        assert ks_2samp(pooled, reference).pvalue > 0.01

    def test_cibm_pure(self):
        bag = sample_bag_cibm(1.0, 8, CC2, 0.5, 3)
        assert np.all(bag.hidden_labels == 1)

    @pytest.mark.parametrize("rho", [0.0, 0.3, 1.0])
    def test_cibm_mean_lp(self, rho):
        lps = [sample_bag_cibm(0.5, 8, CC1, rho, (7, i)).lp for i in range(10_000)]
        assert abs(np.mean(lps) - 0.5) < 0.01

    def test_cibm_maximal_dependence_two_point(self):
        rng = np.random.default_rng(4)
        counts = np.array([draw_count_cibm(0.3, 8, 1.0, rng) for _ in range(5000)])
        assert set(np.unique(counts)) <= {0, 8}
        assert abs(np.mean(counts == 8) - 0.3) < 0.02

    def test_simulate_deterministic(self):
        lps = sample_lps(LPDistribution(), 6, 1)
        a = simulate_bags(lps, 4, CC2, 9)
        b = simulate_bags(lps, 4, CC2, 9)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.instances, y.instances)
            assert x.lp == y.lp

    def test_simulate_rejects_model(self):
        with pytest.raises(ValueError):
            simulate_bags([0.5], 4, CC2, 0, model="other")


class TestManifest:
    def test_roundtrip(self, tmp_path):
        bags = simulate_bags([0.1, 0.9, 0.4], 5, CC2, 2)
        save_bags(bags, tmp_path)
        loaded = load_bags(tmp_path)
        assert len(loaded) == 3
        for a, b in zip(bags, loaded):
            np.testing.assert_array_equal(a.instances, b.instances)
            assert a.lp == b.lp
            assert b.hidden_labels is None and b.true_lp is None
        assert (tmp_path / "hidden" / "labels.csv").exists()

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(ConfigError, match="manifest not found"):
            load_bags(tmp_path / "nothing")

    def test_size_mismatch(self, tmp_path):
        save_bags([Bag(np.zeros((2, 1)), 0.5)], tmp_path)
        text = (tmp_path / "manifest.csv").read_text().replace("0,2,", "0,3,")
        (tmp_path / "manifest.csv").write_text(text)
        with pytest.raises(ConfigError, match="n=3"):
            load_bags(tmp_path)
