import math

import numpy as np
import pytest

from llpmcm.bounds import (
    MergedBoundInputs,
    PairBoundInputs,
    SRConstants,
    bound_optimal_weights,
    confidence_constants,
    geb_theorem1,
    geb_theorem1_report,
    geb_theorem2,
    geb_theorem2_report,
    max_admissible_epsilon,
    sr_constants_relu,
    sr_constants_rkhs,
)
from llpmcm.exceptions import ContaminationError

UNIT = SRConstants(1.0, 1.0)


class TestSRConstants:
    @pytest.mark.parametrize("R, K, expected", [(2, 1, 2.0), (1, 1, 1.0), (3, 0.5, 1.5)])
    def test_rkhs(self, R, K, expected):
        sr = sr_constants_rkhs(R, K)
        assert (sr.A, sr.B) == (expected, expected)

    def test_relu_singletons(self):
        sr = sr_constants_relu([1.0], [1.0], 1.0)
        assert (sr.A, sr.B) == (1.0, 2.0)

    def test_relu_orthogonal(self):
        sr = sr_constants_relu([1.0, 0.0], [0.0, 1.0], 1.0)
        assert (sr.A, sr.B) == (1.0, 0.0)

    def test_invalid(self):
        with pytest.raises(ValueError):
            SRConstants(-1.0, 0.0)
        with pytest.raises(ValueError):
            sr_constants_rkhs(0.0, 1.0)


class TestPairBound:
    def test_fixture(self):
        rep = geb_theorem1_report(PairBoundInputs([0.0], [0.0], [100.0], [1.0]), UNIT)
        assert rep.C == pytest.approx(2 * math.sqrt(math.log(40)), rel=1e-14)
        assert rep.C == pytest.approx(3.841, abs=1e-3)
        assert rep.D == pytest.approx(5.841, abs=1e-3)
        assert rep.bound == pytest.approx(0.5841, abs=1e-3)
        assert not rep.vacuous

    def test_optimal_weights_closed_form(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            N = rng.integers(1, 8)
            kp, km = rng.uniform(0, 0.45, (2, N))
            nbar = rng.uniform(1, 50, N)
            w = bound_optimal_weights(kp, km, nbar)
            rep = geb_theorem1_report(PairBoundInputs(kp, km, nbar, w), UNIT)
            expected = 1.0 / np.sum(nbar * (1 - kp - km) ** 2)
            assert rep.extra["sum"] == pytest.approx(expected, rel=1e-12)

    def test_uniform_never_better(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            N = rng.integers(2, 8)
            kp, km = rng.uniform(0, 0.45, (2, N))
            nbar = rng.uniform(1, 50, N)
            opt = geb_theorem1(PairBoundInputs(kp, km, nbar, bound_optimal_weights(kp, km, nbar)), UNIT)
            uni = geb_theorem1(PairBoundInputs(kp, km, nbar, np.full(N, 1 / N)), UNIT)
            assert opt <= uni + 1e-12

    def test_outlier_pair(self):
        # one pair whose gap shrinks: optimal stays bounded, uniform blows up
        opt, uni = [], []
        for gap in (1e-1, 1e-2, 1e-3, 1e-4):
            kp = np.array([0.1, 0.1, 0.5 - gap / 2])
            km = np.array([0.1, 0.1, 0.5 - gap / 2])
            nbar = np.full(3, 10.0)
            opt.append(geb_theorem1(PairBoundInputs(kp, km, nbar, bound_optimal_weights(kp, km, nbar)), UNIT))
            uni.append(geb_theorem1(PairBoundInputs(kp, km, nbar, np.full(3, 1 / 3)), UNIT))
        assert max(opt) < 1.01 * min(opt)
        assert uni[-1] > 100 * uni[0]

    def test_monotone(self):
        base = geb_theorem1(PairBoundInputs([0.2, 0.1], [0.1, 0.2], [10, 20], [0.5, 0.5]), UNIT)
        more_n = geb_theorem1(PairBoundInputs([0.2, 0.1], [0.1, 0.2], [11, 20], [0.5, 0.5]), UNIT)
        wider = geb_theorem1(PairBoundInputs([0.15, 0.1], [0.1, 0.2], [10, 20], [0.5, 0.5]), UNIT)
        assert more_n < base and wider < base

    def test_ibm_ignores_nbar(self):
        a = geb_theorem1(PairBoundInputs([0.1], [0.1], [50], [1.0], model="IBM"), UNIT)
        b = geb_theorem1(PairBoundInputs([0.1], [0.1], [1], [1.0], model="IIM"), UNIT)
        assert a == b

    def test_errors(self):
        with pytest.raises(ContaminationError):
            geb_theorem1(PairBoundInputs([0.6], [0.4], [1], [1.0]), UNIT)
        with pytest.raises(ValueError, match="simplex"):
            geb_theorem1(PairBoundInputs([0.1], [0.1], [1], [0.5]), UNIT)

    def test_vacuous_reported_verbatim(self):
        rep = geb_theorem1_report(PairBoundInputs([0.45], [0.45], [1], [1.0]), UNIT)
        assert rep.bound > 1 and rep.vacuous
        assert rep.to_json()["bound"] == rep.bound


class TestMergedBound:
    def test_single_gap(self):
        rep = geb_theorem2_report(MergedBoundInputs([0.5], 0.1, N=1, K=1, n=1), UNIT)
        assert rep.extra["hm"] == pytest.approx(6.25)
        C, D = confidence_constants(UNIT, 1.0, 0.05)
        assert rep.bound == pytest.approx(D * math.sqrt(6.25 / 2))

    def test_vacuous_failure_probability(self):
        bound, fail = geb_theorem2(MergedBoundInputs([0.5] * 10, 0.1, N=1000, K=100, n=8), UNIT)
        assert fail == pytest.approx(0.05 + 20 * math.exp(-2), rel=1e-12)
        assert fail == pytest.approx(2.757, abs=1e-3)
        assert geb_theorem2_report(MergedBoundInputs([0.5] * 10, 0.1, N=1000, K=100, n=8), UNIT).vacuous

    def test_admissible_epsilon(self):
        assert max_admissible_epsilon(0.5, 0.2, 0.1) == pytest.approx(0.2)
        inputs = MergedBoundInputs([0.5], 0.25, N=4, K=2, n=8, Delta=0.5, tau=0.2, eps0=0.1)
        with pytest.raises(ValueError, match="admissible"):
            geb_theorem2(inputs, UNIT)

    def test_gap_must_exceed_epsilon(self):
        with pytest.raises(ContaminationError):
            geb_theorem2(MergedBoundInputs([0.5, 0.05], 0.1, N=4, K=2, n=8), UNIT)

    def test_ibm_sets_n_to_one(self):
        a, _ = geb_theorem2(MergedBoundInputs([0.5], 0.1, N=2, K=2, n=16, model="CIBM"), UNIT)
        b, _ = geb_theorem2(MergedBoundInputs([0.5], 0.1, N=2, K=2, n=1, model="CIIM"), UNIT)
        assert a == b
