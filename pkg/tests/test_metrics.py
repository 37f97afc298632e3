import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stringpred.errors import MetricError, ParameterError, UndefinedStatisticError
from stringpred.marketdata import gen_sinusoid
from stringpred.metrics import (
    Histogram,
    direction_hit_rate,
    error_report,
    exact_hit_rate,
    histogram,
    kl_divergence,
    kl_divergence_probs,
    mae,
    naive_forecast,
    sharpe,
    skewness,
    smape,
    unit_edges,
)

finite = st.floats(-1e3, 1e3)


class TestErrors:
    def test_identical(self):
        x = np.array([1.0, -2.0, 3.5])
        assert mae(x, x) == 0.0
        assert smape(x, x) == 0.0

    def test_hand_values(self):
        assert mae([1, 1], [0, 2]) == 1.0
        assert smape([1, 1], [0, 2]) == pytest.approx(100 * (2 + 2 / 3) / 2)

    def test_zero_pair_names_index(self):
        with pytest.raises(MetricError) as info:
            smape([1.0, 0.0, 2.0], [1.0, 0.0, 2.0])
        assert info.value.index == 1

    def test_length_mismatch(self):
        with pytest.raises(ParameterError):
            mae([1.0, 2.0], [1.0])

    @given(arrays(np.float64, 8, elements=finite), arrays(np.float64, 8, elements=finite))
    def test_symmetry_and_range(self, a, f):
        if np.any(np.abs(a) + np.abs(f) == 0):
            return
        assert smape(a, f) == pytest.approx(smape(f, a))
        assert 0 <= smape(a, f) <= 200 + 1e-9

    def test_permutation_invariance(self):
        rng = np.random.default_rng(0)
        a, f = rng.normal(size=50), rng.normal(size=50)
        k = rng.permutation(50)
        assert mae(a[k], f[k]) == pytest.approx(mae(a, f), rel=1e-14)
        assert smape(a[k], f[k]) == pytest.approx(smape(a, f), rel=1e-14)

    def test_report(self):
        rep = error_report([1.0, 2.0], [1.5, 2.0])
        assert rep.to_dict() == {"mae": 0.25, "smape": pytest.approx(100 * 0.5 / 1.25 / 2), "n": 2}


class TestNaive:
    def test_definition(self):
        np.testing.assert_array_equal(naive_forecast([1.0, 2.0, 3.0], 1), [1.0, 2.0])

    def test_constant(self):
        x = np.full(6, 4.2)
        assert mae(x[2:], naive_forecast(x, 2)) == 0.0

    @pytest.mark.parametrize("l_pr, want", [(1, 0.077947), (2, 0.147725)])
    def test_sinusoid_second_half(self, l_pr, want):
        x = np.asarray(gen_sinusoid(51))
        t = np.arange(26 + 2 * l_pr - 1, 51)
        f = naive_forecast(x, l_pr)[t - l_pr]
        assert mae(x[t], f) == pytest.approx(want, abs=5e-7)


class TestHitRates:
    def test_direction(self):
        assert direction_hit_rate([2.0, 0.0], [3.0, 2.0], [1.0, 1.0]) == 0.5

    def test_exact(self):
        assert exact_hit_rate([1.0, 2.0, 3.0], [1.0, 2.1, 3.0], tol=0.0) == pytest.approx(2 / 3)


class TestSharpeSkew:
    def test_sharpe_hand(self):
        assert sharpe([1.0, 3.0]) == pytest.approx(2.0)

    def test_constant_returns(self):
        with pytest.raises(UndefinedStatisticError):
            sharpe([0.1, 0.1, 0.1])

    @given(st.floats(-10, 10))
    def test_shift_invariance(self, c):
        r = np.array([0.3, -0.1, 0.2, 0.05])
        assert sharpe(r + c, 0.01 + c) == pytest.approx(sharpe(r, 0.01), rel=1e-7)

    def test_skew_cases(self):
        assert skewness([-1.0, 0.0, 1.0]) == pytest.approx(0.0, abs=1e-15)
        assert skewness([0.0, 0.0, 3.0]) == pytest.approx(2 / 2**1.5)
        x = np.array([0.3, 2.0, -0.4, 5.0])
        assert skewness(-x) == pytest.approx(-skewness(x))

    def test_skew_zero_variance(self):
        with pytest.raises(UndefinedStatisticError):
            skewness([1.0, 1.0, 1.0])


class TestKL:
    def test_hand_case(self):
        assert kl_divergence_probs([0.5, 0.5], [0.25, 0.75]) == pytest.approx(0.1438, abs=1e-4)
        assert kl_divergence_probs([0.5, 0.5], [0.25, 0.75]) == pytest.approx(
            0.5 * math.log(2) + 0.5 * math.log(2 / 3), rel=1e-14
        )

    def test_identical(self):
        h = histogram([0.1, 0.2, 0.2, 0.9], unit_edges(5))
        assert kl_divergence(h, h) == 0.0

    def test_edge_mismatch(self):
        with pytest.raises(ParameterError):
            kl_divergence(histogram([0.1], unit_edges(5)), histogram([0.1], unit_edges(4)))

    def test_smoothing_matches_manual(self):
        p = Histogram(unit_edges(3), [4, 0, 1])
        q = Histogram(unit_edges(3), [1, 2, 2])
        ps = np.array([5, 1, 2]) / 8
        qs = np.array([2, 3, 3]) / 8
        assert kl_divergence(p, q) == pytest.approx(float(np.sum(ps * np.log(ps / qs))), rel=1e-14)

    def test_nonnegative_sweep(self):
        rng = np.random.default_rng(1)
        edges = unit_edges(20)
        for _ in range(2000):
            p = Histogram(edges, rng.integers(0, 30, 20))
            q = Histogram(edges, rng.integers(0, 30, 20))
            assert kl_divergence(p, q) >= 0.0


class TestHistogram:
    def test_binning(self):
        h = histogram([0.0, 0.25, 0.5, 1.0], unit_edges(4))
        np.testing.assert_array_equal(h.counts, [1, 1, 1, 1])
        assert h.total == 4 and h.bins == 4

    def test_validation(self):
        with pytest.raises(ParameterError):
            Histogram(unit_edges(3), [1, 2])
        with pytest.raises(ParameterError):
            Histogram(unit_edges(2), [1, -1])
