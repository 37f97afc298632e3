import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stringpred.errors import BoundsError, DegenerateWindowError, ParameterError, ZeroPriceError
from stringpred.marketdata import PriceSeries
from stringpred.stringmap import StringWindowConfig, compactify, standardize, string1, string2

positive_windows = arrays(np.float64, st.integers(2, 40), elements=st.floats(1e-3, 1e3))


class TestString1:
    @pytest.mark.parametrize("Q", [0.1, 1.0, 6.0])
    def test_constant_window(self, Q):
        v = string1(PriceSeries(np.full(6, 1.7)), 0, StringWindowConfig(5, Q))
        np.testing.assert_array_equal(np.asarray(v), 0.0)

    def test_hand_values(self):
        s = PriceSeries([1.0, 2.0])
        assert np.asarray(string1(s, 0, StringWindowConfig(1, 1.0)))[1] == pytest.approx(0.5)
        assert np.asarray(string1(s, 0, StringWindowConfig(1, 2.0)))[1] == pytest.approx(0.75)

    def test_window_out_of_range(self):
        with pytest.raises(BoundsError):
            string1(PriceSeries([1.0, 2.0, 3.0]), 1, StringWindowConfig(2))

    def test_zero_price(self):
        with pytest.raises(ZeroPriceError):
            string1(PriceSeries([1.0, 0.0, 3.0]), 0, StringWindowConfig(2))

    def test_matches_direct_formula(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            x = rng.uniform(0.5, 2.0, 8)
            Q = rng.uniform(0.1, 5)
            got = np.asarray(string1(x, 1, StringWindowConfig(6, Q)))
            want = [1 - (x[1] / x[1 + h]) ** Q for h in range(7)]
            np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-14)

    def test_q_monotone_on_rising_geometric_window(self):
        x = 1.01 ** np.arange(6)
        vals = [np.asarray(string1(x, 0, StringWindowConfig(5, Q)))[1:] for Q in (0.3, 1.0, 2.0, 6.0)]
        assert np.all(np.diff(np.stack(vals), axis=0) > 0)


class TestString2:
    def test_hand_value(self):
        v = np.asarray(string2(PriceSeries([1.0, 2.0, 4.0]), 0, StringWindowConfig(2, 1.0)))
        assert v[1] == pytest.approx(0.25)

    @given(positive_windows, st.floats(0.05, 8.0))
    def test_dirichlet_boundaries(self, w, Q):
        cfg = StringWindowConfig(len(w) - 1, Q)
        one = np.asarray(string1(w, 0, cfg))
        two = np.asarray(string2(w, 0, cfg))
        assert one[0] == 0.0
        assert two[0] == 0.0 and two[-1] == 0.0

    def test_boundary_sweep(self):
        rng = np.random.default_rng(1)
        for _ in range(10_000):
            ls = int(rng.integers(1, 12))
            w = rng.uniform(0.01, 10.0, ls + 1)
            cfg = StringWindowConfig(ls, float(rng.uniform(0.05, 8)))
            assert np.asarray(string1(w, 0, cfg))[0] == 0.0
            v = np.asarray(string2(w, 0, cfg))
            assert v[0] == 0.0 and v[-1] == 0.0

    def test_monotone_up_window_nonnegative(self):
        rng = np.random.default_rng(2)
        for _ in range(500):
            w = np.cumsum(rng.uniform(0.0, 1.0, 10)) + 0.5
            v = np.asarray(string2(w, 0, StringWindowConfig(9, float(rng.uniform(0.1, 4)))))
            assert np.all(v >= 0)


class TestCompactify:
    def test_single_fold_is_identity(self):
        x = np.array([3.0, 1.0, 4.0, 1.0, 5.0])
        np.testing.assert_array_equal(np.asarray(compactify(x, StringWindowConfig(2, Nm=1), 1)), x[1:4])

    def test_periodic_series(self):
        x = np.tile([1.0, 2.0, 5.0], 6)
        for Nm in (1, 2, 4):
            np.testing.assert_allclose(np.asarray(compactify(x, StringWindowConfig(3, Nm=Nm), 0)), x[:4])

    def test_two_folds(self):
        # element h averages p(h) and p(h + ls)
        out = np.asarray(compactify(PriceSeries([1.0, 2.0, 3.0, 4.0, 5.0]), StringWindowConfig(2, Nm=2), 0))
        np.testing.assert_allclose(out, [2.0, 3.0, 4.0])

    def test_insufficient_data(self):
        with pytest.raises(BoundsError):
            compactify(PriceSeries([1.0, 2.0, 3.0, 4.0]), StringWindowConfig(2, Nm=2), 0)

    @given(st.floats(-3, 3), st.floats(-3, 3), st.integers(1, 4), st.integers(1, 4))
    def test_linear(self, a, b, ls, Nm):
        rng = np.random.default_rng(ls * 10 + Nm)
        n = ls * Nm + 3
        s1, s2 = rng.normal(size=n), rng.normal(size=n)
        cfg = StringWindowConfig(ls, Nm=Nm)
        lhs = np.asarray(compactify(a * s1 + b * s2, cfg, 1))
        rhs = a * np.asarray(compactify(s1, cfg, 1)) + b * np.asarray(compactify(s2, cfg, 1))
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)


class TestStandardize:
    def test_hand_case(self):
        np.testing.assert_allclose(standardize([1.0, 2.0, 3.0]), [0.0, 0.5, 1.0])

    def test_constant_window(self):
        with pytest.raises(DegenerateWindowError):
            standardize([5.0, 5.0, 5.0])

    @given(arrays(np.float64, st.integers(2, 30), elements=st.floats(-1e3, 1e3)))
    def test_extremes_hit_exactly(self, w):
        if w.max() == w.min():
            return
        z = standardize(w)
        assert z[np.argmin(w)] == 0.0 and z[np.argmax(w)] == 1.0
        assert np.all((z >= 0) & (z <= 1))

    @given(st.floats(0.01, 100), st.floats(-100, 100))
    def test_affine_invariance(self, a, b):
        w = np.array([0.3, 1.7, -0.4, 2.2, 0.9])
        np.testing.assert_allclose(standardize(a * w + b), standardize(w), atol=1e-9)


@pytest.mark.parametrize("kw", [{"ls": 0}, {"ls": 2, "Q": 0.0}, {"ls": 2, "Q": -1.0}, {"ls": 2, "Nm": 0}])
def test_config_validation(kw):
    with pytest.raises(ParameterError):
        StringWindowConfig(**kw)
