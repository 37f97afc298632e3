import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stringpred.errors import DegenerateWindowError, ParameterError
from stringpred.marketdata import PriceSeries, gen_random_walk_ticks
from stringpred.metrics import Histogram, unit_edges
from stringpred.pmbcs import (
    MomentumStats,
    PmbcsParams,
    TradingRules,
    accumulate_stats,
    cosine_template,
    generate_signal,
    good_bins,
    learn_rules,
    momentum,
    momentum_series,
    opportunity_gate,
    self_educate,
    signal_series,
    trading_objective,
)

EDGES = unit_edges(50)


def stats_from_counts(lp, ll, sp=None, sl=None, long_returns=None):
    """MomentumStats with the given per-bin counts (dicts bin -> count)."""

    def hist(counts):
        c = np.zeros(50, dtype=int)
        for j, k in (counts or {}).items():
            c[j] = k
        return Histogram(EDGES, c)

    r = np.array([], dtype=float) if long_returns is None else np.asarray(long_returns, dtype=float)
    # every learning trade sits in the middle of bin 3
    m = np.full(len(r), 0.07)
    return MomentumStats(hist(lp), hist(ll), hist(sp), hist(sl), np.arange(len(r)), m, r, r)


OPEN = PmbcsParams(ls=9, D_threshold=-1.0, rho_min=2.0)


class TestMomentum:
    def test_template_window(self):
        w = cosine_template(9, 1, 0.0)
        assert momentum(w, PmbcsParams(ls=9)) < 1e-12

    def test_anti_phase(self):
        ls = 999
        w = cosine_template(ls, 1, math.pi)
        assert momentum(w, PmbcsParams(ls=ls, Q=1.0)) == pytest.approx(2 / math.pi, abs=1e-2)

    def test_constant_window(self):
        with pytest.raises(DegenerateWindowError):
            momentum(np.full(10, 1.3), PmbcsParams(ls=9))

    def test_wrong_length(self):
        with pytest.raises(ParameterError):
            momentum(np.arange(5.0), PmbcsParams(ls=9))

    def test_bounds_sweep(self):
        rng = np.random.default_rng(0)
        for Q in (0.5, 1.0, 2.0, 6.0):
            p = PmbcsParams(ls=15, m=int(rng.integers(1, 4)), Q=Q, phi=float(rng.uniform(0, 2 * np.pi)))
            x = rng.normal(size=20_000)
            M = momentum_series(x, p)[p.ls:]
            assert np.all((M >= 0) & (M <= 1))

    @given(st.floats(0.01, 100), st.floats(-50, 50))
    def test_affine_invariance(self, a, b):
        w = np.array([1.3, 1.1, 1.7, 1.2, 1.5, 1.4])
        p = PmbcsParams(ls=5, Q=1.5)
        assert momentum(a * w + b, p) == pytest.approx(momentum(w, p), abs=1e-9)

    def test_series_matches_scalar(self):
        rng = np.random.default_rng(1)
        x = np.cumsum(rng.normal(size=300))
        p = PmbcsParams(ls=12, m=2, Q=0.7, phi=0.4)
        M = momentum_series(x, p, chunk=100)
        assert np.all(np.isnan(M[:12]))
        want = [momentum(x[t - 12:t + 1], p) for t in range(12, 300)]
        np.testing.assert_allclose(M[12:], want, rtol=1e-12)


class TestAccumulate:
    def test_rising_zero_spread(self):
        x = 1.0 + 0.01 * np.arange(60)
        st_ = accumulate_stats(x, 0.0, PmbcsParams(ls=5, horizon=3))
        assert st_.long_loss.total == 0 and st_.long_profit.total > 0
        assert st_.short_profit.total == 0

    def test_rising_with_large_spread(self):
        x = 1.0 + 0.001 * np.arange(20)
        st_ = accumulate_stats(x, 0.05, PmbcsParams(ls=3, horizon=5))
        assert st_.long_profit.total == 0 and st_.long_loss.total > 0

    def test_partition(self):
        ticks = gen_random_walk_ticks(3000, seed=2)
        p = PmbcsParams(ls=20, horizon=50)
        st_ = accumulate_stats(ticks.mid, ticks.spread, p)
        sites = len(ticks) - p.horizon - p.ls
        assert st_.long_profit.total + st_.long_loss.total == sites
        assert st_.short_profit.total + st_.short_loss.total == sites
        for h in (st_.long_loss, st_.short_profit, st_.short_loss):
            np.testing.assert_array_equal(h.edges, st_.long_profit.edges)

    def test_returns_use_bid_ask(self):
        x = np.array([1.2, 1.0, 1.1, 1.0, 1.1, 1.2])
        st_ = accumulate_stats(x, 0.02, PmbcsParams(ls=2, horizon=2))
        # site 2 buys at ask 1.11 and sells at bid 1.09 two ticks later
        np.testing.assert_array_equal(st_.sites, [2, 3])
        assert st_.long_returns[0] == pytest.approx((1.09 - 1.11) / 1.11)
        assert st_.short_returns[0] == pytest.approx((1.09 - 1.11) / 1.09)


class TestGate:
    def test_identical_histograms(self):
        s = stats_from_counts({3: 40, 7: 40}, {3: 40, 7: 40})
        g = opportunity_gate(s, "long", PmbcsParams(D_threshold=1e-9))
        assert not g.passed and g.dkl == 0.0

    def test_negative_threshold_passes(self):
        s = stats_from_counts({3: 40}, {3: 40}, long_returns=[0.1, -0.2, 0.3, 0.05])
        p = PmbcsParams(D_threshold=-1.0, skew_min=-10.0, sharpe_min=-10.0, rho_min=0.0)
        assert opportunity_gate(s, "long", p).passed

    def test_separated_mass(self):
        s = stats_from_counts({2: 50, 3: 30}, {40: 60, 45: 20})
        pp = np.ones(50)
        pp[2] += 50
        pp[3] += 30
        ql = np.ones(50)
        ql[40] += 60
        ql[45] += 20
        pp, ql = pp / pp.sum(), ql / ql.sum()
        oracle = 0.0
        for a, b in zip(pp, ql):
            oracle += a * math.log(a / b)
        g = opportunity_gate(s, "long", PmbcsParams(D_threshold=oracle - 1e-6))
        assert g.passed and g.dkl == pytest.approx(oracle, rel=1e-12)
        assert not opportunity_gate(s, "long", PmbcsParams(D_threshold=oracle + 1e-6)).passed

    def test_monotone_in_threshold(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            s = stats_from_counts(
                dict(enumerate(rng.integers(0, 40, 50))), dict(enumerate(rng.integers(0, 40, 50)))
            )
            thresholds = np.sort(rng.uniform(-0.1, 1.0, 6))
            passed = [opportunity_gate(s, "long", PmbcsParams(D_threshold=t)).passed for t in thresholds]
            assert all(a or not b for a, b in zip(passed, passed[1:]))

    def test_undefined_filter_fails_with_reason(self):
        s = stats_from_counts({3: 40}, {30: 40})
        g = opportunity_gate(s, "long", PmbcsParams(D_threshold=0.0, rho_min=2.0, sharpe_min=0.0))
        assert not g.passed and "Sharpe" in g.reason


class TestGoodBins:
    def test_uniform(self):
        s = stats_from_counts(dict.fromkeys(range(50), 30), dict.fromkeys(range(50), 30))
        assert good_bins(s, "long", PmbcsParams(rho_min=1.01)) == frozenset()

    def test_separated(self):
        s = stats_from_counts({3: 100}, {7: 100})
        assert good_bins(s, "long", PmbcsParams(rho_min=2.0)) == {3}

    def test_zero_threshold(self):
        s = stats_from_counts({3: 100, 9: 5, 11: 25}, {7: 100, 9: 10})
        assert good_bins(s, "long", PmbcsParams(rho_min=0.0)) == {3, 7, 11}


class TestSignals:
    window = PriceSeries([1.0, 1.4, 1.2, 1.9, 1.1, 1.3, 1.6, 1.0, 1.5, 1.8])

    def _bin(self):
        return int(np.searchsorted(EDGES, momentum(self.window, OPEN), side="right") - 1)

    def test_long_only(self):
        j = self._bin()
        s = stats_from_counts({j: 100}, {(j + 10) % 50: 100}, {(j + 10) % 50: 100}, {j: 100})
        sig = generate_signal(self.window, s, OPEN)
        assert sig.direction == "long" and sig.bin == j and sig.index == 9

    def test_no_good_bin(self):
        j = self._bin()
        other = (j + 10) % 50
        s = stats_from_counts({other: 100}, {j: 100}, {other: 100}, {j: 100})
        assert generate_signal(self.window, s, OPEN).direction == "none"

    def test_conflict(self):
        j = self._bin()
        other = (j + 10) % 50
        s = stats_from_counts({j: 100}, {other: 100}, {j: 100}, {other: 100})
        sig = generate_signal(self.window, s, OPEN)
        assert sig.direction == "none" and "conflict" in sig.reason["rule"]

    def test_degenerate_window(self):
        s = stats_from_counts({1: 100}, {2: 100})
        sig = generate_signal(PriceSeries(np.full(10, 1.2)), s, OPEN)
        assert sig.direction == "none" and "error" in sig.reason

    def test_series_matches_scalar(self):
        ticks = gen_random_walk_ticks(4000, seed=4)
        p = PmbcsParams(ls=15, horizon=30, rho_min=1.1)
        st_ = accumulate_stats(ticks.mid[:2500], ticks.spread[:2500], p)
        rules = learn_rules(st_, p)
        d, M, b = signal_series(ticks.mid, rules, p, start=2500)
        codes = {"long": 1, "short": -1, "none": 0}
        for k in range(0, 1500, 37):
            t = 2500 + k
            sig = generate_signal(ticks.mid[t - 15:t + 1], st_, p, rules)
            assert codes[sig.direction] == d[k]

    def test_deterministic(self):
        ticks = gen_random_walk_ticks(3000, seed=5)
        p = PmbcsParams(ls=10, horizon=20)
        a = accumulate_stats(ticks.mid, ticks.spread, p)
        b = accumulate_stats(ticks.mid, ticks.spread, p)
        np.testing.assert_array_equal(a.long_profit.counts, b.long_profit.counts)
        ra, rb = learn_rules(a, p), learn_rules(b, p)
        assert ra.long_bins == rb.long_bins and ra.short_bins == rb.short_bins


class TestSelfEducation:
    base = PmbcsParams(ls=10, horizon=20, rho_min=1.05)

    def test_single_point_grid(self):
        ticks = gen_random_walk_ticks(3000, seed=6)
        steps = self_educate(ticks.mid, ticks.spread, {"ls": [12]}, (1000, 500), self.base)
        assert len(steps) == 4
        assert all(s.params.ls == 12 for s in steps)
        assert [s.trade for s in steps] == [(1000, 1500), (1500, 2000), (2000, 2500), (2500, 3000)]

    def test_matches_grid_oracle(self):
        ticks = gen_random_walk_ticks(3000, seed=7)
        grid = {"ls": [8, 16], "rho_min": [1.0, 1.2]}
        steps = self_educate(ticks.mid, ticks.spread, grid, (1500, 750), self.base)
        for st_ in steps:
            lo, hi = st_.learn
            scored = []
            for ls in grid["ls"]:
                for rho in grid["rho_min"]:
                    s, aux = trading_objective(ticks.slice(lo, hi), {"ls": ls, "rho_min": rho}, self.base)
                    if math.isfinite(s):
                        scored.append((-s, -aux["profit_pct"], ls, rho))
            _, _, ls, rho = min(scored)
            assert (st_.params.ls, st_.params.rho_min) == (ls, rho)

    def test_dominant_point(self):
        ticks = gen_random_walk_ticks(3000, seed=8)
        # rho_min = 1e9 admits no bin, so that point never trades
        steps = self_educate(ticks.mid, ticks.spread, {"rho_min": [1e9, 1.0]}, (1000, 500), self.base)
        assert all(s.params.rho_min == 1.0 for s in steps)

    def test_no_lookahead(self):
        ticks = gen_random_walk_ticks(3500, seed=9)
        grid = {"ls": [8, 16], "rho_min": [1.0, 1.2]}
        a = self_educate(ticks.mid, ticks.spread, grid, (1000, 500), self.base)
        mid = ticks.mid.copy()
        mid[2000:] = mid[2000:][::-1] * 1.01
        b = self_educate(mid, ticks.spread, grid, (1000, 500), self.base)
        # windows trading [1000, 1500) and [1500, 2000) learn from ticks before 2000
        assert [s.params for s in a[:2]] == [s.params for s in b[:2]]

    def test_empty_grid(self):
        ticks = gen_random_walk_ticks(3000, seed=6)
        with pytest.raises(ParameterError):
            self_educate(ticks.mid, ticks.spread, {"ls": []}, (1000, 500), self.base)


@pytest.mark.parametrize("kw", [{"ls": 1}, {"bins": 1}, {"max_positions": 0}, {"Q": 0.0}, {"template": "square"}])
def test_param_validation(kw):
    with pytest.raises(ParameterError):
        PmbcsParams(**kw)
