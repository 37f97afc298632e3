import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stringpred.errors import ParameterError, ParseError, ValidationError, ZeroPriceError
from stringpred.marketdata import (
    PriceSeries,
    TickQuote,
    TickSeries,
    gen_random_walk_ticks,
    gen_sinusoid,
    mid_price,
    parse_series,
    parse_ticks,
    read_series,
    read_ticks,
    returns,
    split,
    split_counts,
    write_series,
    write_ticks,
)


class TestParseTicks:
    def test_two_records(self):
        ticks = parse_ticks("0,1.3000,1.3002\n1,1.3001,1.3003")
        assert len(ticks) == 2
        assert ticks.bid[0] == 1.3000
        assert ticks.ask[1] == 1.3003
        np.testing.assert_array_equal(ticks.timestamps, [0, 1])

    def test_empty_document(self):
        assert len(parse_ticks("")) == 0

    def test_ask_below_bid(self):
        with pytest.raises(ValidationError):
            parse_ticks("0,1.3002,1.3000")

    def test_header_is_skipped(self):
        ticks = parse_ticks("timestamp_ms,bid,ask\n5,1.0,1.1\n")
        assert len(ticks) == 1 and ticks.timestamps[0] == 5

    def test_malformed_record_names_line(self):
        with pytest.raises(ParseError, match="line 3"):
            parse_ticks("0,1.0,1.1\n1,1.0,1.1\n2,abc,1.1\n")

    def test_wrong_field_count(self):
        with pytest.raises(ParseError, match="line 1"):
            parse_ticks("0,1.0\n")

    def test_decreasing_timestamps_rejected(self):
        with pytest.raises(ValidationError):
            parse_ticks("5,1.0,1.1\n4,1.0,1.1\n")

    def test_file_round_trip(self, tmp_path):
        ticks = gen_random_walk_ticks(200, seed=7)
        path = tmp_path / "ticks.csv"
        write_ticks(path, ticks)
        back = read_ticks(path)
        np.testing.assert_array_equal(back.timestamps, ticks.timestamps)
        np.testing.assert_array_equal(back.bid, ticks.bid)
        np.testing.assert_array_equal(back.ask, ticks.ask)


class TestQuotes:
    @pytest.mark.parametrize(
        "bid, ask, mid",
        [(1.30, 1.30, 1.30), (1.3000, 1.3002, 1.3001), (2.0, 4.0, 3.0)],
    )
    def test_mid_price(self, bid, ask, mid):
        assert mid_price(TickQuote(0, bid, ask)) == pytest.approx(mid, abs=1e-15)

    def test_quote_invariants(self):
        with pytest.raises(ValidationError):
            TickQuote(0, 1.2, 1.1)
        with pytest.raises(ValidationError):
            TickQuote(0, 0.0, 1.1)

    @given(st.floats(0.01, 100.0), st.floats(0.0, 1.0))
    def test_mid_is_arithmetic_mean(self, bid, spread):
        q = TickQuote(0, bid, bid + spread)
        assert 2 * q.mid - q.bid - q.ask == pytest.approx(0.0, abs=1e-13)

    def test_tick_series_is_read_only(self):
        ticks = TickSeries.from_mid([1.0, 1.1, 1.2], 0.02)
        with pytest.raises(ValueError):
            ticks.bid[0] = 5.0
        np.testing.assert_allclose(ticks.mid, [1.0, 1.1, 1.2])
        np.testing.assert_allclose(ticks.spread, 0.02)


class TestReturns:
    def test_hand_cases(self):
        np.testing.assert_allclose(np.asarray(returns(PriceSeries([1.0, 2.0]), 1)), [0.5])
        np.testing.assert_allclose(np.asarray(returns(PriceSeries([2.0, 1.0]), 1)), [-1.0])

    @pytest.mark.parametrize("h", [1, 2, 5])
    def test_constant_series(self, h):
        np.testing.assert_array_equal(np.asarray(returns(PriceSeries(np.full(10, 3.3)), h)), 0.0)

    def test_zero_price_reports_index(self):
        with pytest.raises(ZeroPriceError) as info:
            returns(PriceSeries([1.0, 2.0, 0.0, 4.0]), 1)
        assert info.value.index == 2

    def test_length(self):
        assert len(returns(PriceSeries(np.arange(1.0, 11.0)), 3)) == 7

    @given(st.floats(0.1, 10.0), st.floats(0.8, 1.25), st.integers(1, 6))
    def test_geometric_series_constant_return(self, c, r, h):
        s = PriceSeries(c * r ** np.arange(20))
        np.testing.assert_allclose(np.asarray(returns(s, h)), 1 - r ** (-h), rtol=1e-9, atol=1e-13)


class TestSplit:
    def test_fractions(self):
        assert split(PriceSeries(np.arange(10.0)), 0.5, 0.3).sizes == (5, 3, 2)

    def test_sinusoid_half(self):
        assert split(gen_sinusoid(51), 0.5, 0.0).sizes == (25, 0, 26)

    @pytest.mark.parametrize("f", [(1.2, 0.0), (-0.1, 0.2), (0.7, 0.5)])
    def test_bad_fractions(self, f):
        with pytest.raises(ParameterError):
            split(PriceSeries(np.arange(10.0)), *f)

    @given(st.integers(1, 200), st.floats(0, 1), st.floats(0, 1))
    def test_order_and_length_preserved(self, n, a, b):
        if a + b > 1:
            a, b = a / (a + b), b / (a + b) * 0.999
        x = np.arange(float(n))
        sp = split(PriceSeries(x), a, b)
        joined = np.concatenate([np.asarray(sp.train), np.asarray(sp.eval), np.asarray(sp.valid)])
        np.testing.assert_array_equal(joined, x)

    def test_origins_track_position(self):
        sp = split_counts(PriceSeries(np.arange(10.0), origin_index=100), 4, 3)
        assert (sp.train.origin_index, sp.eval.origin_index, sp.valid.origin_index) == (100, 104, 107)


class TestSinusoid:
    def test_canonical(self):
        s = np.asarray(gen_sinusoid(51))
        assert s[0] == 0.0
        assert s[12] == pytest.approx(math.sin(24 * math.pi / 50), abs=1e-15)
        assert s[0] == pytest.approx(s[-1], abs=1e-14)

    def test_zero_amplitude(self):
        np.testing.assert_array_equal(np.asarray(gen_sinusoid(5, amplitude=0.0, offset=2.5)), 2.5)


class TestSeriesIO:
    def test_round_trip(self, tmp_path):
        s = PriceSeries([0.1, -0.2, 1e-17, 3.0], origin_index=7)
        write_series(tmp_path / "s.csv", s)
        back = read_series(tmp_path / "s.csv")
        assert back.origin_index == 7
        np.testing.assert_array_equal(np.asarray(back), np.asarray(s))

    def test_gap_in_index(self):
        with pytest.raises(ParseError):
            parse_series("index,price\n0,1.0\n2,1.0\n")


def test_random_walk_reproducible():
    a = gen_random_walk_ticks(1000, seed=3)
    b = gen_random_walk_ticks(1000, seed=3)
    np.testing.assert_array_equal(a.bid, b.bid)
    assert np.all(a.ask >= a.bid) and np.all(np.diff(a.timestamps) > 0)
