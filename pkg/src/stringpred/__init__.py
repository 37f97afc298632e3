"""String-map transforms, string-invariant forecasting and momentum trading on tick data."""

__version__ = "0.1.0"

from .backtest import BacktestConfig, BacktestReport, Trade, run_backtest
from .errors import StringPredError
from .marketdata import DataSplit, PriceSeries, TickQuote, TickSeries, gen_random_walk_ticks, gen_sinusoid
from .metrics import error_report, kl_divergence, mae, naive_forecast, sharpe, smape
from .optimize import ParameterGrid, error_surface, grid_search, select_best
from .pmbcs import PmbcsParams, momentum
from .pmbsi import PmbsiParams, SimpleInvariantParams, forecast_series, predict, predict_iterated
from .stringmap import StringWindowConfig, compactify, standardize, string1, string2
