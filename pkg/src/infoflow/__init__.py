"""Pairwise information flow in asset panels via all-pairs Granger causality,
with shuffled-surrogate controls and approximate-entropy efficiency direction."""

__version__ = "0.1.0"

from infoflow._backend import BACKEND
from infoflow.entropy import ApEnScore, apen, efficiency_rank, phi
from infoflow.errors import ConfigError, DataError, DegenerateDesignError, InfoflowError
from infoflow.flow import FlowMatrix, FrCurves, analyze_market, fr_curves, frequency_ratio
from infoflow.granger import (
    FlowClass,
    GrangerResult,
    classify_pair,
    f_cdf,
    granger_f_test,
    ols_rss,
)
from infoflow.market_data import (
    PricePanel,
    ReturnPanel,
    aggregate_returns,
    load_prices,
    log_returns,
    shuffle_panel,
)
from infoflow.synth import SynthSpec, apen_bruteforce, f_oracle_check, gen_var

__all__ = [
    "BACKEND", "ApEnScore", "apen", "efficiency_rank", "phi",
    "ConfigError", "DataError", "DegenerateDesignError", "InfoflowError",
    "FlowMatrix", "FrCurves", "analyze_market", "fr_curves", "frequency_ratio",
    "FlowClass", "GrangerResult", "classify_pair", "f_cdf", "granger_f_test", "ols_rss",
    "PricePanel", "ReturnPanel", "aggregate_returns", "load_prices", "log_returns",
    "shuffle_panel", "SynthSpec", "apen_bruteforce", "f_oracle_check", "gen_var",
]
