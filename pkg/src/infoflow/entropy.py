"""Approximate entropy (ApEn) as a measure of return-series efficiency.

Self-matches are counted, so every window matches at least itself and the
logarithms are always finite. The tolerance is ``r_frac`` times the sample
standard deviation (``ddof=1``) of the series.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from infoflow._backend import kernels
from infoflow.errors import DataError
from infoflow.market_data import ReturnPanel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ApEnScore:
    ticker: str
    m: int
    r_frac: float
    r_abs: float
    value: float


def phi(series, m: int, r_abs: float) -> float:
    """Average log fraction of length-``m`` windows within ``r_abs`` of each window."""
    x = np.ascontiguousarray(series, dtype=np.float64)
    if x.ndim != 1:
        raise DataError("series must be one-dimensional")
    if m < 1:
        raise DataError(f"embedding dimension must be >= 1, got {m}")
    if len(x) < m + 1:
        raise DataError(f"series of length {len(x)} too short for m={m}")
    if not r_abs >= 0:
        raise DataError(f"tolerance must be non-negative, got {r_abs}")
    nw = len(x) - m + 1
    counts = kernels.match_counts(x, int(m), float(r_abs))
    return float(np.mean(np.log(counts / nw)))


def apen(series, m: int = 2, r_frac: float = 0.2, ticker: str = "") -> ApEnScore:
    """``phi(m) - phi(m + 1)`` with tolerance ``r_frac * std(series)``."""
    x = np.ascontiguousarray(series, dtype=np.float64)
    if x.ndim != 1 or len(x) < m + 2:
        raise DataError(f"series of length {len(x)} too short for ApEn with m={m}")
    if not np.all(np.isfinite(x)):
        raise DataError("series must be finite")
    if not r_frac >= 0:
        raise DataError(f"r_frac must be non-negative, got {r_frac}")
    r_abs = float(r_frac * np.std(x, ddof=1))
    value = phi(x, m, r_abs) - phi(x, m + 1, r_abs)
    return ApEnScore(ticker=ticker, m=int(m), r_frac=float(r_frac), r_abs=r_abs, value=value)


def efficiency_rank(panel: ReturnPanel, m: int = 2, r_frac: float = 0.2,
                    threads: int | None = None) -> dict[str, ApEnScore]:
    """ApEn of every daily return column; a higher value means more efficient."""
    if panel.time_scale != 1:
        raise DataError("efficiency is measured on daily (k=1) returns")

    def one(i):
        ticker = panel.tickers[i]
        try:
            return apen(panel.returns[:, i], m, r_frac, ticker=ticker)
        except DataError as exc:
            raise DataError(f"ticker {ticker}: {exc}") from exc

    with ThreadPoolExecutor(max_workers=threads or 1) as pool:
        scores = list(pool.map(one, range(panel.n_tickers)))
    return {s.ticker: s for s in scores}
