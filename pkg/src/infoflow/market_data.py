"""Price panel ingestion, log returns, time-scale aggregation and shuffling."""
from __future__ import annotations

import csv
import datetime as dt
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from infoflow import _rng
from infoflow.errors import DataError

logger = logging.getLogger(__name__)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PricePanel:
    """Daily closing prices, ``prices[t, i]`` for date ``t`` and ticker ``i``."""

    dates: tuple[dt.date, ...]
    tickers: tuple[str, ...]
    prices: np.ndarray
    dropped: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "prices", _frozen(self.prices))
        if self.prices.shape != (len(self.dates), len(self.tickers)):
            raise DataError(
                f"price matrix shape {self.prices.shape} does not match "
                f"{len(self.dates)} dates x {len(self.tickers)} tickers"
            )
        if len(set(self.tickers)) != len(self.tickers):
            raise DataError("duplicate tickers")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise DataError("non-monotone dates")
        if not np.all(np.isfinite(self.prices)) or np.any(self.prices <= 0):
            raise DataError("prices must be finite and strictly positive")

    @property
    def n_tickers(self) -> int:
        return len(self.tickers)


@dataclass(frozen=True, eq=False)
class ReturnPanel:
    """Log returns at time scale ``time_scale`` (days), one column per ticker.

    ``shuffle_seed`` is ``None`` for the original ordering and holds the master
    seed when the columns were permuted by :func:`shuffle_panel`.
    """

    tickers: tuple[str, ...]
    returns: np.ndarray
    time_scale: int = 1
    shuffle_seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "tickers", tuple(self.tickers))
        r = _frozen(self.returns)
        if r.ndim == 1:
            r = _frozen(r.reshape(-1, 1))
        object.__setattr__(self, "returns", r)
        if r.ndim != 2 or r.shape[1] != len(self.tickers):
            raise DataError(f"returns shape {r.shape} does not match {len(self.tickers)} tickers")
        if len(set(self.tickers)) != len(self.tickers):
            raise DataError("duplicate tickers")
        if not np.all(np.isfinite(r)):
            raise DataError("returns must be finite")
        if int(self.time_scale) != self.time_scale or self.time_scale < 1:
            raise DataError("time_scale must be an integer >= 1")

    @property
    def provenance(self) -> str:
        if self.shuffle_seed is None:
            return "original"
        return f"shuffled({self.shuffle_seed})"

    @property
    def n_obs(self) -> int:
        return self.returns.shape[0]

    @property
    def n_tickers(self) -> int:
        return self.returns.shape[1]

    def column(self, ticker: str) -> np.ndarray:
        return self.returns[:, self.tickers.index(ticker)]


def _parse_date(text: str, lineno: int) -> dt.date:
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise DataError(f"line {lineno}: malformed date {text!r}") from None


def load_prices(source: str | Path, drop_incomplete: bool = False) -> PricePanel:
    """Read a wide ``date,<ticker>,...`` CSV file into a validated panel.

    A cell is unusable when empty, non-finite or not strictly positive. With
    ``drop_incomplete`` such tickers are removed (and listed in
    ``PricePanel.dropped``); otherwise a :class:`DataError` is raised.
    """
    path = Path(source)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc

    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2 or header[0].lower() != "date":
        raise DataError(f"{path}: header must be 'date,<ticker>,...'")
    tickers = header[1:]
    if any(not t for t in tickers) or len(set(tickers)) != len(tickers):
        raise DataError(f"{path}: empty or duplicate ticker names in header")

    dates = []
    values = np.full((len(rows) - 1, len(tickers)), np.nan)
    for r, row in enumerate(rows[1:]):
        lineno = r + 2
        if len(row) != len(header):
            raise DataError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        dates.append(_parse_date(row[0], lineno))
        for c, cell in enumerate(row[1:]):
            cell = cell.strip()
            if not cell:
                continue
            try:
                values[r, c] = float(cell)
            except ValueError:
                raise DataError(f"line {lineno}: malformed price {cell!r}") from None

    if not dates:
        raise DataError(f"{path}: no data rows")
    if any(b <= a for a, b in zip(dates, dates[1:])):
        raise DataError("non-monotone dates")

    usable = np.isfinite(values) & (values > 0)
    bad = ~usable.all(axis=0)
    if bad.any():
        bad_names = [t for t, b in zip(tickers, bad) if b]
        if not drop_incomplete:
            raise DataError(
                f"missing or non-positive prices for {', '.join(bad_names)} "
                "(set drop_incomplete to discard them)"
            )
        logger.warning("dropping incomplete tickers: %s", ", ".join(bad_names))
    keep = ~bad
    if not keep.any():
        raise DataError("no usable tickers")
    return PricePanel(
        dates=dates,
        tickers=[t for t, k in zip(tickers, keep) if k],
        prices=values[:, keep],
        dropped=tuple(t for t, b in zip(tickers, bad) if b),
    )


def log_returns(panel: PricePanel) -> ReturnPanel:
    """Daily log returns ``ln P(t+1) - ln P(t)``."""
    if len(panel.dates) < 2:
        raise DataError("need at least two price rows for returns")
    return ReturnPanel(panel.tickers, np.diff(np.log(panel.prices), axis=0), time_scale=1)


def aggregate_returns(panel: ReturnPanel, k: int) -> ReturnPanel:
    """Non-overlapping ``k``-row block sums; trailing rows that do not fill a
    block are discarded."""
    if int(k) != k or k < 1:
        raise DataError(f"time scale must be an integer >= 1, got {k}")
    if panel.time_scale != 1:
        raise DataError("aggregation expects a daily (k=1) return panel")
    if panel.n_obs < k:
        raise DataError(f"{panel.n_obs} returns cannot fill one block of {k}")
    if k == 1:
        return panel
    n_blocks = panel.n_obs // k
    r = panel.returns[: n_blocks * k]
    summed = r.reshape(n_blocks, k, panel.n_tickers).sum(axis=1)
    return ReturnPanel(panel.tickers, summed, time_scale=k, shuffle_seed=panel.shuffle_seed)


def shuffle_panel(panel: ReturnPanel, master_seed: int) -> ReturnPanel:
    """Permute each column independently.

    Column ``i`` uses the PCG64 stream ``SeedSequence(master_seed,
    spawn_key=(i,))`` and a Fisher-Yates shuffle, so the result is a pure
    function of ``(panel, master_seed)`` whatever order columns are visited in.
    """
    if int(master_seed) != master_seed or master_seed < 0:
        raise DataError("master_seed must be a non-negative integer")
    out = np.empty_like(panel.returns)
    for i in range(panel.n_tickers):
        perm = _rng.permutation(_rng.stream(int(master_seed), i), panel.n_obs)
        out[:, i] = panel.returns[perm, i]
    return ReturnPanel(panel.tickers, out, time_scale=panel.time_scale,
                       shuffle_seed=int(master_seed))


def returns_from_columns(columns: dict[str, Sequence[float]]) -> ReturnPanel:
    """Convenience constructor from ``{ticker: returns}``."""
    tickers = list(columns)
    return ReturnPanel(tickers, np.column_stack([np.asarray(columns[t], float) for t in tickers]))

