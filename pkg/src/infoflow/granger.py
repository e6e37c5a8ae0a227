"""Bivariate Granger causality with nested-model F tests."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy import special

from infoflow.errors import DataError, DegenerateDesignError

#: Columns whose component orthogonal to the earlier design columns is below
#: this fraction of their own norm make the design rank deficient.
RANK_TOL = 1e-10
#: Unrestricted fits with RSS below ``RSS_EPS * TSS(y)`` are flagged degenerate.
RSS_EPS = 1e-12


class FlowClass(enum.Enum):
    """Information-flow label of an unordered pair (X, Y) with X listed first."""

    MUTUAL = "mutual"
    ONE_WAY_XY = "oneway_xy"
    ONE_WAY_YX = "oneway_yx"
    NO_EXCHANGE = "none"
    #: Set by the all-pairs sweep when a regression design is rank deficient.
    UNCLASSIFIABLE = "unclassifiable"

    def swapped(self) -> "FlowClass":
        if self is FlowClass.ONE_WAY_XY:
            return FlowClass.ONE_WAY_YX
        if self is FlowClass.ONE_WAY_YX:
            return FlowClass.ONE_WAY_XY
        return self


@dataclass(frozen=True)
class GrangerResult:
    """Outcome of testing ``source`` -> ``target`` with ``lag`` lags."""

    source: str
    target: str
    lag: int
    f_stat: float
    df_num: int
    df_den: int
    p_value: float
    degenerate: bool = False

    @property
    def direction(self) -> tuple[str, str]:
        return (self.source, self.target)


def ols_rss(y, regressors) -> float:
    """Residual sum of squares of the least-squares fit of ``y`` on ``regressors``.

    Solved through a Householder QR factorisation. The design must contain an
    intercept column and be of full column rank, otherwise
    :class:`DegenerateDesignError` is raised.
    """
    y = np.asarray(y, dtype=np.float64)
    X = np.asarray(regressors, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n, p = X.shape
    if y.shape != (n,):
        raise DataError(f"y has {y.shape[0]} rows but regressors have {n}")
    if n <= p:
        raise DataError(f"need more rows than columns, got {n}x{p}")
    col_norms = np.linalg.norm(X, axis=0)
    if not np.any(np.all(X == X[0], axis=0) & (X[0] != 0)):
        raise DataError("design matrix needs an intercept column")
    Q, R = np.linalg.qr(X)
    if np.any(~(np.abs(np.diag(R)) > RANK_TOL * col_norms)):
        raise DegenerateDesignError("rank-deficient design matrix")
    # residual = y minus its projection; a second pass cleans up rounding
    e = y - Q @ (Q.T @ y)
    e -= Q @ (Q.T @ e)
    return float(e @ e)


def lag_matrix(series: np.ndarray, lag: int) -> np.ndarray:
    """Columns ``series[t-1], ..., series[t-lag]`` for ``t = lag .. T-1``."""
    T = len(series)
    return np.column_stack([series[lag - c:T - c] for c in range(1, lag + 1)])


def f_cdf(x: float, d1: int, d2: int) -> float:
    """``P(F <= x)`` for an F distribution with ``(d1, d2)`` degrees of freedom."""
    _check_f_args(x, d1, d2)
    if x == 0:
        return 0.0
    if np.isinf(x):
        return 1.0
    return float(special.betainc(d1 / 2.0, d2 / 2.0, d1 * x / (d1 * x + d2)))


def f_sf(x: float, d1: int, d2: int) -> float:
    """Upper tail ``1 - f_cdf(x, d1, d2)``, evaluated without cancellation."""
    _check_f_args(x, d1, d2)
    if x == 0:
        return 1.0
    if np.isinf(x):
        return 0.0
    return float(special.betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * x)))


def _check_f_args(x, d1, d2):
    if not (x >= 0):
        raise ValueError(f"F quantile must be non-negative, got {x}")
    if int(d1) != d1 or int(d2) != d2 or d1 < 1 or d2 < 1:
        raise ValueError(f"degrees of freedom must be positive integers, got ({d1}, {d2})")


def f_pvalues(ess, rss_u, tss, df_num, df_den):
    """Vectorised F statistics and p-values from explained / residual sums.

    ``ess`` is ``RSS_r - RSS_u``. Returns ``(f_stat, p_value, degenerate)``;
    degenerate fits get ``f_stat = inf`` and ``p_value = 0``.
    """
    ess = np.asarray(ess, dtype=np.float64)
    rss_u = np.asarray(rss_u, dtype=np.float64)
    degenerate = rss_u < RSS_EPS * np.asarray(tss, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        f = (np.maximum(ess, 0.0) / df_num) / (rss_u / df_den)
        f = np.where(degenerate, np.inf, f)
        p = special.betainc(df_den / 2.0, df_num / 2.0, df_den / (df_den + df_num * f))
    p = np.where(degenerate, 0.0, p)
    return f, p, degenerate


def granger_f_test(x, y, lag: int, source: str = "x", target: str = "y") -> GrangerResult:
    """Test whether lags of ``x`` help predict ``y`` beyond ``y``'s own lags.

    Both models are fitted on the same ``T - lag`` rows. The restricted model
    regresses ``y_t`` on an intercept and ``y_{t-1..t-lag}``; the unrestricted
    model adds ``x_{t-1..t-lag}``.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape:
        raise DataError(f"series lengths differ: {x.shape} vs {y.shape}")
    if int(lag) != lag or lag < 1:
        raise DataError(f"lag must be an integer >= 1, got {lag}")
    T = len(y)
    n = T - lag
    df_den = n - 2 * lag - 1
    if df_den < 1:
        raise DataError(f"{T} observations are too few for lag {lag}")

    target_now = y[lag:]
    ones = np.ones((n, 1))
    restricted = np.hstack([ones, lag_matrix(y, lag)])
    unrestricted = np.hstack([restricted, lag_matrix(x, lag)])
    rss_r = ols_rss(target_now, restricted)
    rss_u = ols_rss(target_now, unrestricted)
    tss = float(np.sum((target_now - target_now.mean()) ** 2))
    f, p, degenerate = f_pvalues(rss_r - rss_u, rss_u, tss, lag, df_den)
    return GrangerResult(
        source=source,
        target=target,
        lag=int(lag),
        f_stat=float(f),
        df_num=int(lag),
        df_den=int(df_den),
        p_value=float(p),
        degenerate=bool(degenerate),
    )


def _label(p_xy, p_yx, alpha: float) -> FlowClass:
    if p_xy < alpha and p_yx < alpha:
        return FlowClass.MUTUAL
    if p_xy < alpha:
        return FlowClass.ONE_WAY_XY
    if p_yx < alpha:
        return FlowClass.ONE_WAY_YX
    return FlowClass.NO_EXCHANGE


def classify_pair(res_xy: GrangerResult, res_yx: GrangerResult, alpha: float = 0.05) -> FlowClass:
    """Label the pair tested in both directions at significance ``alpha``."""
    if (res_xy.source, res_xy.target) != (res_yx.target, res_yx.source):
        raise ValueError(
            f"results are not the two directions of one pair: "
            f"{res_xy.direction} vs {res_yx.direction}"
        )
    if res_xy.lag != res_yx.lag:
        raise ValueError(f"lag mismatch: {res_xy.lag} vs {res_yx.lag}")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return _label(res_xy.p_value, res_yx.p_value, alpha)
