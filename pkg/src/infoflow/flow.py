"""All-pairs information-flow sweep over time scales and lag lengths.

Every unordered pair ``(i, j)`` with ``i < j`` is tested in both directions and
labelled with a :class:`~infoflow.granger.FlowClass`. Pairs are indexed in
``numpy.triu_indices`` order; per-target work may run on several threads, but
results are written into fixed slots so the output never depends on scheduling.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from infoflow._backend import kernels
from infoflow.entropy import ApEnScore
from infoflow.errors import DataError
from infoflow.granger import FlowClass, f_pvalues
from infoflow.market_data import ReturnPanel, aggregate_returns

logger = logging.getLogger(__name__)

CLASS_ORDER = (
    FlowClass.MUTUAL,
    FlowClass.ONE_WAY_XY,
    FlowClass.ONE_WAY_YX,
    FlowClass.NO_EXCHANGE,
    FlowClass.UNCLASSIFIABLE,
)
MUTUAL, ONE_WAY_XY, ONE_WAY_YX, NO_EXCHANGE, UNCLASSIFIABLE = range(5)
_CODE = {cls: code for code, cls in enumerate(CLASS_ORDER)}


def n_pairs(n_tickers: int) -> int:
    return n_tickers * (n_tickers - 1) // 2


def frequency_ratio(count: int, n_tickers: int, n_excluded: int = 0) -> float:
    """``count / (N(N-1)/2 - n_excluded)``; NaN when every pair is excluded."""
    if n_tickers < 2:
        raise ValueError(f"need at least two tickers, got {n_tickers}")
    total = n_pairs(n_tickers) - n_excluded
    if n_excluded < 0 or total < 0:
        raise ValueError(f"n_excluded={n_excluded} out of range for N={n_tickers}")
    if not 0 <= count <= total:
        raise ValueError(f"count {count} outside [0, {total}]")
    if total == 0:
        return float("nan")
    return count / total


@dataclass(frozen=True, eq=False)
class FlowMatrix:
    """Pair labels for one ``(k, l)`` cell.

    ``codes[p]`` indexes :data:`CLASS_ORDER` for pair ``p`` of
    ``numpy.triu_indices(n_tickers, 1)``; ``p_xy`` is the p-value of the
    lower-index ticker driving the higher-index one, ``p_yx`` the reverse.
    """

    k: int
    l: int
    tickers: tuple[str, ...]
    codes: np.ndarray
    p_xy: np.ndarray
    p_yx: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "tickers", tuple(self.tickers))
        if self.codes.shape != (n_pairs(len(self.tickers)),):
            raise ValueError("one code per unordered pair required")

    @property
    def n_tickers(self) -> int:
        return len(self.tickers)

    def pair_indices(self) -> tuple[np.ndarray, np.ndarray]:
        return np.triu_indices(self.n_tickers, 1)

    @property
    def classes(self) -> dict[tuple[int, int], FlowClass]:
        iu, ju = self.pair_indices()
        return {(int(i), int(j)): CLASS_ORDER[c] for i, j, c in zip(iu, ju, self.codes)}

    def counts(self) -> dict[FlowClass, int]:
        binc = np.bincount(self.codes, minlength=len(CLASS_ORDER))
        return {cls: int(binc[c]) for c, cls in enumerate(CLASS_ORDER)}

    @classmethod
    def from_classes(cls, k: int, l: int, tickers: Sequence[str],
                     classes: Mapping[tuple[int, int], FlowClass]) -> "FlowMatrix":
        """Build from an explicit ``{(i, j): FlowClass}`` map covering all i < j."""
        n = len(tickers)
        iu, ju = np.triu_indices(n, 1)
        if set(classes) != set(zip(iu.tolist(), ju.tolist())):
            raise ValueError("classes must cover exactly the pairs i < j")
        codes = np.array([_CODE[classes[(i, j)]] for i, j in zip(iu.tolist(), ju.tolist())],
                         dtype=np.int8)
        nan = np.full(len(codes), np.nan)
        return cls(k, l, tuple(tickers), codes, nan, nan.copy())


def directed_tests(panel: ReturnPanel, lag: int, threads: int | None = None):
    """Granger p-values for every ordered pair of ``panel`` columns.

    Returns ``(p, f, ok)`` as ``N x N`` arrays indexed ``[source, target]``;
    ``ok`` is False on the diagonal and where a design was rank deficient.
    """
    series = np.ascontiguousarray(panel.returns.T)
    N, T = series.shape
    df_den = T - lag - 2 * lag - 1
    if df_den < 1:
        raise DataError(
            f"cell k={panel.time_scale}, l={lag}: {T} observations are too few"
        )
    stack = kernels.lag_stack(series, lag)
    ess = np.empty((N, N))
    rss_u = np.empty((N, N))
    status = np.empty((N, N), dtype=np.int8)
    tss = np.empty(N)

    def run(j):
        return j, kernels.granger_target(series, stack, j, lag)

    with ThreadPoolExecutor(max_workers=threads or 1) as pool:
        for j, (_, tss_j, rss_u_j, ess_j, status_j) in pool.map(run, range(N)):
            ess[:, j] = ess_j
            rss_u[:, j] = rss_u_j
            status[:, j] = status_j
            tss[j] = tss_j

    ok = status == kernels.STATUS_OK
    f, p, _ = f_pvalues(np.where(ok, ess, 0.0), np.where(ok, rss_u, 1.0),
                        tss[None, :], lag, df_den)
    return np.where(ok, p, np.nan), np.where(ok, f, np.nan), ok


def classify_matrix(p: np.ndarray, ok: np.ndarray, alpha: float):
    """Pair codes plus ``(p_xy, p_yx)`` from a directed p-value matrix."""
    iu, ju = np.triu_indices(p.shape[0], 1)
    p_xy, p_yx = p[iu, ju], p[ju, iu]
    sig_xy, sig_yx = p_xy < alpha, p_yx < alpha
    codes = np.full(len(iu), NO_EXCHANGE, dtype=np.int8)
    codes[sig_xy & ~sig_yx] = ONE_WAY_XY
    codes[~sig_xy & sig_yx] = ONE_WAY_YX
    codes[sig_xy & sig_yx] = MUTUAL
    codes[~(ok[iu, ju] & ok[ju, iu])] = UNCLASSIFIABLE
    return codes, p_xy, p_yx


def _check_grid(values: Iterable[int], name: str) -> list[int]:
    values = list(values)
    if not values:
        raise DataError(f"{name} must not be empty")
    if any(int(v) != v or v < 1 for v in values):
        raise DataError(f"{name} entries must be integers >= 1, got {values}")
    return [int(v) for v in values]


def analyze_market(panel: ReturnPanel, k_set: Iterable[int] = range(1, 6),
                   l_set: Iterable[int] = range(1, 6), alpha: float = 0.05,
                   threads: int | None = None) -> list[FlowMatrix]:
    """Classify every pair for each ``(k, l)``; returns matrices in grid order."""
    k_set = _check_grid(k_set, "k_set")
    l_set = _check_grid(l_set, "l_set")
    if not 0 < alpha < 1:
        raise DataError(f"alpha must lie in (0, 1), got {alpha}")
    if panel.n_tickers < 2:
        raise DataError("need at least two tickers")
    for k in k_set:
        n_obs = panel.n_obs // k
        for l in l_set:
            if n_obs - 3 * l - 1 < 1:
                raise DataError(f"cell k={k}, l={l}: {n_obs} aggregated returns are too few")

    out = []
    for k in k_set:
        agg = aggregate_returns(panel, k)
        for l in l_set:
            p, _, ok = directed_tests(agg, l, threads)
            codes, p_xy, p_yx = classify_matrix(p, ok, alpha)
            fm = FlowMatrix(k, l, panel.tickers, codes, p_xy, p_yx)
            n_bad = int(np.count_nonzero(codes == UNCLASSIFIABLE))
            if n_bad:
                logger.warning("k=%d l=%d: %d unclassifiable pairs", k, l, n_bad)
            out.append(fm)
    return out


@dataclass(frozen=True)
class FrCell:
    k: int
    l: int
    fr_mutual: float
    fr_oneway: float
    fr_none: float
    fr_eff_forward: float
    fr_eff_backward: float
    n_tied: int
    n_unclassifiable: int
    n_pairs: int


@dataclass(frozen=True)
class FrCurves:
    """Frequency ratios for every analysed ``(k, l)`` cell."""

    cells: tuple[FrCell, ...]

    def cell(self, k: int, l: int) -> FrCell:
        for c in self.cells:
            if c.k == k and c.l == l:
                return c
        raise KeyError((k, l))

    def versus_k(self, field: str, l: int) -> list[tuple[int, float]]:
        return [(c.k, getattr(c, field)) for c in self.cells if c.l == l]

    def versus_l(self, field: str, k: int) -> list[tuple[int, float]]:
        return [(c.l, getattr(c, field)) for c in self.cells if c.k == k]


def efficiency_split(fm: FlowMatrix, apen_values: np.ndarray) -> tuple[int, int, int]:
    """Count one-way pairs whose source is the higher-ApEn member (forward),
    the lower-ApEn member (backward), or tied."""
    iu, ju = fm.pair_indices()
    one_way = (fm.codes == ONE_WAY_XY) | (fm.codes == ONE_WAY_YX)
    src = np.where(fm.codes == ONE_WAY_XY, iu, ju)[one_way]
    dst = np.where(fm.codes == ONE_WAY_XY, ju, iu)[one_way]
    a_src, a_dst = apen_values[src], apen_values[dst]
    return (int(np.count_nonzero(a_src > a_dst)),
            int(np.count_nonzero(a_src < a_dst)),
            int(np.count_nonzero(a_src == a_dst)))


def fr_curves(matrices: Sequence[FlowMatrix], scores: Mapping[str, ApEnScore]) -> FrCurves:
    """Category and efficiency-directed frequency ratios.

    Unclassifiable pairs leave every denominator; tied-ApEn one-way pairs stay
    in ``fr_oneway`` but are left out of both directed ratios.
    """
    if not matrices:
        raise DataError("no flow matrices given")
    tickers = matrices[0].tickers
    if any(m.tickers != tickers for m in matrices):
        raise DataError("flow matrices do not share one ticker universe")
    missing = [t for t in tickers if t not in scores]
    if missing:
        raise DataError(f"ApEn score missing for {', '.join(missing)}")
    values = np.array([scores[t].value for t in tickers])
    N = len(tickers)

    cells = []
    for fm in matrices:
        counts = np.bincount(fm.codes, minlength=len(CLASS_ORDER))
        bad = int(counts[UNCLASSIFIABLE])
        fwd, bwd, tied = efficiency_split(fm, values)
        fr = lambda c: frequency_ratio(int(c), N, bad)  # noqa: E731
        cells.append(FrCell(
            k=fm.k,
            l=fm.l,
            fr_mutual=fr(counts[MUTUAL]),
            fr_oneway=fr(counts[ONE_WAY_XY] + counts[ONE_WAY_YX]),
            fr_none=fr(counts[NO_EXCHANGE]),
            fr_eff_forward=fr(fwd),
            fr_eff_backward=fr(bwd),
            n_tied=tied,
            n_unclassifiable=bad,
            n_pairs=n_pairs(N),
        ))
    return FrCurves(tuple(cells))
