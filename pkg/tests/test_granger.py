import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from infoflow.errors import DataError, DegenerateDesignError
from infoflow.granger import (
    FlowClass,
    GrangerResult,
    classify_pair,
    f_cdf,
    f_sf,
    granger_f_test,
    lag_matrix,
    ols_rss,
)


def normal_equations_rss(y, X):
    """Independent oracle: solve (X'X) b = X'y directly."""
    beta = np.linalg.solve(X.T @ X, X.T @ y)
    r = y - X @ beta
    return float(r @ r)


def mp_granger_f(x, y, lag):
    """Brute-force F statistic via normal equations in 40-digit arithmetic."""
    mp.mp.dps = 40
    T = len(y)
    rows = range(lag, T)

    def rss(cols):
        X = mp.matrix([[c[t] for c in cols] for t in rows])
        Y = mp.matrix([y[t] for t in rows])
        beta = mp.lu_solve(X.T * X, X.T * Y)
        r = Y - X * beta
        return sum(v * v for v in r)

    ones = [mp.mpf(1)] * T
    ylags = [[mp.mpf(y[t - c]) if t >= c else mp.mpf(0) for t in range(T)] for c in range(1, lag + 1)]
    xlags = [[mp.mpf(x[t - c]) if t >= c else mp.mpf(0) for t in range(T)] for c in range(1, lag + 1)]
    rr = rss([ones] + ylags)
    ru = rss([ones] + ylags + xlags)
    df = T - lag - 2 * lag - 1
    return float(((rr - ru) / lag) / (ru / df))


def test_ols_exact_fit():
    X = np.column_stack([np.ones(3), [1.0, 2, 3]])
    assert ols_rss([1.0, 2, 3], X) == pytest.approx(0.0, abs=1e-12)


def test_ols_intercept_only():
    assert ols_rss([1.0, -1, 1, -1], np.ones((4, 1))) == pytest.approx(4.0)


def test_ols_matches_normal_equations():
    rng = np.random.default_rng(5)
    X = np.column_stack([np.ones(50), rng.standard_normal((50, 2))])
    y = rng.standard_normal(50)
    assert ols_rss(y, X) == pytest.approx(normal_equations_rss(y, X), rel=1e-8)


def test_ols_rank_deficient():
    X = np.column_stack([np.ones(10), np.full(10, 3.0)])
    with pytest.raises(DegenerateDesignError):
        ols_rss(np.arange(10.0), X)


@pytest.mark.parametrize("X", [np.ones((2, 2)), np.arange(6.0).reshape(3, 2)])
def test_ols_shape_errors(X):
    with pytest.raises(DataError):
        ols_rss(np.ones(len(X)), X)


def test_exact_lag_dependence_is_degenerate():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(200)
    y = np.concatenate([[0.0], x[:-1]])
    res = granger_f_test(x, y, 1)
    assert res.degenerate and res.p_value == 0.0


def test_affine_invariance_example():
    rng = np.random.default_rng(2)
    x, y = rng.standard_normal(300), rng.standard_normal(300)
    y[1:] += 0.2 * x[:-1]
    a = granger_f_test(x, y, 2).f_stat
    assert granger_f_test(10 * x + 3, y, 2).f_stat == pytest.approx(a, rel=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.1, 100), st.floats(-50, 50),
       st.floats(0.1, 100), st.floats(-50, 50), st.integers(1, 4))
def test_affine_invariance_property(seed, a, b, c, d, lag):
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal(120), rng.standard_normal(120)
    y[1:] += 0.3 * x[:-1]
    sign = -1 if seed % 2 else 1
    base = granger_f_test(x, y, lag)
    moved = granger_f_test(sign * a * x + b, c * y + d, lag)
    assert moved.f_stat == pytest.approx(base.f_stat, rel=1e-8)
    rev = granger_f_test(y, x, lag, source="y", target="x")
    moved_rev = granger_f_test(c * y + d, sign * a * x + b, lag, source="y", target="x")
    assert classify_pair(moved, moved_rev) == classify_pair(base, rev)


def test_constant_series_rejected():
    x = np.random.default_rng(0).standard_normal(50)
    with pytest.raises(DegenerateDesignError):
        granger_f_test(x, np.ones(50), 1)
    with pytest.raises(DegenerateDesignError):
        granger_f_test(np.ones(50), x, 1)


def test_input_validation():
    with pytest.raises(DataError):
        granger_f_test(np.ones(10), np.ones(11), 1)
    with pytest.raises(DataError):
        granger_f_test(np.arange(6.0), np.arange(6.0) ** 2, 2)
    with pytest.raises(DataError):
        granger_f_test(np.arange(6.0), np.arange(6.0), 0)


def test_degrees_of_freedom():
    rng = np.random.default_rng(3)
    res = granger_f_test(rng.standard_normal(100), rng.standard_normal(100), 3)
    assert (res.df_num, res.df_den) == (3, 100 - 3 - 7)


@pytest.mark.parametrize("case", range(100))
def test_matches_extended_precision_oracle(case):
    rng = np.random.default_rng(1000 + case)
    lag = 1 + case % 3
    T = int(rng.integers(3 * lag + 8, 61))
    x, y = rng.standard_normal(T), rng.standard_normal(T)
    y[1:] += rng.uniform(-0.5, 0.5) * x[:-1]
    res = granger_f_test(x, y, lag)
    assert res.f_stat >= 0
    assert res.f_stat == pytest.approx(mp_granger_f(x, y, lag), rel=1e-7)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 5))
def test_restricted_rss_dominates(seed, lag):
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal(80), rng.standard_normal(80)
    n = 80 - lag
    R = np.hstack([np.ones((n, 1)), lag_matrix(y, lag)])
    U = np.hstack([R, lag_matrix(x, lag)])
    assert ols_rss(y[lag:], R) >= ols_rss(y[lag:], U)
    res = granger_f_test(x, y, lag)
    assert res.f_stat >= 0 and 0 <= res.p_value <= 1


# F distribution

def mp_f_cdf(x, d1, d2):
    mp.mp.dps = 40
    return mp.betainc(mp.mpf(d1) / 2, mp.mpf(d2) / 2, 0, mp.mpf(d1) * x / (d1 * x + d2),
                      regularized=True)


def test_f_cdf_trivial():
    assert f_cdf(0, 3, 7) == 0.0
    for d in (1, 2, 5, 30, 1000):
        assert f_cdf(1.0, d, d) == pytest.approx(0.5, abs=1e-14)


def test_f_cdf_critical_value():
    assert f_cdf(4.9646, 1, 10) == pytest.approx(0.95, abs=1e-3)


@pytest.mark.parametrize("x", [0.01, 0.3, 1.0, 2.5, 7.0, 40.0])
@pytest.mark.parametrize("d1,d2", [(1, 1), (1, 10), (3, 20), (5, 100), (2, 1000), (10, 3)])
def test_f_cdf_relative_accuracy(x, d1, d2):
    ref = mp_f_cdf(x, d1, d2)
    assert f_cdf(x, d1, d2) == pytest.approx(float(ref), rel=1e-10)
    assert f_sf(x, d1, d2) == pytest.approx(float(1 - ref), rel=1e-10)


@pytest.mark.parametrize("args", [(-1, 1, 1), (1, 0, 1), (1, 1, 0), (1, 1.5, 2)])
def test_f_cdf_domain(args):
    with pytest.raises(ValueError):
        f_cdf(*args)


# classification

def _res(src, dst, p, lag=1):
    return GrangerResult(src, dst, lag, 1.0, lag, 10, p)


@pytest.mark.parametrize("p_xy,p_yx,expected", [
    (0.01, 0.20, FlowClass.ONE_WAY_XY),
    (0.01, 0.04, FlowClass.MUTUAL),
    (0.50, 0.50, FlowClass.NO_EXCHANGE),
    (0.30, 0.001, FlowClass.ONE_WAY_YX),
])
def test_classify_pair(p_xy, p_yx, expected):
    assert classify_pair(_res("X", "Y", p_xy), _res("Y", "X", p_yx), 0.05) is expected


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0.001, 0.999))
def test_classification_antisymmetry(p1, p2, alpha):
    a, b = _res("X", "Y", p1), _res("Y", "X", p2)
    assert classify_pair(b, a, alpha) is classify_pair(a, b, alpha).swapped()


def test_classify_mismatched_metadata():
    with pytest.raises(ValueError):
        classify_pair(_res("X", "Y", 0.1), _res("Z", "X", 0.1))
    with pytest.raises(ValueError):
        classify_pair(_res("X", "Y", 0.1), _res("Y", "X", 0.1, lag=2))


@pytest.mark.slow
def test_size_under_null():
    rejections = 0
    trials = 1000
    for seed in range(trials):
        rng = np.random.default_rng(seed)
        x, y = rng.standard_normal(1000), rng.standard_normal(1000)
        rejections += granger_f_test(x, y, 1).p_value < 0.05
    rate = rejections / trials
    assert abs(rate - 0.05) <= 0.02
    assert abs(rate - 0.05) <= 3 * np.sqrt(0.05 * 0.95 / trials)
