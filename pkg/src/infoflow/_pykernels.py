"""Pure numpy implementations of the hot kernels.

Same contract as the compiled ``_ckernels`` module; used when the extension is
not built or when ``INFOFLOW_BACKEND=python`` is set.
"""
import numpy as np

RANK_TOL = 1e-10

STATUS_OK = 0
STATUS_TARGET_DEFICIENT = 1
STATUS_SOURCE_DEFICIENT = 2
STATUS_SELF = 3

_CHUNK_DOUBLES = 1 << 22


def lag_stack(series, lag):
    """Row ``i*lag + c - 1`` holds ``series[i, lag-c : T-c]`` for c = 1..lag."""
    series = np.ascontiguousarray(series, dtype=np.float64)
    N, T = series.shape
    n = T - lag
    out = np.empty((N * lag, n))
    for c in range(1, lag + 1):
        out[c - 1::lag] = series[:, lag - c:T - c]
    return out


def _project_out(Q, v):
    # two classical Gram-Schmidt passes ("twice is enough")
    v = v - Q @ (Q.T @ v)
    return v - Q @ (Q.T @ v)


def granger_target(series, stack, target, lag):
    """Restricted and unrestricted residual sums for every source -> ``target``.

    Returns ``(rss_r, tss, rss_u, ess, status)``.
    """
    N, T = series.shape
    n = T - lag
    y = series[target, lag:]
    tss = float(np.sum((y - y.mean()) ** 2))
    rss_u = np.full(N, np.nan)
    ess = np.full(N, np.nan)
    status = np.zeros(N, dtype=np.int8)

    design = np.empty((n, lag + 1))
    design[:, 0] = 1.0
    design[:, 1:] = stack[target * lag:(target + 1) * lag].T
    Qr, Rr = np.linalg.qr(design)
    if np.any(~(np.abs(np.diag(Rr)) > RANK_TOL * np.linalg.norm(design, axis=0))):
        status[:] = STATUS_TARGET_DEFICIENT
        status[target] = STATUS_SELF
        return np.nan, tss, rss_u, ess, status

    e = _project_out(Qr, y)
    rss_r = float(e @ e)

    chunk = max(1, _CHUNK_DOUBLES // (n * lag))
    for s0 in range(0, N, chunk):
        s1 = min(N, s0 + chunk)
        block = stack[s0 * lag:s1 * lag].T
        norm0 = np.linalg.norm(block, axis=0).reshape(s1 - s0, lag)
        Z = _project_out(Qr, block)
        Zb = Z.T.reshape(s1 - s0, lag, n).transpose(0, 2, 1)
        Qz, Rz = np.linalg.qr(Zb)
        rdiag = np.abs(np.diagonal(Rz, axis1=1, axis2=2))
        ok = np.all(rdiag > RANK_TOL * norm0, axis=1)
        d = np.einsum("bnl,n->bl", Qz, e)
        resid = e[None, :] - np.einsum("bnl,bl->bn", Qz, d)
        ess[s0:s1] = np.where(ok, np.sum(d * d, axis=1), np.nan)
        rss_u[s0:s1] = np.where(ok, np.sum(resid * resid, axis=1), np.nan)
        status[s0:s1] = np.where(ok, STATUS_OK, STATUS_SOURCE_DEFICIENT)

    status[target] = STATUS_SELF
    rss_u[target] = np.nan
    ess[target] = np.nan
    return rss_r, tss, rss_u, ess, status


def match_counts(x, m, r):
    """For each length-``m`` window, the number of windows (itself included)
    within Chebyshev distance ``r``."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    windows = np.lib.stride_tricks.sliding_window_view(x, m)
    nw = windows.shape[0]
    counts = np.empty(nw, dtype=np.int64)
    rows = max(1, _CHUNK_DOUBLES // max(1, nw * m))
    for i0 in range(0, nw, rows):
        w = windows[i0:i0 + rows]
        dist = np.max(np.abs(w[:, None, :] - windows[None, :, :]), axis=2)
        counts[i0:i0 + rows] = np.count_nonzero(dist <= r, axis=1)
    return counts
