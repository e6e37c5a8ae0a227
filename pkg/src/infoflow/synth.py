"""Synthetic return panels with known lagged couplings, and brute-force oracles.

Innovations come from per-ticker PCG64 streams (``SeedSequence(seed,
spawn_key=(i,))``) converted to normals by Box-Muller, so a panel is identical
whatever order or thread its tickers are simulated on.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from infoflow import _rng
from infoflow.errors import ConfigError, DataError
from infoflow.market_data import ReturnPanel


@dataclass(frozen=True)
class Coupling:
    source: int
    target: int
    lag: int
    coefficient: float


@dataclass(frozen=True)
class SynthSpec:
    """``r_i(t) = ar_i r_i(t-1) + sum coeff * r_src(t-lag) + sigma_i eps_i(t)``."""

    n_tickers: int
    horizon: int
    couplings: tuple[Coupling, ...] = ()
    noise_sigma: float | tuple[float, ...] = 1.0
    ar_coeffs: float | tuple[float, ...] = 0.0
    seed: int = 0
    tickers: tuple[str, ...] | None = field(default=None)

    def __post_init__(self):
        couplings = tuple(c if isinstance(c, Coupling) else Coupling(*c) for c in self.couplings)
        object.__setattr__(self, "couplings", couplings)
        for name in ("noise_sigma", "ar_coeffs"):
            v = getattr(self, name)
            if not np.isscalar(v):
                object.__setattr__(self, name, tuple(float(a) for a in v))
        if self.tickers is not None:
            object.__setattr__(self, "tickers", tuple(self.tickers))

    def ticker_names(self) -> tuple[str, ...]:
        if self.tickers is not None:
            return self.tickers
        width = max(3, len(str(self.n_tickers - 1)))
        return tuple(f"S{i:0{width}d}" for i in range(self.n_tickers))

    def per_ticker(self, name: str) -> np.ndarray:
        v = getattr(self, name)
        if np.isscalar(v):
            return np.full(self.n_tickers, float(v))
        return np.asarray(v, dtype=np.float64)

    @property
    def max_lag(self) -> int:
        return max([1] + [c.lag for c in self.couplings])

    def validate(self) -> None:
        if int(self.n_tickers) != self.n_tickers or self.n_tickers < 1:
            raise ConfigError("n_tickers must be a positive integer")
        if int(self.horizon) != self.horizon or self.horizon < 2:
            raise ConfigError("horizon must be an integer >= 2")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        if len(self.ticker_names()) != self.n_tickers or len(set(self.ticker_names())) != self.n_tickers:
            raise ConfigError("tickers must be n_tickers unique names")
        for name in ("noise_sigma", "ar_coeffs"):
            if self.per_ticker(name).shape != (self.n_tickers,):
                raise ConfigError(f"{name} must be a scalar or one value per ticker")
        if not np.all(self.per_ticker("noise_sigma") > 0):
            raise ConfigError("noise_sigma must be positive")
        if not np.all(np.abs(self.per_ticker("ar_coeffs")) < 1):
            raise ConfigError("autoregressive coefficients must satisfy |ar| < 1")
        for c in self.couplings:
            if not (0 <= c.source < self.n_tickers and 0 <= c.target < self.n_tickers):
                raise ConfigError(f"coupling {c} refers to an unknown ticker")
            if c.source == c.target:
                raise ConfigError(f"coupling {c} is a self-loop; use ar_coeffs")
            if int(c.lag) != c.lag or c.lag < 1:
                raise ConfigError(f"coupling {c} must have lag >= 1")
            if not math.isfinite(c.coefficient):
                raise ConfigError(f"coupling {c} has a non-finite coefficient")
        if spectral_radius(self) >= 1:
            raise ConfigError("coupled system is not stationary (companion spectral radius >= 1)")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["couplings"] = [asdict(c) for c in self.couplings]
        for name in ("noise_sigma", "ar_coeffs", "tickers"):
            if isinstance(d[name], tuple):
                d[name] = list(d[name])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        known = {"n_tickers", "horizon", "couplings", "noise_sigma", "ar_coeffs", "seed", "tickers"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown synth spec keys: {sorted(unknown)}")
        try:
            couplings = []
            for c in d.get("couplings", []):
                if isinstance(c, dict):
                    couplings.append(Coupling(int(c["source"]), int(c["target"]),
                                              int(c["lag"]), float(c["coefficient"])))
                else:
                    s, t, lag, coef = c
                    couplings.append(Coupling(int(s), int(t), int(lag), float(coef)))
            spec = cls(
                n_tickers=int(d["n_tickers"]),
                horizon=int(d["horizon"]),
                couplings=tuple(couplings),
                noise_sigma=d.get("noise_sigma", 1.0),
                ar_coeffs=d.get("ar_coeffs", 0.0),
                seed=int(d.get("seed", 0)),
                tickers=d.get("tickers"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid synth spec: {exc}") from exc
        spec.validate()
        return spec


def lag_matrices(spec: SynthSpec) -> list[np.ndarray]:
    """``A[L-1][target, source]`` coefficients for lags ``L = 1..max_lag``."""
    A = [np.zeros((spec.n_tickers, spec.n_tickers)) for _ in range(spec.max_lag)]
    A[0][np.diag_indices(spec.n_tickers)] = spec.per_ticker("ar_coeffs")
    for c in spec.couplings:
        A[c.lag - 1][c.target, c.source] += c.coefficient
    return A


def spectral_radius(spec: SynthSpec) -> float:
    A = lag_matrices(spec)
    n, p = spec.n_tickers, len(A)
    comp = np.zeros((n * p, n * p))
    comp[:n, :] = np.hstack(A)
    comp[n:, :-n] = np.eye(n * (p - 1))
    return float(np.max(np.abs(np.linalg.eigvals(comp))))


def gen_var(spec: SynthSpec) -> ReturnPanel:
    """Simulate the lagged linear system and return ``horizon`` daily returns."""
    spec.validate()
    n, T = spec.n_tickers, spec.horizon
    burn = 10 * spec.max_lag
    total = burn + T
    sigma = spec.per_ticker("noise_sigma")
    eps = np.empty((total, n))
    for i in range(n):
        eps[:, i] = _rng.standard_normal(_rng.stream(spec.seed, i), total)
    eps *= sigma

    A = lag_matrices(spec)
    active = [(L + 1, a) for L, a in enumerate(A) if np.any(a)]
    r = np.zeros((total, n))
    for t in range(total):
        acc = eps[t].copy()
        for L, a in active:
            if t >= L:
                acc += a @ r[t - L]
        r[t] = acc
    return ReturnPanel(spec.ticker_names(), r[burn:], time_scale=1)


def coupled_pairs_spec(n_pairs: int, horizon: int, coefficient: float = 0.3,
                       lag: int = 1, seed: int = 0) -> SynthSpec:
    """``2 * n_pairs`` tickers; ticker ``2p`` drives ``2p + 1``."""
    couplings = tuple(Coupling(2 * p, 2 * p + 1, lag, coefficient) for p in range(n_pairs))
    return SynthSpec(2 * n_pairs, horizon, couplings, seed=seed)


def random_dag_spec(n_tickers: int, n_edges: int, horizon: int, coefficient: float = 0.3,
                    lag: int = 1, seed: int = 0, structure_seed: int = 0) -> SynthSpec:
    """``n_edges`` lagged couplings from lower- to higher-index tickers.

    The edge set depends only on ``structure_seed``; ``seed`` drives the noise.
    """
    candidates = [(i, j) for i in range(n_tickers) for j in range(i + 1, n_tickers)]
    if not 0 <= n_edges <= len(candidates):
        raise ConfigError(f"cannot place {n_edges} edges among {n_tickers} tickers")
    order = _rng.permutation(_rng.stream(structure_seed, 0), len(candidates))[:n_edges]
    edges = sorted(candidates[k] for k in order)
    couplings = tuple(Coupling(i, j, lag, coefficient) for i, j in edges)
    return SynthSpec(n_tickers, horizon, couplings, seed=seed)


def driver_follower_spec(n_drivers: int, n_followers: int, horizon: int,
                         coefficient: float = 0.5, follower_ar: float = 0.9,
                         drivers_per_follower: int = 2, seed: int = 0) -> SynthSpec:
    """White-noise drivers feeding persistent (low-ApEn) followers at lag 1.

    Follower ``f`` is driven by drivers ``f, f+1, ...`` modulo ``n_drivers``.
    """
    couplings = tuple(
        Coupling((f + d) % n_drivers, n_drivers + f, 1, coefficient)
        for f in range(n_followers) for d in range(drivers_per_follower)
    )
    ar = (0.0,) * n_drivers + (follower_ar,) * n_followers
    return SynthSpec(n_drivers + n_followers, horizon, couplings, ar_coeffs=ar, seed=seed)


def apen_bruteforce(series: Sequence[float], m: int, r_abs: float) -> float:
    """Literal double-loop transcription of approximate entropy.

    Deliberately written with plain Python loops and ``math`` only.
    """
    u = [float(v) for v in series]
    N = len(u)
    if N < m + 2:
        raise DataError(f"series of length {N} too short for m={m}")

    def big_phi(mm):
        count = N - mm + 1
        total = 0.0
        for i in range(count):
            b = 0
            for j in range(count):
                d = 0.0
                for k in range(mm):
                    diff = abs(u[i + k] - u[j + k])
                    if diff > d:
                        d = diff
                if d <= r_abs:
                    b += 1
            total += math.log(b / count)
        return total / count

    return big_phi(m) - big_phi(m + 1)


@dataclass(frozen=True)
class FOracleRow:
    alpha: float
    d1: int
    d2: int
    critical_value: float
    cdf: float
    passed: bool


def f_oracle_check(table, tol: float = 1e-3) -> list[FOracleRow]:
    """Compare ``f_cdf`` at tabulated critical values with ``1 - alpha``."""
    from infoflow.granger import f_cdf

    report = []
    for alpha, d1, d2, crit in table:
        cdf = f_cdf(crit, d1, d2)
        report.append(FOracleRow(alpha, d1, d2, crit, cdf, abs(cdf - (1 - alpha)) <= tol))
    return report


#: Upper critical values of the F distribution, (alpha, d1, d2, F_crit).
F_CRITICAL_TABLE = (
    (0.05, 1, 10, 4.9646), (0.05, 2, 10, 4.1028), (0.05, 3, 10, 3.7083),
    (0.05, 4, 10, 3.4780), (0.05, 5, 10, 3.3258),
    (0.05, 1, 20, 4.3512), (0.05, 2, 20, 3.4928), (0.05, 3, 20, 3.0984),
    (0.05, 4, 20, 2.8661), (0.05, 5, 20, 2.7109),
    (0.05, 1, 100, 3.9361), (0.05, 2, 100, 3.0873), (0.05, 3, 100, 2.6955),
    (0.05, 4, 100, 2.4626), (0.05, 5, 100, 2.3053),
    (0.05, 1, 1000, 3.8508), (0.05, 2, 1000, 3.0047),
    (0.01, 1, 10, 10.044), (0.01, 2, 10, 7.5594), (0.01, 3, 10, 6.5523),
    (0.01, 4, 10, 5.9943), (0.01, 5, 10, 5.6363),
    (0.01, 1, 20, 8.0960), (0.01, 2, 20, 5.8489), (0.01, 3, 20, 4.9382),
    (0.01, 4, 20, 4.4307), (0.01, 5, 20, 4.1027),
    (0.01, 1, 100, 6.8953), (0.01, 2, 100, 4.8239), (0.01, 5, 100, 3.2059),
    (0.01, 1, 1000, 6.6603),
)
