import datetime as dt

import numpy as np
import pytest

from infoflow import _pykernels, entropy, flow

try:
    from infoflow import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["cython"] = _ckernels


@pytest.fixture(params=sorted(BACKENDS))
def backend(request, monkeypatch):
    """Run the test once per available kernel implementation."""
    mod = BACKENDS[request.param]
    monkeypatch.setattr(flow, "kernels", mod)
    monkeypatch.setattr(entropy, "kernels", mod)
    return mod


def write_price_csv(path, columns, start=dt.date(2021, 1, 4)):
    """Write ``{ticker: [price or None, ...]}`` as a wide price file."""
    tickers = list(columns)
    n = len(columns[tickers[0]])
    lines = ["date," + ",".join(tickers)]
    for t in range(n):
        cells = ["" if columns[k][t] is None else repr(float(columns[k][t])) for k in tickers]
        lines.append(f"{start + dt.timedelta(days=t)}," + ",".join(cells))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def price_file(tmp_path):
    rng = np.random.default_rng(11)
    r = rng.standard_normal((300, 3)) * 0.01
    r[1:, 1] += 0.6 * r[:-1, 0]
    prices = 100 * np.exp(np.cumsum(r, axis=0))
    return write_price_csv(tmp_path / "prices.csv",
                           {"AAA": prices[:, 0], "BBB": prices[:, 1], "CCC": prices[:, 2]})


#: (criterion, passed, detail) lines collected by test_acceptance.py
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
