import json

import numpy as np
import pytest

from infoflow.entropy import ApEnScore, efficiency_rank
from infoflow.errors import DataError
from infoflow.flow import (
    FlowMatrix,
    analyze_market,
    fr_curves,
    frequency_ratio,
    n_pairs,
)
from infoflow.granger import FlowClass, granger_f_test
from infoflow.market_data import ReturnPanel, shuffle_panel
from infoflow.synth import Coupling, SynthSpec, gen_var

ALPHA = 0.05


@pytest.mark.parametrize("n,links", [(95, 4465), (175, 15225), (132, 8646), (67, 2211), (359, 64261)])
def test_link_counts_per_market(n, links):
    assert n_pairs(n) == links
    assert frequency_ratio(links, n) == 1.0


def test_frequency_ratio_examples():
    assert frequency_ratio(4465, 95) == 1.0
    assert frequency_ratio(0, 10) == 0.0
    assert frequency_ratio(3, 4, n_excluded=2) == 0.75
    assert np.isnan(frequency_ratio(0, 2, n_excluded=1))


@pytest.mark.parametrize("count,n", [(-1, 5), (11, 5), (1, 1)])
def test_frequency_ratio_range(count, n):
    with pytest.raises(ValueError):
        frequency_ratio(count, n)


def _scores(tickers, values):
    return {t: ApEnScore(t, 2, 0.2, 0.1, v) for t, v in zip(tickers, values)}


def test_three_tickers_three_pairs(backend):
    p = gen_var(SynthSpec(3, 200, seed=1))
    for fm in analyze_market(p, [1, 2], [1, 2]):
        assert len(fm.classes) == 3
        assert set(fm.classes) == {(0, 1), (0, 2), (1, 2)}


def test_matches_single_pair_tests(backend):
    spec = SynthSpec(5, 400, (Coupling(0, 1, 1, 0.4), Coupling(2, 3, 2, 0.3)), seed=3)
    p = gen_var(spec)
    (fm,) = analyze_market(p, [1], [2])
    for (i, j), cls in fm.classes.items():
        a = granger_f_test(p.returns[:, i], p.returns[:, j], 2, source="i", target="j")
        b = granger_f_test(p.returns[:, j], p.returns[:, i], 2, source="j", target="i")
        idx = list(fm.classes).index((i, j))
        assert fm.p_xy[idx] == pytest.approx(a.p_value, rel=1e-8, abs=1e-14)
        assert fm.p_yx[idx] == pytest.approx(b.p_value, rel=1e-8, abs=1e-14)
        from infoflow.granger import classify_pair
        assert classify_pair(a, b, ALPHA) is cls


@pytest.mark.slow
def test_chain_ground_truth(backend):
    detected, one_way, c_none, c_obs = 0, 0, 0, 0
    for seed in range(100):
        spec = SynthSpec(3, 2000, (Coupling(0, 1, 1, 0.5),), seed=seed)
        (fm,) = analyze_market(gen_var(spec), [1], [1])
        cls = fm.classes
        one_way += cls[(0, 1)] is FlowClass.ONE_WAY_XY
        detected += cls[(0, 1)] in (FlowClass.ONE_WAY_XY, FlowClass.MUTUAL)
        for key in ((0, 2), (1, 2)):
            c_obs += 1
            c_none += cls[key] is FlowClass.NO_EXCHANGE
    # a one-way label also needs the reverse test to stay insignificant,
    # which happens with probability 1 - alpha even at full power
    assert detected >= 95
    assert abs(one_way / 100 - (1 - ALPHA)) <= 3 * np.sqrt(ALPHA * (1 - ALPHA) / 100)
    rate = c_none / c_obs
    expected = (1 - ALPHA) ** 2
    assert abs(rate - expected) <= 3 * np.sqrt(expected * (1 - expected) / c_obs)


def test_shuffled_panel_null_rates(backend):
    couplings = tuple(Coupling(2 * i, 2 * i + 1, 1, 0.5) for i in range(100))
    p = shuffle_panel(gen_var(SynthSpec(200, 750, couplings, seed=5)), 17)
    (fm,) = analyze_market(p, [1], [1])
    c = fr_curves([fm], efficiency_rank(p)).cells[0]
    assert c.fr_mutual <= 0.01
    assert c.fr_oneway == pytest.approx(2 * ALPHA * (1 - ALPHA), abs=0.03)


def test_null_calibration_three_se(backend):
    p = gen_var(SynthSpec(120, 600, seed=8))
    (fm,) = analyze_market(p, [1], [1])
    c = fr_curves([fm], efficiency_rank(p)).cells[0]
    n = n_pairs(120)
    for observed, q in [(c.fr_mutual, ALPHA**2), (c.fr_oneway, 2 * ALPHA * (1 - ALPHA)),
                        (c.fr_none, (1 - ALPHA) ** 2)]:
        assert abs(observed - q) <= 3 * np.sqrt(q * (1 - q) / n)


def test_all_none_matrix():
    tickers = ["A", "B", "C"]
    fm = FlowMatrix.from_classes(1, 1, tickers, {k: FlowClass.NO_EXCHANGE
                                                 for k in [(0, 1), (0, 2), (1, 2)]})
    c = fr_curves([fm], _scores(tickers, [1, 2, 3])).cells[0]
    assert (c.fr_none, c.fr_mutual, c.fr_oneway, c.fr_eff_forward, c.fr_eff_backward) == (1, 0, 0, 0, 0)


def test_hand_built_efficiency_split():
    tickers = ["A", "B", "C", "D"]
    apen_values = [4.0, 3.0, 2.0, 1.0]  # A most efficient
    classes = {
        (0, 1): FlowClass.ONE_WAY_XY,   # A -> B, source more efficient
        (0, 2): FlowClass.ONE_WAY_XY,   # A -> C, forward
        (1, 3): FlowClass.ONE_WAY_YX,   # D -> B, source less efficient
        (0, 3): FlowClass.MUTUAL,
        (1, 2): FlowClass.NO_EXCHANGE,
        (2, 3): FlowClass.NO_EXCHANGE,
    }
    fm = FlowMatrix.from_classes(1, 1, tickers, classes)
    c = fr_curves([fm], _scores(tickers, apen_values)).cells[0]
    assert c.fr_eff_forward == pytest.approx(2 / 6)
    assert c.fr_eff_backward == pytest.approx(1 / 6)
    assert c.fr_oneway == pytest.approx(3 / 6)
    assert c.n_tied == 0


def test_ties_excluded():
    tickers = ["A", "B", "C"]
    classes = {(0, 1): FlowClass.ONE_WAY_XY, (0, 2): FlowClass.ONE_WAY_YX,
               (1, 2): FlowClass.NO_EXCHANGE}
    fm = FlowMatrix.from_classes(1, 1, tickers, classes)
    c = fr_curves([fm], _scores(tickers, [1.0, 1.0, 0.5])).cells[0]
    assert c.n_tied == 1
    assert c.fr_eff_backward == pytest.approx(1 / 3)
    assert c.fr_eff_forward == 0
    assert c.fr_eff_forward + c.fr_eff_backward <= c.fr_oneway + 1e-12


def test_missing_score():
    fm = FlowMatrix.from_classes(1, 1, ["A", "B"], {(0, 1): FlowClass.MUTUAL})
    with pytest.raises(DataError, match="B"):
        fr_curves([fm], _scores(["A"], [1.0]))


def test_from_classes_requires_all_pairs():
    with pytest.raises(ValueError):
        FlowMatrix.from_classes(1, 1, ["A", "B", "C"], {(0, 1): FlowClass.MUTUAL})


def test_category_completeness_and_unclassifiable(backend):
    p = gen_var(SynthSpec(6, 300, (Coupling(0, 1, 1, 0.5),), seed=2))
    r = p.returns.copy()
    r[:, 4] = 0.01  # constant column: every pair with it is unclassifiable
    panel = ReturnPanel(p.tickers, r)
    matrices = analyze_market(panel, [1, 2], [1, 3])
    curves = fr_curves(matrices, efficiency_rank(panel))
    for fm, c in zip(matrices, curves.cells):
        counts = fm.counts()
        assert sum(counts.values()) == n_pairs(6)
        assert counts[FlowClass.UNCLASSIFIABLE] == 5 == c.n_unclassifiable
        assert c.fr_mutual + c.fr_oneway + c.fr_none == pytest.approx(1.0, abs=1e-12)
        assert c.fr_eff_forward + c.fr_eff_backward <= c.fr_oneway + 1e-12


def test_ticker_order_invariance(backend):
    spec = SynthSpec(8, 500, (Coupling(0, 3, 1, 0.4), Coupling(5, 2, 2, 0.4)), seed=4)
    p = gen_var(spec)
    perm = np.random.default_rng(0).permutation(8)
    q = ReturnPanel([p.tickers[i] for i in perm], p.returns[:, perm])
    a = fr_curves(analyze_market(p, [1, 2], [1, 2]), efficiency_rank(p))
    b = fr_curves(analyze_market(q, [1, 2], [1, 2]), efficiency_rank(q))
    assert a == b


def test_determinism_across_threads(backend):
    p = gen_var(SynthSpec(15, 400, (Coupling(0, 1, 1, 0.4),), seed=6))
    runs = []
    for threads in (1, 3, 8):
        ms = analyze_market(p, [1, 3], [1, 2], threads=threads)
        curves = fr_curves(ms, efficiency_rank(p, threads=threads))
        blob = json.dumps([[m.codes.tolist(), m.p_xy.tolist(), m.p_yx.tolist()] for m in ms])
        runs.append((blob, repr(curves)))
    assert runs[0] == runs[1] == runs[2]


def test_grid_validation(backend):
    p = gen_var(SynthSpec(3, 60, seed=0))
    with pytest.raises(DataError):
        analyze_market(p, [], [1])
    with pytest.raises(DataError):
        analyze_market(p, [1], [0])
    with pytest.raises(DataError, match="k=5, l=5"):
        analyze_market(p, [1, 5], [1, 5])
    with pytest.raises(DataError):
        analyze_market(p, [1], [1], alpha=1.5)


def test_curves_accessors():
    tickers = ["A", "B"]
    ms = [FlowMatrix.from_classes(k, l, tickers, {(0, 1): FlowClass.MUTUAL})
          for k in (1, 2) for l in (1, 2, 3)]
    curves = fr_curves(ms, _scores(tickers, [1.0, 2.0]))
    assert curves.versus_k("fr_mutual", 2) == [(1, 1.0), (2, 1.0)]
    assert [x for x, _ in curves.versus_l("fr_none", 1)] == [1, 2, 3]
    assert curves.cell(2, 3).k == 2
    with pytest.raises(KeyError):
        curves.cell(9, 9)
