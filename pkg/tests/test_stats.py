import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from churnnet.exceptions import ConfigError, RangeError
from churnnet.stats import (MAX_K, RankMatrix, average_ranks, chi2_sf, critical_difference, dump_rank_diagram,
                            friedman, kruskal_wallis, nemenyi, nemenyi_q, rank_diagram)


def o_ranks(row, higher_is_better=True):
    """Rank 1 = best; ties share the mean of the ranks they span."""
    k = len(row)
    out = [0.0] * k
    for j in range(k):
        better = sum(1 for x in row if (x > row[j] if higher_is_better else x < row[j]))
        equal = sum(1 for x in row if x == row[j])
        out[j] = better + (equal + 1) / 2
    return out


def o_friedman(values):
    n, k = len(values), len(values[0])
    ranks = [o_ranks(r) for r in values]
    avg = [sum(r[j] for r in ranks) / n for j in range(k)]
    chi2 = 12 * n / (k * (k + 1)) * (sum(a * a for a in avg) - k * (k + 1) ** 2 / 4)
    ff = (n - 1) * chi2 / (n * (k - 1) - chi2)
    return avg, chi2, ff


def o_kruskal(groups):
    allv = [v for g in groups for v in g]
    n = len(allv)
    ranks = o_ranks(allv, higher_is_better=False)
    h, pos = 0.0, 0
    for g in groups:
        rs = sum(ranks[pos:pos + len(g)])
        h += rs * rs / len(g)
        pos += len(g)
    h = 12 / (n * (n + 1)) * h - 3 * (n + 1)
    counts = {}
    for v in allv:
        counts[v] = counts.get(v, 0) + 1
    c = 1 - sum(t ** 3 - t for t in counts.values()) / (n ** 3 - n)
    return h / c


def matrices():
    rng = np.random.default_rng(0)
    yield rng.random((32, 24))                        # k = 24, N = 32
    yield np.round(rng.random((32, 24)), 1)           # same size with ties
    yield rng.random((8, 3))
    yield np.round(rng.normal(size=(10, 5)), 0)
    yield rng.random((2, 2))
    yield rng.random((40, 30))


@pytest.mark.parametrize("values", list(matrices()), ids=lambda v: f"{v.shape[0]}x{v.shape[1]}")
def test_friedman_and_nemenyi_formulas(values):
    avg, chi2, ff = o_friedman(values.tolist())
    k, n = values.shape[1], values.shape[0]
    np.testing.assert_allclose(average_ranks(values), avg, rtol=0, atol=1e-9)
    res = friedman(values)
    assert res.statistic == pytest.approx(chi2, abs=1e-9)
    assert res.pvalue == pytest.approx(sps.chi2.sf(chi2, k - 1), abs=1e-9)
    if n * (k - 1) - chi2 > 0:
        id_ = friedman(values, iman_davenport=True)
        assert id_.statistic == pytest.approx(ff, rel=1e-9)
        assert id_.pvalue == pytest.approx(sps.f.sf(ff, k - 1, (k - 1) * (n - 1)), abs=1e-9)
    nm = nemenyi(values)
    cd = nemenyi_q(k) * math.sqrt(k * (k + 1) / (6 * n))
    assert nm.cd == pytest.approx(cd, abs=1e-9)
    for i in range(k):
        for j in range(k):
            assert nm.significant[i, j] == (abs(avg[i] - avg[j]) > cd)


def test_friedman_matches_scipy_without_ties():
    rng = np.random.default_rng(1)
    v = rng.random((32, 24))
    ours = friedman(v)
    ref = sps.friedmanchisquare(*v.T)
    assert ours.statistic == pytest.approx(ref.statistic, rel=1e-9)
    assert ours.pvalue == pytest.approx(ref.pvalue, abs=1e-9)


def test_nemenyi_table_against_studentized_range():
    for alpha in (0.05, 0.10):
        for k in (2, 3, 5, 10, 24, 30):
            q = sps.studentized_range.ppf(1 - alpha, k, 1e6) / math.sqrt(2)
            assert nemenyi_q(k, alpha) == pytest.approx(q, abs=2e-4)
    assert nemenyi_q(2) == pytest.approx(1.959964, abs=1e-6)
    assert critical_difference(24, 32) == pytest.approx(3.637252 * math.sqrt(24 * 25 / (6 * 32)), abs=1e-12)
    with pytest.raises(RangeError):
        nemenyi_q(MAX_K + 1)
    with pytest.raises(ConfigError):
        nemenyi_q(5, 0.01)


@pytest.mark.parametrize("seed", range(6))
def test_kruskal_formula_and_scipy(seed):
    rng = np.random.default_rng(seed)
    groups = [np.round(rng.normal(i * 0.3, 1, size=rng.integers(3, 30)), 1 if seed % 2 else 6)
              for i in range(int(rng.integers(2, 6)))]
    res = kruskal_wallis(groups)
    assert res.statistic == pytest.approx(o_kruskal([g.tolist() for g in groups]), abs=1e-9)
    ref = sps.kruskal(*groups)
    assert res.statistic == pytest.approx(ref.statistic, abs=1e-9)
    assert res.pvalue == pytest.approx(ref.pvalue, abs=1e-9)


def test_kruskal_degenerate_and_errors():
    assert kruskal_wallis([[1.0, 1.0], [1.0]]).pvalue == 1.0
    with pytest.raises(ConfigError):
        kruskal_wallis([[1.0, 2.0]])
    with pytest.raises(ConfigError):
        kruskal_wallis([[1.0], []])


def test_chi2_sf():
    for df in (1, 2, 5, 23):
        for x in (0.1, 1.0, 10.0, 60.0):
            assert chi2_sf(x, df) == pytest.approx(sps.chi2.sf(x, df), rel=1e-12)
    assert chi2_sf(0.0, 3) == 1.0


def test_rank_matrix_validation_and_diagram():
    with pytest.raises(ConfigError):
        RankMatrix(("a",), ("d1", "d2"), np.zeros((2, 2)))
    with pytest.raises(ConfigError):
        RankMatrix.from_array([[1.0, np.nan]])
    with pytest.raises(ConfigError):
        friedman([[1.0, 2.0]])
    m = RankMatrix.from_array([[0.9, 0.5, 0.7], [0.8, 0.6, 0.7], [0.95, 0.4, 0.6]], methods=["x", "y", "z"])
    assert m.average_ranks.tolist() == [1.0, 3.0, 2.0]
    low = RankMatrix.from_array(m.values, higher_is_better=False)
    assert low.average_ranks.tolist() == [3.0, 1.0, 2.0]
    d = rank_diagram(m)
    assert d["methods"] == ["x", "z", "y"]
    buf = io.StringIO()
    dump_rank_diagram(m, buf)
    assert json.loads(buf.getvalue())["n_datasets"] == 3


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 12), st.integers(2, 12), st.integers(0, 2**31 - 1))
def test_rank_properties(k, n, seed):
    rng = np.random.default_rng(seed)
    v = np.round(rng.random((n, k)), 1)
    r = average_ranks(v)
    # ranks in each row sum to k(k+1)/2, so their average does too
    assert r.sum() == pytest.approx(k * (k + 1) / 2)
    res = friedman(v)
    assert res.statistic >= 0 and 0 <= res.pvalue <= 1
    # permuting datasets or methods leaves the test unchanged (up to relabelling)
    perm = rng.permutation(k)
    assert friedman(v[rng.permutation(n)][:, perm]).statistic == pytest.approx(res.statistic)
