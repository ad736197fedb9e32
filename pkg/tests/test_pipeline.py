import numpy as np
import pytest

from churnnet.cdr import N_MONTHS
from churnnet.exceptions import ConfigError, RangeError
from churnnet.graph import build_graph
from churnnet.metrics import auc
from churnnet.pipeline import Frame, GraphSpec, Timeline, frame
from churnnet.relational import CiConfig

from conftest import store_from_rows


def test_frames():
    s, l = frame("short"), frame("long")
    assert s.months == (4, 4) and s.state_month == 4 and s.target_month == 5 and s.pretrain_months == (3, 3)
    assert l.months == (2, 4) and l.pretrain_months == (1, 3)
    assert frame("short", 4).months == (3, 3)
    assert Frame("x", (1, 2)).shifted(1).months == (2, 3)
    with pytest.raises(ConfigError):
        frame("medium")


def test_labels_population_and_ranges(small_timeline):
    tl = small_timeline
    assert set(tl.labels) == set(range(1, N_MONTHS))
    assert tl.population(1).all()
    assert np.array_equal(tl.population(5), ~tl.labels[4].is_churner)
    with pytest.raises(RangeError):
        tl.target(N_MONTHS)
    with pytest.raises(RangeError):
        tl.graph(GraphSpec(), (0, 2))
    tl.require_months()


def test_require_months_reports_gaps():
    tl = Timeline(store_from_rows([("a", "b", 1, 0, 60), ("b", "a", 40, 0, 60)]))
    with pytest.raises(RangeError, match="M3"):
        tl.require_months()


def test_graph_matches_direct_build_and_caches(small_timeline):
    tl = small_timeline
    spec = GraphSpec("outgoing", "count", None)
    g = tl.graph(spec, (2, 3))
    assert tl.graph(spec, (2, 3)) is g
    view = tl.store.in_months(2, 3)
    direct = build_graph(view, "outgoing", "count", None, None)
    assert abs(g.weights - direct.weights).max() == 0
    r = tl.graph(GraphSpec("outgoing", "count", None, reciprocal=True), (2, 3))
    assert r.n_edges <= g.n_edges
    assert GraphSpec(decay=None).key == "undirected/length/decay=none/whole/full"


def test_pretraining_months(small_timeline):
    tl = small_timeline
    spec = GraphSpec()
    pre = tl.pretraining(spec, frame("short"))
    assert pre.graph is tl.graph(spec, (3, 3))
    assert pre.state.t == 3
    assert np.array_equal(pre.target, tl.target(4))
    assert np.array_equal(pre.population, tl.population(4))
    assert tl.pretraining(spec, Frame("x", (1, 1))) is None


def test_score_is_cached_and_seeded(small_timeline):
    tl = small_timeline
    fr = frame("short")
    a = tl.score("no-wvrn", GraphSpec(), fr)
    assert tl.score("no-wvrn", GraphSpec(), fr) is a
    s, y = tl.evaluation(a, fr.target_month)
    assert s.size == y.size == int(tl.population(5).sum())
    assert auc(s, y) > 0.6
    g1 = tl.score("gibbs-wvrn", GraphSpec(), fr, CiConfig(burn_in=20), seed=1)
    g2 = tl.score("gibbs-wvrn", GraphSpec(), fr, CiConfig(burn_in=20), seed=1)
    assert g1 is g2
    g3 = tl.score("gibbs-wvrn", GraphSpec(), fr, CiConfig(burn_in=20), seed=2)
    assert not np.array_equal(g1.scores, g3.scores)


def test_feature_table_restricts_population(small_timeline):
    tl = small_timeline
    t = tl.feature_table((2, 4), 5, "all", ["no-wvrn", "rl-cdrn"])
    pop = tl.population(5)
    assert len(t) == int(pop.sum())
    assert np.array_equal(t.customers, tl.customers[pop])
    assert np.array_equal(t.labels, tl.target(5)[pop])
    assert t.columns[-2:] == ("no-wvrn", "rl-cdrn")
    assert tl.feature_table((2, 4), 5, "rl_only", ["no-wvrn"]).columns == ("no-wvrn",)
    with pytest.raises(ConfigError):
        tl.feature_table((2, 5), 5)
