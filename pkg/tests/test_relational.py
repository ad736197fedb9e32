import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from churnnet.exceptions import ConfigError, FittingError, PretrainingError
from churnnet.graph import from_edges
from churnnet.relational import (ALL_LEARNERS, CDRN, NLB, SPARC, WVRN, CiConfig, NlbModel, Pretraining,
                                 ReferenceVector, _CI, cdrn, cdrn_pretrain, class_vectors, make_classifier, nlb,
                                 nlb_pretrain, parse_learner, run_ci, run_learner, sensitivity_trace, spa_rc, wvrn)
from churnnet.states import LabelState, ScoreState

from conftest import random_graph


# --- brute-force relational classifiers ------------------------------------------

def dense(g):
    w = g.weights.toarray().astype(float)
    np.fill_diagonal(w, 0.0)
    return w


def o_wvrn(w, p, prior):
    out = []
    for i in range(len(p)):
        z = sum(w[i, j] for j in range(len(p)))
        out.append(sum(w[i, j] * p[j] for j in range(len(p))) / z if z > 0 else prior)
    return np.array(out)


def o_cv(w, p, normalized):
    cv = np.zeros((len(p), 2))
    for i in range(len(p)):
        for j in range(len(p)):
            cv[i, 0] += w[i, j] * (1 - p[j])
            cv[i, 1] += w[i, j] * p[j]
        z = cv[i].sum()
        if normalized and z > 0:
            cv[i] /= z
    return cv


def o_cos(a, b):
    na, nb = math.hypot(*a), math.hypot(*b)
    return (a[0] * b[0] + a[1] * b[1]) / (na * nb) if na > 0 and nb > 0 else 0.0


def o_cdrn(w, p, rv1, rv0, prior):
    cv = o_cv(w, p, False)
    out = []
    for i in range(len(p)):
        s1, s0 = o_cos(cv[i], rv1), o_cos(cv[i], rv0)
        out.append(s1 / (s1 + s0) if s1 + s0 > 0 else prior)
    return np.array(out)


def o_nlb(w, p, b0, b1):
    cv = o_cv(w, p, True)
    return np.array([1.0 / (1.0 + math.exp(-b0 - b1 * cv[i, 1])) for i in range(len(p))])


def o_sparc(w, p, d, prior):
    n = len(p)
    strength = [sum(w[j, s] for s in range(n)) for j in range(n)]
    out = []
    for i in range(n):
        # a neighbour with an empty neighbourhood of its own (directed graphs) passes nothing on
        terms = [(w[i, j] / strength[j], p[j]) for j in range(n) if w[i, j] > 0 and strength[j] > 0]
        z = sum(t for t, _ in terms)
        out.append(d / z * sum(t * v for t, v in terms) if z > 0 else prior)
    return np.array(out)


def case(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, directed=bool(seed % 3 == 0))
    p = rng.random(g.n) if seed % 2 else (rng.random(g.n) < 0.3).astype(float)
    return rng, g, p


@pytest.mark.parametrize("seed", range(30))
def test_rc_oracles(seed):
    rng, g, p = case(seed)
    w = dense(g)
    prior = float(p.mean())
    np.testing.assert_allclose(wvrn(g, p).scores, np.clip(o_wvrn(w, p, prior), 0, 1), rtol=0, atol=1e-12)
    rv1, rv0 = rng.random(2), rng.random(2)
    got = cdrn(g, p, ReferenceVector(rv1, rv0)).scores
    np.testing.assert_allclose(got, o_cdrn(w, p, rv1, rv0, prior), rtol=0, atol=1e-12)
    b0, b1 = rng.normal(-2, 1), rng.normal(3, 1)
    np.testing.assert_allclose(nlb(g, p, NlbModel(b0, b1)).scores, o_nlb(w, p, b0, b1), rtol=0, atol=1e-12)
    d = rng.uniform(0.5, 0.95)
    np.testing.assert_allclose(spa_rc(g, p, d).scores, o_sparc(w, p, d, prior), rtol=0, atol=1e-12)


def test_class_vectors_and_pretraining():
    rng, g, p = case(4)
    w = dense(g)
    np.testing.assert_allclose(class_vectors(g, p), o_cv(w, p, False), atol=1e-12)
    np.testing.assert_allclose(class_vectors(g, p, normalized=True), o_cv(w, p, True), atol=1e-12)
    state = (rng.random(g.n) < 0.3).astype(int)
    target = (rng.random(g.n) < 0.4).astype(int)
    rv = cdrn_pretrain(g, state, target)
    cv = o_cv(w, state, True)
    has = cv.sum(axis=1) > 0
    np.testing.assert_allclose(rv.churn, cv[has & (target == 1)].mean(axis=0), atol=1e-12)
    np.testing.assert_allclose(rv.nonchurn, cv[has & (target == 0)].mean(axis=0), atol=1e-12)
    model = nlb_pretrain(g, state, target)
    assert model.converged


def test_nlb_pretrain_recovers_logistic():
    # one hub per leaf group: leaves' count-link equals the hub label
    rng = np.random.default_rng(0)
    n = 400
    edges = [(i, n + (i % 2)) for i in range(n)]
    g = from_edges([f"v{i}" for i in range(n + 2)], edges)
    state = np.zeros(n + 2)
    state[n + 1] = 1.0
    x = (np.arange(n) % 2).astype(float)
    prob = 1 / (1 + np.exp(-(-2.0 + 2.5 * x)))
    target = np.r_[(rng.random(n) < prob).astype(float), 0.0, 0.0]
    pop = np.r_[np.ones(n, bool), False, False]
    model = nlb_pretrain(g, state, target, pop, l2=0.0)
    # with a binary feature the MLE reproduces the group log-odds
    m1 = target[:n][x == 1].mean()
    m0 = target[:n][x == 0].mean()
    assert model.beta0 == pytest.approx(math.log(m0 / (1 - m0)), abs=1e-8)
    assert model.beta0 + model.beta1 == pytest.approx(math.log(m1 / (1 - m1)), abs=1e-8)


def test_pretraining_errors():
    g = from_edges(["a", "b", "c"], [(0, 1), (1, 2)])
    with pytest.raises(PretrainingError):
        cdrn_pretrain(g, [0, 1, 0], [0, 0, 0])
    with pytest.raises(PretrainingError):
        cdrn_pretrain(g, [0, 1, 0], [1, 1, 1])
    with pytest.raises(FittingError):
        nlb_pretrain(g, [0, 1, 0], [0, 0, 0])
    with pytest.raises(PretrainingError):
        make_classifier("nlb", g, [0, 1, 0])
    with pytest.raises(ConfigError):
        parse_learner("gibbs")
    with pytest.raises(ConfigError):
        parse_learner("foo-wvrn")
    with pytest.raises(ConfigError):
        parse_learner("rl-knn")
    assert len(ALL_LEARNERS) == 24 and parse_learner("RLSA-SPARC") == ("rlsa", "sparc")


# --- collective inference, traced by hand ----------------------------------------
#
# 5-node graph: 0-1 (1), 1-2 (2), 2-3 (1), 3-4 (1), 0-2 (1)

FIVE = from_edges([f"n{i}" for i in range(5)], [(0, 1, 1.0), (1, 2, 2.0), (2, 3, 1.0), (3, 4, 1.0), (0, 2, 1.0)])


def trace(method, rc, v0, cfg, cap, threshold=None, rng=None):
    states = []
    out = _CI[method](rc, np.asarray(v0, dtype=float), cfg, rng or np.random.default_rng(cfg.seed),
                      cfg.threshold if threshold is None else threshold, cap, lambda j, s: states.append(s.copy()))
    return out, states


def test_rl_hand_trace():
    v0 = [1, 0, 0, 0, 1]
    rc = WVRN(FIVE, 0.4)
    (scores, n_iter, stopped), states = trace("rl", rc, v0, CiConfig("rl"), 100)
    np.testing.assert_allclose(states[0], [0, 1 / 3, 1 / 4, 1 / 2, 0], atol=1e-15)
    np.testing.assert_allclose(states[1], [7 / 24, 1 / 6, 7 / 24, 1 / 8, 1 / 2], atol=1e-15)
    # step 3 by hand from step 2
    s2 = states[1]
    want3 = [(s2[1] + s2[2]) / 2, (s2[0] + 2 * s2[2]) / 3, (2 * s2[1] + s2[3] + s2[0]) / 4, (s2[2] + s2[4]) / 2, s2[3]]
    np.testing.assert_allclose(states[2], want3, atol=1e-15)
    assert stopped and n_iter == len(states) <= 100
    assert np.max(np.abs(states[-1] - states[-2])) <= 1e-4
    assert np.max(np.abs(states[-2] - states[-3])) > 1e-4


def test_rlsa_hand_trace():
    v0 = np.array([1, 0, 0, 0, 1], dtype=float)
    rc = WVRN(FIVE, 0.4)
    cfg = CiConfig("rlsa", k=0.5, alpha=0.9)
    (_, n_iter, stopped), states = trace("rlsa", rc, v0, cfg, 100)
    c1 = 0.5 * np.array([0, 1 / 3, 1 / 4, 1 / 2, 0]) + 0.5 * v0
    np.testing.assert_allclose(states[0], c1, atol=1e-15)
    c2 = 0.45 * rc(c1) + 0.55 * c1
    np.testing.assert_allclose(states[1], c2, atol=1e-15)
    c3 = 0.405 * rc(c2) + 0.595 * c2
    np.testing.assert_allclose(states[2], c3, atol=1e-15)
    assert n_iter == len(states)


def test_ic_hand_trace_returns_hard_labels():
    rc = WVRN(FIVE, 0.6)
    (labels, n_iter, stopped), states = trace("ic", rc, [1, 1, 0, 0, 1], CiConfig("ic"), 1000)
    # sweep 1: [1/2, 1/3, 3/4, 1/2, 0] -> [0, 0, 1, 0, 0]
    # sweep 2: [1/2, 2/3, 0, 1/2, 0]   -> [0, 1, 0, 0, 0]
    # sweep 3: [1/2, 0, 1/2, 0, 0]     -> all zero, stop
    assert [s.tolist() for s in states] == [[0, 0, 1, 0, 0], [0, 1, 0, 0, 0], [0, 0, 0, 0, 0]]
    assert n_iter == 3 and stopped
    out = run_ci(rc, FIVE, [1, 1, 0, 0, 1], CiConfig("ic"))
    assert set(np.unique(out.scores)) <= {0.0, 1.0}


def test_ic_stops_on_fixed_point():
    # a churner triangle keeps its labels: 0-1-2 triangle, 3-4 pair of non-churners
    g = from_edges([f"n{i}" for i in range(5)], [(0, 1), (1, 2), (0, 2), (3, 4)])
    (labels, n_iter, stopped), _ = trace("ic", WVRN(g, 0.6), [1, 1, 1, 0, 0], CiConfig("ic"), 1000)
    assert labels.tolist() == [1, 1, 1, 0, 0] and n_iter == 1 and stopped


def test_spa_ci_hand_trace():
    rc = SPARC(FIVE, 0.4, 0.85)
    v0 = np.array([1, 0, 0, 0, 1], dtype=float)
    (_, n_iter, stopped), states = trace("spa", rc, v0, CiConfig("spa", d=0.85), 100)
    s = np.array([2.0, 3.0, 4.0, 2.0, 1.0])  # strengths
    w = dense(FIVE)
    want = []
    for i in range(5):
        t = w[i] / s
        want.append(0.85 * (t @ v0) / t.sum())
    np.testing.assert_allclose(states[0], want, atol=1e-15)
    np.testing.assert_allclose(states[1], rc(states[0]), atol=1e-15)
    # it keeps going while the number of positive scores grows
    assert np.count_nonzero(states[0]) > np.count_nonzero(v0) - 1
    assert n_iter == len(states) and stopped


def test_gibbs_trace_fixed_seed():
    rc = WVRN(FIVE, 0.4)
    cfg = CiConfig("gibbs", burn_in=3, seed=42)
    v0 = np.array([1, 0, 0, 0, 1], dtype=float)
    (scores, n_iter, stopped), states = trace("gibbs", rc, v0, cfg, 6, threshold=-1.0)
    # replay by hand with the same stream
    rng = np.random.default_rng(42)
    v = v0.copy()
    for _ in range(3):
        v = (rng.random(5) < o_wvrn(dense(FIVE), v, 0.4)).astype(float)
    acc = np.zeros(5)
    for j in range(1, 7):
        v = (rng.random(5) < o_wvrn(dense(FIVE), v, 0.4)).astype(float)
        acc += v
        np.testing.assert_allclose(states[j - 1], acc / j, atol=1e-15)
    np.testing.assert_allclose(scores, acc / 6, atol=1e-15)
    assert n_iter == 6 and not stopped


def test_gibbs_early_stop_rule():
    rc = WVRN(FIVE, 0.4)
    cfg = CiConfig("gibbs", burn_in=0, seed=1)
    (_, n_iter, stopped), states = trace("gibbs", rc, [1, 0, 0, 0, 1], cfg, 2000, threshold=0.05)
    assert stopped and n_iter == len(states) >= 2
    # states hold running means L/j; the rule compares consecutive means, averaged over nodes
    shifts = [abs(b.sum() - a.sum()) / 5 for a, b in zip(states, states[1:])]
    assert shifts[-1] < 0.05 and all(x >= 0.05 for x in shifts[:-1])


@pytest.mark.parametrize("method", ["gibbs", "ic", "rl", "rlsa", "spa"])
def test_iteration_caps_and_threshold(method):
    rng = np.random.default_rng(9)
    g = random_graph(rng, n=40, density=0.2)
    init = (rng.random(g.n) < 0.5).astype(float)
    rc = make_classifier("wvrn", g, init)
    capped = run_ci(rc, g, init, CiConfig(method, burn_in=5, max_iter=3, threshold=1e-300))
    assert capped.n_iter <= 3
    loose = run_ci(rc, g, init, CiConfig(method, burn_in=5, threshold=1e9))
    assert loose.converged and loose.n_iter <= 2
    default = CiConfig(method)
    assert default.cap == {"gibbs": 2000, "ic": 1000, "rl": 100, "rlsa": 100, "spa": 100}[method]


def test_ci_config_validation():
    for bad in (dict(method="bogus"), dict(burn_in=-1), dict(k=0.0), dict(alpha=1.0), dict(d=1.0),
                dict(threshold=0.0)):
        with pytest.raises(ConfigError):
            CiConfig(**bad)


def test_sensitivity_trace_shapes():
    rng = np.random.default_rng(2)
    g = random_graph(rng, n=30)
    init = (rng.random(g.n) < 0.3).astype(float)
    rc = WVRN(g, init.mean())
    for m in ("no", "gibbs", "ic", "rl", "rlsa", "spa"):
        tr = sensitivity_trace(rc, CiConfig(m, burn_in=2), g, init, 12)
        assert tr.shape == (12,) and np.all(tr >= 0)


def test_run_learner_with_pretraining():
    rng = np.random.default_rng(3)
    g = random_graph(rng, n=40, density=0.25, isolated=False)
    state = LabelState(g.customers, (rng.random(g.n) < 0.3).astype(int))
    target = (rng.random(g.n) < 0.3).astype(int)
    pre = Pretraining(g, state, target)
    for learner in ALL_LEARNERS:
        s = run_learner(learner, g, state, pre, CiConfig(burn_in=5, seed=4))
        assert isinstance(s, ScoreState) and s.learner == learner
        assert np.all((s.scores >= 0) & (s.scores <= 1))
    a = run_learner("gibbs-wvrn", g, state, pre, CiConfig(burn_in=5, seed=4)).scores
    b = run_learner("gibbs-wvrn", g, state, pre, CiConfig(burn_in=5, seed=4)).scores
    assert np.array_equal(a, b)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_rc_outputs_are_probabilities(seed):
    rng, g, p = case(seed)
    prior = float(p.mean())
    for rc in (WVRN(g, prior), SPARC(g, prior), CDRN(g, prior, ReferenceVector(rng.random(2), rng.random(2))),
               NLB(g, prior, NlbModel(rng.normal(), rng.normal()))):
        out = rc(p)
        assert out.shape == p.shape and np.all(out >= 0) and np.all(out <= 1 + 1e-12)
    # WVRN is a weighted mean: bounded by the extreme neighbour scores
    out = WVRN(g, prior)(p)
    assert np.all(out <= p.max() + 1e-12) and np.all(out >= min(p.min(), prior) - 1e-12)
