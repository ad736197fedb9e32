import io

import numpy as np
import pytest

from churnnet.cdr import MONTH, monthly_labels
from churnnet.config import Settings, parse_config
from churnnet.exceptions import ConfigError
from churnnet.synth import SynthConfig, generate, read_labels, social_graph, verify, write_labels


def test_deterministic_for_seed():
    cfg = SynthConfig(n_customers=300, sparsity=4e-2, seed=4)
    a, ta = generate(cfg)
    b, tb = generate(cfg)
    for name in ("caller", "callee", "start", "duration"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    assert np.array_equal(ta.churndate, tb.churndate)
    c, _ = generate(SynthConfig(n_customers=300, sparsity=4e-2, seed=5))
    assert len(c) != len(a) or not np.array_equal(c.start, a.start)


def test_targets_met_and_no_calls_after_churn(small_synth):
    cfg, store, truth = small_synth
    diag = verify(store, truth, cfg)
    assert diag.ok, diag.flags
    assert diag.degree_min >= 1
    # planted homophily shows up as a higher churn rate next to last month's churners
    assert diag.homophily_lift > 1.5
    assert truth.is_churner.mean() == pytest.approx(1 - 0.95 ** 5, abs=0.02)
    # planted churners in M1..M5 only, and the 30-day rule recovers most of them
    months = (truth.churndate[truth.is_churner] - cfg.epoch) // MONTH + 1
    assert months.min() >= 1 and months.max() <= 5
    lab = monthly_labels(store)
    found = np.zeros(store.n_customers, dtype=bool)
    for m in range(1, 6):
        found |= lab[m].is_churner
    assert (found & truth.is_churner).sum() >= 0.9 * truth.is_churner.sum()


def test_verify_flags_late_calls(small_synth):
    cfg, store, truth = small_synth
    early = truth.churndate.copy()
    who = np.flatnonzero(~truth.is_churner)[:5]
    early[who] = cfg.epoch + 10
    bad = type(truth)(truth.customers, truth.is_churner | np.isin(np.arange(len(early)), who), early, truth.window)
    assert any("after a ground-truth churn" in f for f in verify(store, bad).flags)
    assert any("sparsity" in f for f in verify(store, cfg=SynthConfig(n_customers=1500, sparsity=0.05)).flags)


def test_homophily_zero_plants_random_churn():
    cfg = SynthConfig(n_customers=2000, sparsity=6e-3, homophily=0.0, seed=3)
    diag = verify(*generate(cfg), cfg)
    assert 0.6 < diag.homophily_lift < 1.6


def test_config_validation():
    for kw in ({"n_customers": 5}, {"churn_rate": 1.0}, {"sparsity": 0.0}, {"homophily": 1.5},
               {"exponent": 2.0}, {"one_way": -0.1}, {"call_rate": 0.0}, {"dow_weights": (1.0,) * 6},
               {"hour_weights": (-1.0,) + (1.0,) * 23}):
        with pytest.raises(ConfigError):
            SynthConfig(**kw)
    rng = np.random.default_rng(0)
    with pytest.raises(ConfigError, match="minimum degree"):
        social_graph(SynthConfig(n_customers=1500, sparsity=6e-3), rng)


def test_social_graph_is_simple():
    cfg = SynthConfig(n_customers=500, sparsity=2e-2, seed=1)
    g = social_graph(cfg, np.random.default_rng(1))
    assert np.all(g.a < g.b)
    keys = g.a * cfg.n_customers + g.b
    assert np.unique(keys).size == keys.size
    assert np.all((g.rate_ab > 0) | (g.rate_ba > 0))
    one_way = np.mean((g.rate_ab == 0) | (g.rate_ba == 0))
    assert one_way == pytest.approx(cfg.one_way, abs=0.05)
    assert 2 * g.a.size / (500 * 499) == pytest.approx(cfg.sparsity, rel=0.2)


def test_labels_roundtrip(small_synth):
    cfg, _, truth = small_synth
    buf = io.StringIO()
    write_labels(truth, buf, cfg.epoch)
    text = buf.getvalue()
    assert text.startswith("customer_id,is_churner,churndate,month\n")
    back = read_labels(io.StringIO(text))
    assert np.array_equal(back.customers, truth.customers)
    assert np.array_equal(back.is_churner, truth.is_churner)
    assert np.array_equal(back.churndate[back.is_churner], truth.churndate[truth.is_churner])


def test_from_settings():
    s = Settings(parse_config(["[synth]", "n_customers=400", "sparsity=0.02", "hour_weights=" + ",".join(["1"] * 24)]))
    cfg = SynthConfig.from_settings(s)
    assert cfg.n_customers == 400 and cfg.sparsity == 0.02 and cfg.hour_weights == (1.0,) * 24
    assert cfg.churn_rate == SynthConfig().churn_rate
    with pytest.raises(ConfigError):
        SynthConfig.from_settings(Settings({"synth.n_customers": "many"}))
