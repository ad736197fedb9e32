import sys

import numpy as np
import pytest
from scipy import sparse

from churnnet.cdr import DAY, make_store
from churnnet.graph import CallGraph
from churnnet.synth import SynthConfig, generate

EPOCH = 1_420_416_000  # a Monday, 00:00 UTC


def random_graph(rng, n=None, density=None, directed=False, isolated=True) -> CallGraph:
    """Random weighted graph; a few nodes may be isolated."""
    n = n or int(rng.integers(5, 51))
    density = density if density is not None else rng.uniform(0.05, 0.4)
    w = rng.random((n, n)) * (rng.random((n, n)) < density)
    np.fill_diagonal(w, 0.0)
    if not directed:
        w = np.triu(w, 1)
        w = w + w.T
    if isolated and n > 5:
        k = int(rng.integers(0, 3))
        w[:k, :] = 0.0
        w[:, :k] = 0.0
    ids = np.array([f"c{i:03d}" for i in range(n)])
    return CallGraph(ids, sparse.csr_matrix(w), "outgoing" if directed else "undirected")


def store_from_rows(rows, customers=None, epoch=EPOCH):
    """Store from ``(caller, callee, day, second_of_day, duration)`` rows."""
    ids = sorted({r[0] for r in rows} | {r[1] for r in rows} | set(customers or ()))
    a = np.array([r[0] for r in rows], dtype=str)
    b = np.array([r[1] for r in rows], dtype=str)
    t = np.array([epoch + r[2] * DAY + r[3] for r in rows], dtype=np.int64)
    d = np.array([r[4] for r in rows], dtype=np.int64)
    return make_store(np.array(ids), a, b, t, d, epoch=epoch)


@pytest.fixture(scope="session")
def small_synth():
    cfg = SynthConfig(n_customers=1500, sparsity=1e-2, homophily=0.8, seed=11)
    store, truth = generate(cfg)
    return cfg, store, truth


@pytest.fixture(scope="session")
def small_timeline(small_synth):
    from churnnet.pipeline import Timeline
    return Timeline(small_synth[1])


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
