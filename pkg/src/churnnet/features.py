"""Per-customer network, link-based and RFM features for the non-relational classifier."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np
from scipy import sparse

from .cdr import DAY, CdrStore
from .exceptions import AlignmentError, ConfigError
from .graph import CallGraph

NETWORK_COLUMNS = (
    "degree_full", "degree_churn", "degree_nonchurn",
    "triangles_full", "triangles_churn", "triangles_nonchurn",
    "transitivity",
    "mode_link", "count_link_churn", "count_link_nonchurn",
    "binary_link_churn", "binary_link_nonchurn",
)
RFM_COLUMNS = (
    "recency_days",
    "calls_30", "calls_60", "calls_90",
    "seconds_30", "seconds_60", "seconds_90",
)
MODES = ("network_only", "rl_only", "all")


@dataclass(frozen=True, eq=False)
class FeatureTable:
    customers: np.ndarray
    columns: tuple[str, ...]
    values: np.ndarray
    labels: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if self.values.shape != (len(self.customers), len(self.columns)):
            raise AlignmentError(
                f"values shape {self.values.shape} does not match "
                f"{len(self.customers)} rows x {len(self.columns)} columns"
            )

    def __len__(self) -> int:
        return len(self.customers)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.columns.index(name)]

    def select(self, columns: Sequence[str]) -> "FeatureTable":
        idx = [self.columns.index(c) for c in columns]
        return FeatureTable(self.customers, tuple(columns), self.values[:, idx], self.labels)

    def rows(self, idx) -> "FeatureTable":
        labels = None if self.labels is None else self.labels[idx]
        return FeatureTable(self.customers[idx], self.columns, self.values[idx], labels)

    def with_labels(self, labels) -> "FeatureTable":
        labels = np.asarray(labels)
        if labels.shape != (len(self),):
            raise AlignmentError("label vector does not match the table rows")
        return FeatureTable(self.customers, self.columns, self.values, labels)

    def to_csv(self, fh: TextIO) -> None:
        header = ["customer_id", *self.columns]
        if self.labels is not None:
            header.append("label")
        fh.write(",".join(header) + "\n")
        for i, cid in enumerate(self.customers.tolist()):
            cells = [cid] + [repr(float(v)) for v in self.values[i]]
            if self.labels is not None:
                cells.append(str(int(self.labels[i])))
            fh.write(",".join(cells) + "\n")


def _block(graph_or_ids, columns, arrays) -> FeatureTable:
    ids = graph_or_ids.customers if hasattr(graph_or_ids, "customers") else np.asarray(graph_or_ids)
    return FeatureTable(ids, tuple(columns), np.column_stack([np.asarray(a, dtype=float) for a in arrays]))


def _check_labels(graph: CallGraph, labels) -> np.ndarray:
    labels = np.asarray(labels, dtype=float)
    if labels.shape != (graph.n,):
        raise AlignmentError("labels must cover every node of the graph")
    return labels


def _adjacency(graph: CallGraph) -> sparse.csr_matrix:
    a = (graph.weights > 0).astype(float).tocsr()
    a.setdiag(0)
    a.eliminate_zeros()
    return a


def degree_features(graph: CallGraph, labels) -> FeatureTable:
    """Neighbour counts: all, churners, non-churners (neighbourhood = graph row)."""
    c = _check_labels(graph, labels)
    a = _adjacency(graph)
    full = np.asarray(a.sum(axis=1)).ravel()
    churn = a @ c
    return _block(graph, NETWORK_COLUMNS[:3], [full, churn, full - churn])


def triangle_features(graph: CallGraph, labels) -> FeatureTable:
    """Triangles through each node on the undirected simple graph.

    The churn (non-churn) variant counts triangles whose two other members are
    both churners (non-churners).
    """
    c = _check_labels(graph, labels)
    s = graph.structure().astype(float)

    def count(mask):
        sm = s @ sparse.diags(mask) if mask is not None else s
        closed = (sm @ sm).multiply(s)
        return np.asarray(closed.sum(axis=1)).ravel() / 2.0

    return _block(graph, NETWORK_COLUMNS[3:6], [count(None), count(c), count(1.0 - c)])


def transitivity(graph: CallGraph) -> np.ndarray:
    """Local clustering coefficient; 0 for nodes with fewer than two neighbours."""
    s = graph.structure().astype(float)
    deg = np.asarray(s.sum(axis=1)).ravel()
    tri = np.asarray((s @ s).multiply(s).sum(axis=1)).ravel() / 2.0
    pairs = deg * (deg - 1) / 2.0
    out = np.zeros(graph.n)
    np.divide(tri, pairs, out=out, where=pairs > 0)
    return out


def link_based(graph: CallGraph, labels) -> FeatureTable:
    """Mode-, count- and binary-link statistics over each node's neighbourhood.

    count-link is the weight share of each class among neighbours; mode-link
    is the majority neighbour class by head count (ties and empty
    neighbourhoods give non-churner).
    """
    c = _check_labels(graph, labels)
    w = graph.weights.tocsr().copy()
    w.setdiag(0)
    w.eliminate_zeros()
    z = np.asarray(w.sum(axis=1)).ravel()
    wc = w @ c
    count_churn = np.zeros(graph.n)
    count_non = np.zeros(graph.n)
    np.divide(wc, z, out=count_churn, where=z > 0)
    np.divide(z - wc, z, out=count_non, where=z > 0)
    a = (w > 0).astype(float)
    n_churn = a @ c
    n_non = np.asarray(a.sum(axis=1)).ravel() - n_churn
    mode = (n_churn > n_non).astype(float)
    return _block(
        graph,
        NETWORK_COLUMNS[7:],
        [mode, count_churn, count_non, (n_churn > 0).astype(float), (n_non > 0).astype(float)],
    )


def network_features(graph: CallGraph, labels) -> FeatureTable:
    deg = degree_features(graph, labels)
    tri = triangle_features(graph, labels)
    lb = link_based(graph, labels)
    values = np.column_stack([deg.values, tri.values, transitivity(graph), lb.values])
    return FeatureTable(graph.customers, NETWORK_COLUMNS, values)


def rfm_features(records: CdrStore, reference: int, window_days: int = 90) -> FeatureTable:
    """Recency, frequency and monetary (call seconds) over 30/60/90-day lookbacks.

    Calls count for both parties. Recency is whole days since the last call
    before ``reference``, or ``window_days`` if there was none in the window.
    """
    n = records.n_customers
    view = records.between(reference - window_days * DAY, reference)
    cust = np.concatenate([view.caller, view.callee]).astype(np.int64)
    ts = np.concatenate([view.start, view.start])
    dur = np.concatenate([view.duration, view.duration]).astype(float)

    last = np.full(n, -1, dtype=np.int64)
    np.maximum.at(last, cust, ts)
    recency = np.where(last >= 0, (reference - last) // DAY, window_days).astype(float)
    cols = [recency]
    calls, secs = [], []
    for k in (30, 60, 90):
        m = ts >= reference - k * DAY
        calls.append(np.bincount(cust[m], minlength=n).astype(float))
        secs.append(np.bincount(cust[m], weights=dur[m], minlength=n))
    cols += calls + secs
    return _block(records.customers, RFM_COLUMNS, cols)


def assemble(blocks: Iterable[FeatureTable], rl_scores: Iterable = (), mode: str = "all") -> FeatureTable:
    """Join feature blocks and relational-learner score columns for one of three modes.

    ``rl_scores`` items are :class:`~churnnet.relational.ScoreState` objects (or
    ``(name, vector)`` pairs); each becomes a column named after its learner.
    """
    if mode not in MODES:
        raise ConfigError(f"unknown feature mode {mode!r}")
    blocks = list(blocks)
    scores = []
    for s in rl_scores:
        if isinstance(s, tuple):
            scores.append((s[0], np.asarray(s[1], dtype=float)))
        else:
            scores.append((s.learner, np.asarray(s.scores, dtype=float)))
    if mode == "rl_only" and not scores:
        raise ConfigError("rl_only mode needs at least one score set")
    if mode == "network_only" or mode == "all":
        if not blocks:
            raise ConfigError(f"{mode} mode needs network feature blocks")
    ids = blocks[0].customers if blocks else None
    for b in blocks[1:]:
        if len(b.customers) != len(ids) or (b.customers != ids).any():
            raise AlignmentError("feature blocks are indexed by different customers")

    cols: list[str] = []
    arrays: list[np.ndarray] = []
    if mode != "rl_only":
        for b in blocks:
            cols += b.columns
            arrays.append(b.values)
    if mode != "network_only":
        n = len(ids) if ids is not None else len(scores[0][1])
        for name, v in scores:
            if v.shape != (n,):
                raise AlignmentError(f"score set {name!r} has {v.shape[0]} rows, expected {n}")
            cols.append(name)
            arrays.append(v[:, None])
        if ids is None:
            ids = np.arange(n).astype(str)
    if len(set(cols)) != len(cols):
        raise ConfigError("duplicate feature column names")
    return FeatureTable(ids, tuple(cols), np.hstack(arrays))
