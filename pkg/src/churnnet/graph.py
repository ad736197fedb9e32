"""Call graphs: direction, weight scheme, exponential decay, segmentation, reciprocity.

A :class:`CallGraph` stores one CSR matrix ``weights`` whose row ``i`` lists
the neighbourhood of customer ``i``:

* ``outgoing``: ``w[i, j]`` aggregates calls made by ``i`` to ``j``;
* ``incoming``: ``w[i, j]`` aggregates calls made by ``j`` to ``i``;
* ``undirected``: both directions summed, so the matrix is symmetric.

``evidence`` keeps the directed call counts (caller row, callee column) of the
same records, which is what the reciprocity filter needs.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

from .cdr import DAY, WEEK, CdrStore, month_interval
from .exceptions import ConfigError, RangeError

DIRECTIONS = ("undirected", "outgoing", "incoming")
SCHEMES = ("length", "count", "average", "binary")

# one year old links keep 1% of their weight
DEFAULT_DECAY = math.log(100) / 52


@dataclass(frozen=True, eq=False)
class CallGraph:
    customers: np.ndarray
    weights: sparse.csr_matrix
    direction: str = "undirected"
    scheme: str = "length"
    decay: float | None = None
    period: tuple[int, int] | None = None
    segment: str = "whole"
    reciprocal: bool = False
    evidence: sparse.csr_matrix | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return int(self.weights.shape[0])

    @property
    def n_edges(self) -> int:
        return int(self.weights.nnz)

    def strength(self) -> np.ndarray:
        return np.asarray(self.weights.sum(axis=1)).ravel()

    def structure(self) -> sparse.csr_matrix:
        """Undirected simple graph (0/1, symmetric, no loops) underlying the weights."""
        a = (self.weights > 0).astype(np.int8)
        a = ((a + a.T) > 0).astype(np.int8)
        a.setdiag(0)
        a.eliminate_zeros()
        return a.tocsr()

    def metadata(self) -> dict:
        return {
            "direction": self.direction,
            "scheme": self.scheme,
            "decay": self.decay,
            "period": list(self.period) if self.period else None,
            "segment": self.segment,
            "reciprocal": self.reciprocal,
            "n_nodes": self.n,
        }


def apply_decay(weekly_weights: Iterable[tuple[int, float]], gamma: float) -> float:
    """Aggregate ``(week, weight)`` pairs as ``sum(exp(-gamma * week) * weight)``.

    ``week`` counts whole weeks back from the reference date.
    """
    if gamma < 0:
        raise ConfigError("decay rate must be non-negative")
    total = 0.0
    for t, w in weekly_weights:
        if t < 0:
            raise RangeError(f"negative week index {t}")
        total += math.exp(-gamma * t) * w
    return total


def _resolve_period(records: CdrStore, period) -> tuple[int, int]:
    if period is None:
        return records.epoch, records.end
    a, b = period
    if a <= 6 and b <= 6:
        return month_interval(records.epoch, a)[0], month_interval(records.epoch, b)[1]
    if b <= a:
        raise ConfigError("empty period")
    return int(a), int(b)


def build_graph(
    records: CdrStore,
    direction: str = "undirected",
    scheme: str = "length",
    period: tuple[int, int] | None = None,
    decay: float | None = None,
    segment: str = "whole",
) -> CallGraph:
    """Aggregate call records into a weighted call graph.

    ``period`` is either a month range ``(first, last)`` (1-based, inclusive)
    or a ``[t0, t1)`` timestamp interval; ``None`` uses the whole store.
    ``decay`` is the weekly rate of exponential decay, with week 0 being the
    last week of the period; ``None`` aggregates plainly.
    Per-record multipliers (``records.weight``, set by segment combinations)
    scale length and count contributions.
    """
    if direction not in DIRECTIONS:
        raise ConfigError(f"unknown direction {direction!r}")
    if scheme not in SCHEMES:
        raise ConfigError(f"unknown weight scheme {scheme!r}")
    t0, t1 = _resolve_period(records, period)
    view = records.between(t0, t1)
    n = records.n_customers
    a = view.caller.astype(np.int64)
    b = view.callee.astype(np.int64)
    mult = view.multipliers()

    evidence = sparse.csr_matrix((np.ones(a.size), (a, b)), shape=(n, n))
    if direction == "outgoing":
        rows, cols = a, b
    elif direction == "incoming":
        rows, cols = b, a
    else:
        rows, cols = np.concatenate([a, b]), np.concatenate([b, a])
        mult = np.concatenate([mult, mult])
    reps = rows.size // max(a.size, 1) if a.size else 1
    start = np.tile(view.start, reps)
    dur = np.tile(view.duration, reps).astype(float)

    if decay is None:
        factor = np.ones(rows.size)
        week = np.zeros(rows.size, dtype=np.int64)
    else:
        if decay < 0:
            raise ConfigError("decay rate must be non-negative")
        week = (t1 - 1 - start) // WEEK
        factor = np.exp(-decay * week)

    half = a.size

    def agg(values):
        if direction == "undirected":
            # aggregate one direction and mirror it, so the matrix is exactly symmetric
            m = sparse.csr_matrix((values[:half], (a, b)), shape=(n, n))
            m = (m + m.T).tocsr()
        else:
            m = sparse.csr_matrix((values, (rows, cols)), shape=(n, n))
        m.sum_duplicates()
        return m

    if scheme == "length":
        w = agg(dur * mult * factor)
    elif scheme == "count":
        w = agg(mult * factor)
    elif scheme == "binary":
        if decay is None:
            w = agg(np.ones(rows.size))
            w.data[:] = 1.0
        else:
            key = np.unique(np.stack([rows, cols, week]), axis=1) if rows.size else np.zeros((3, 0), dtype=np.int64)
            w = sparse.csr_matrix((np.exp(-decay * key[2]), (key[0], key[1])), shape=(n, n))
            w.sum_duplicates()
    else:  # average of max-normalised length and count
        length = agg(dur * mult * factor)
        count = agg(mult * factor)
        lmax = length.data.max() if length.nnz else 1.0
        cmax = count.data.max() if count.nnz else 1.0
        w = (length / (lmax or 1.0) + count / (cmax or 1.0)) * 0.5
        w = sparse.csr_matrix(w)
    w.eliminate_zeros()
    w.sort_indices()
    return CallGraph(
        customers=records.customers,
        weights=w,
        direction=direction,
        scheme=scheme,
        decay=decay,
        period=(t0, t1),
        segment=segment,
        evidence=evidence,
    )


# --- segmentation -----------------------------------------------------------

WEEKDAYS = ("mon", "tue", "wed", "thu", "fri", "sat", "sun")
SEGMENTS = ("whole",) + WEEKDAYS + ("wd", "we", "day", "evening", "night")


def weekday(ts: np.ndarray) -> np.ndarray:
    """0 = Monday (UTC)."""
    return (np.asarray(ts) // DAY + 3) % 7


def hour(ts: np.ndarray) -> np.ndarray:
    return (np.asarray(ts) % DAY) // 3600


def segment_mask(name: str, ts: np.ndarray) -> np.ndarray:
    if name == "whole":
        return np.ones(np.shape(ts), dtype=bool)
    if name in WEEKDAYS:
        return weekday(ts) == WEEKDAYS.index(name)
    if name == "wd":
        return weekday(ts) < 5
    if name == "we":
        return weekday(ts) >= 5
    h = hour(ts)
    if name == "day":
        return (h >= 8) & (h < 16)
    if name == "evening":
        return h >= 16
    if name == "night":
        return h < 8
    raise ConfigError(f"unknown segment {name!r}")


@dataclass(frozen=True)
class SegmentSpec:
    """A weighted sum of time segments, e.g. ``((wd, 1), (we, 1/3))``."""

    terms: tuple[tuple[str, float], ...] = (("whole", 1.0),)

    def __post_init__(self):
        if not self.terms:
            raise ConfigError("segment spec needs at least one term")
        for name, coef in self.terms:
            if name not in SEGMENTS:
                raise ConfigError(f"unknown segment {name!r}")
            if not coef > 0:
                raise ConfigError(f"segment coefficient must be positive, got {coef}")

    @property
    def kind(self) -> str:
        if len(self.terms) > 1:
            return "combo"
        name = self.terms[0][0]
        if name == "whole":
            return "whole"
        if name in WEEKDAYS:
            return "day-of-week"
        if name in ("wd", "we"):
            return "part-of-week"
        return "time-of-day"

    @property
    def name(self) -> str:
        parts = []
        for seg, coef in self.terms:
            if coef == 1:
                parts.append(seg)
            else:
                frac = _as_fraction(coef)
                parts.append(f"{frac}*{seg}")
        return "+".join(parts)

    @classmethod
    def parse(cls, text: str) -> "SegmentSpec":
        """Parse ``"1/2*day+evening"``-style expressions."""
        terms = []
        for part in text.replace(" ", "").split("+"):
            m = re.fullmatch(r"(?:([0-9.]+)(?:/([0-9.]+))?\*)?([a-z]+)", part)
            if not m:
                raise ConfigError(f"cannot parse segment term {part!r}")
            num, den, seg = m.groups()
            coef = float(num) if num else 1.0
            if den:
                coef /= float(den)
            terms.append((seg, coef))
        return cls(tuple(terms))


def _as_fraction(x: float) -> str:
    for d in (2, 3, 4, 5, 6):
        if abs(x * d - round(x * d)) < 1e-12:
            return f"{int(round(x * d))}/{d}"
    return repr(x)


def paper_segmentations() -> list[SegmentSpec]:
    """Whole network plus every segmentation of the architecture grid (21 in total)."""
    specs = [SegmentSpec()]
    specs += [SegmentSpec(((d, 1.0),)) for d in WEEKDAYS]
    specs += [SegmentSpec(((s, 1.0),)) for s in ("wd", "we", "day", "evening", "night")]
    for text in ("1/2*wd+we", "wd+1/2*we", "1/3*wd+we", "wd+1/3*we",
                 "1/2*day+evening", "day+1/2*evening", "1/3*day+evening", "day+1/3*evening"):
        specs.append(SegmentSpec.parse(text))
    return specs


def segment_records(records: CdrStore, spec: SegmentSpec) -> CdrStore:
    """Restrict records to a segment; combination terms become record multipliers."""
    coef = np.zeros(len(records))
    for name, c in spec.terms:
        coef += c * segment_mask(name, records.start)
    keep = coef > 0
    if len(spec.terms) == 1 and spec.terms[0][1] == 1.0:
        return records.subset(keep)
    return records.subset(keep, weight=coef[keep])


# --- reciprocity & sparsity -------------------------------------------------

def filter_reciprocal(graph: CallGraph) -> CallGraph:
    """Keep an edge between i and j only if calls went both ways in the period."""
    if graph.evidence is None:
        raise ConfigError("graph carries no directed call evidence")
    ev = (graph.evidence > 0).astype(np.int8)
    mutual = ev.multiply(ev.T).tocsr()
    w = graph.weights.multiply(mutual).tocsr()
    w.eliminate_zeros()
    w.sort_indices()
    return replace(graph, weights=w, reciprocal=True, evidence=graph.evidence.multiply(mutual).tocsr())


def sparsity(graph: CallGraph) -> float:
    """Fraction of non-zero ordered node pairs."""
    n = graph.n
    if n < 2:
        raise RangeError("sparsity needs at least two nodes")
    w = graph.weights
    nnz = w.nnz - int(np.count_nonzero(w.diagonal()))
    return nnz / (n * (n - 1))


# --- export / import --------------------------------------------------------

def save_graph(graph: CallGraph, path: str | Path) -> None:
    """Write ``<path>.csv`` (src,dst,weight) and ``<path>.json`` metadata."""
    path = Path(path)
    coo = graph.weights.tocoo()
    order = np.lexsort((coo.col, coo.row))
    ids = graph.customers
    with open(path.with_suffix(".csv"), "w", encoding="utf-8") as fh:
        fh.write("src,dst,weight\n")
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{ids[r]},{ids[c]},{float(v)!r}\n")
    meta = graph.metadata()
    meta["customers"] = [str(c) for c in ids]
    with open(path.with_suffix(".json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)


def load_graph(path: str | Path) -> CallGraph:
    path = Path(path)
    with open(path.with_suffix(".json"), encoding="utf-8") as fh:
        meta = json.load(fh)
    ids = np.array(meta["customers"], dtype=str)
    index = {c: i for i, c in enumerate(ids.tolist())}
    rows, cols, vals = [], [], []
    with open(path.with_suffix(".csv"), encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            s, d, v = line.rstrip("\n").split(",")
            rows.append(index[s])
            cols.append(index[d])
            vals.append(float(v))
    n = ids.size
    w = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    return CallGraph(
        customers=ids,
        weights=w,
        direction=meta["direction"],
        scheme=meta["scheme"],
        decay=meta["decay"],
        period=tuple(meta["period"]) if meta["period"] else None,
        segment=meta.get("segment", "whole"),
        reciprocal=meta.get("reciprocal", False),
    )


def from_edges(customers: Sequence[str], edges: Iterable[tuple], direction: str = "undirected") -> CallGraph:
    """Small helper for tests and notebooks: graph from ``(i, j, w)`` index triples.

    Undirected input edges are mirrored.
    """
    ids = np.asarray(customers, dtype=str)
    n = ids.size
    e = list(edges)
    if e:
        r, c, v = (np.asarray(x) for x in zip(*[(t[0], t[1], t[2] if len(t) > 2 else 1.0) for t in e]))
    else:
        r = c = np.zeros(0, dtype=np.int64)
        v = np.zeros(0)
    if direction == "undirected":
        r, c, v = np.concatenate([r, c]), np.concatenate([c, r]), np.concatenate([v, v])
    w = sparse.csr_matrix((v.astype(float), (r.astype(np.int64), c.astype(np.int64))), shape=(n, n))
    w.sum_duplicates()
    w.eliminate_zeros()
    return CallGraph(customers=ids, weights=w, direction=direction, scheme="length")
