"""Month timeline glue: graphs per window, label states, learner scores and feature tables.

A :class:`Timeline` wraps one (short-call filtered) CDR store and caches the
monthly churn labels. Everything downstream indexes customers in
``timeline.customers`` order.

Timeline conventions:

* labels of month ``m`` use the 30-day rule, scanning into later months;
* the population scored for month ``m`` excludes customers already labelled
  churners in month ``m - 1`` (they are known to be gone);
* a relational learner scoring month ``m`` uses the graph of the window
  ending in ``m - 1`` with the labels of ``m - 1`` as known state, and
  pre-trains CDRN/NLB on the same-length window one month earlier.
"""
from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, replace

import numpy as np

from .cdr import MONTH, N_MONTHS, CdrStore, filter_short_calls, month_interval, monthly_labels
from .config import derive_seed
from .exceptions import ConfigError, RangeError
from .features import FeatureTable, assemble, network_features, rfm_features
from .graph import DEFAULT_DECAY, CallGraph, SegmentSpec, build_graph, filter_reciprocal, segment_records
from .relational import CiConfig, Pretraining, run_learner
from .states import LabelState, ScoreState


@dataclass(frozen=True)
class GraphSpec:
    """One network architecture."""

    direction: str = "undirected"
    scheme: str = "length"
    decay: float | None = DEFAULT_DECAY
    segment: str = "whole"
    reciprocal: bool = False

    @property
    def key(self) -> str:
        decay = "none" if self.decay is None else f"{self.decay:.6g}"
        recip = "reciprocal" if self.reciprocal else "full"
        return f"{self.direction}/{self.scheme}/decay={decay}/{self.segment}/{recip}"


@dataclass(frozen=True)
class Frame:
    """A scoring window: graph months ``months``, predicting month ``months[1] + 1``."""

    name: str
    months: tuple[int, int]

    @property
    def state_month(self) -> int:
        return self.months[1]

    @property
    def target_month(self) -> int:
        return self.months[1] + 1

    @property
    def pretrain_months(self) -> tuple[int, int]:
        return self.months[0] - 1, self.months[1] - 1

    def shifted(self, by: int) -> "Frame":
        return Frame(self.name, (self.months[0] + by, self.months[1] + by))


def frame(kind: str, target_month: int = 5, long_months: int = 3) -> Frame:
    """Short-term (one month) or long-term (``long_months``) window before ``target_month``."""
    end = target_month - 1
    if kind == "short":
        return Frame("short", (end, end))
    if kind == "long":
        return Frame("long", (end - long_months + 1, end))
    raise ConfigError(f"unknown timeframe {kind!r}")


class Timeline:
    def __init__(self, store: CdrStore, min_duration: int = 4, cache_size: int = 16):
        self.store = filter_short_calls(store, min_duration)
        self.labels = monthly_labels(self.store)
        self._graphs: OrderedDict = OrderedDict()
        self._scores: dict = {}
        self._cache_size = cache_size

    @property
    def customers(self) -> np.ndarray:
        return self.store.customers

    @property
    def n(self) -> int:
        return self.store.n_customers

    def require_months(self) -> None:
        counts = np.bincount((self.store.start - self.store.epoch) // MONTH, minlength=N_MONTHS)
        empty = [f"M{m + 1}" for m in range(N_MONTHS) if counts[m] == 0]
        if empty:
            raise RangeError(f"no call records in {', '.join(empty)}")

    # --- labels -------------------------------------------------------------

    def target(self, month: int) -> np.ndarray:
        if month not in self.labels:
            raise RangeError(f"labels exist for M1..M{N_MONTHS - 1}, not M{month}")
        return self.labels[month].is_churner.astype(np.int8)

    def state(self, month: int) -> LabelState:
        return LabelState(self.customers, self.target(month), month)

    def population(self, month: int) -> np.ndarray:
        if month <= 1:
            return np.ones(self.n, dtype=bool)
        return ~self.labels[month - 1].is_churner

    # --- graphs -------------------------------------------------------------

    def graph(self, spec: GraphSpec, months: tuple[int, int]) -> CallGraph:
        key = (spec, tuple(months))
        g = self._graphs.get(key)
        if g is not None:
            self._graphs.move_to_end(key)
            return g
        a, b = months
        if not 1 <= a <= b <= N_MONTHS:
            raise RangeError(f"bad month window {months}")
        if spec.reciprocal:
            g = filter_reciprocal(self.graph(replace(spec, reciprocal=False), months))
            return self._remember(key, g)
        view = self.store.in_months(a, b)
        seg = SegmentSpec.parse(spec.segment)
        if spec.segment != "whole":
            view = segment_records(view, seg)
        t0 = month_interval(self.store.epoch, a)[0]
        t1 = month_interval(self.store.epoch, b)[1]
        g = build_graph(view, spec.direction, spec.scheme, (t0, t1), spec.decay, seg.name)
        return self._remember(key, g)

    def _remember(self, key, g: CallGraph) -> CallGraph:
        self._graphs[key] = g
        while len(self._graphs) > self._cache_size:
            self._graphs.popitem(last=False)
        return g

    # --- relational learners ------------------------------------------------

    def pretraining(self, spec: GraphSpec, fr: Frame) -> Pretraining | None:
        pa, pb = fr.pretrain_months
        if pa < 1:
            return None
        return Pretraining(
            graph=self.graph(spec, (pa, pb)),
            state=self.state(pb),
            target=self.target(fr.state_month),
            population=self.population(fr.state_month),
        )

    def score(self, learner: str, spec: GraphSpec, fr: Frame, ci: CiConfig | None = None,
              seed: int = 0) -> ScoreState:
        """Scores for every customer; evaluate on ``population(fr.target_month)``."""
        base = ci or CiConfig()
        cfg = CiConfig(base.method, base.burn_in, base.max_iter, base.threshold, base.k, base.alpha,
                       base.d, derive_seed(seed, learner, spec.key, fr.months))
        key = (learner, spec, fr.months, cfg.burn_in, cfg.max_iter, cfg.threshold, cfg.k, cfg.alpha, cfg.d, cfg.seed)
        if key not in self._scores:
            if len(self._scores) >= 256:
                self._scores.clear()
            g = self.graph(spec, fr.months)
            self._scores[key] = run_learner(learner, g, self.state(fr.state_month), self.pretraining(spec, fr), cfg)
        return self._scores[key]

    def evaluation(self, scores: ScoreState, target_month: int) -> tuple[np.ndarray, np.ndarray]:
        pop = self.population(target_month)
        return np.asarray(scores.scores)[pop], self.target(target_month)[pop]

    # --- non-relational features -------------------------------------------

    def feature_table(self, months: tuple[int, int], label_month: int, mode: str = "all",
                      learners=(), spec: GraphSpec | None = None, rl_spec: GraphSpec | None = None,
                      seed: int = 0, ci: CiConfig | None = None) -> FeatureTable:
        """Features from the window ``months`` for the customers alive at ``label_month``.

        Network features use the window's graph and the labels known at its
        last month; RFM features look back from the window end. RL score
        columns come from short-term learners on the last month of the window.
        """
        a, b = months
        if b >= label_month:
            raise ConfigError("feature window must end before the label month")
        spec = spec or GraphSpec()
        blocks = []
        if mode != "rl_only":
            g = self.graph(spec, months)
            blocks.append(network_features(g, self.target(b)))
            blocks.append(rfm_features(self.store, month_interval(self.store.epoch, b)[1]))
        scores = []
        if mode != "network_only":
            fr = Frame("short", (b, b))
            for learner in learners:
                scores.append(self.score(learner, rl_spec or spec, fr, ci, seed))
        table = assemble(blocks, scores, mode)
        if table.customers is not self.customers and len(table) == self.n:
            table = FeatureTable(self.customers, table.columns, table.values)
        pop = self.population(label_month)
        return table.rows(np.flatnonzero(pop)).with_labels(self.target(label_month)[pop])
