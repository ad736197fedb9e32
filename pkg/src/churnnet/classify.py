"""Non-relational classification: logistic regression, oversampling and out-of-time runs.

Only logistic regression is built in. Other learners plug in through the
:class:`Classifier` protocol: anything with ``fit(table, labels) -> model``
where the model has ``predict(table) -> ScoreState``.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Protocol, TextIO

import numpy as np
from scipy.special import expit

from .exceptions import AlignmentError, ConfigError, FittingError, LeakageError, SamplingError
from .features import FeatureTable
from .logistic import irls
from .states import ScoreState

log = logging.getLogger(__name__)


@dataclass
class TrainedModel:
    """Fitted logistic model.

    ``columns`` is the full training signature; ``used`` lists the columns
    that received coefficients (constant columns are dropped). With
    standardization, ``center``/``scale`` are applied before the linear part.
    Inputs are clipped to the training range ``[lo, hi]`` first: a column that
    barely varied in training (e.g. converged collective-inference scores)
    would otherwise blow up under a small level shift at prediction time.
    """

    kind: str
    columns: tuple[str, ...]
    used: tuple[str, ...]
    coef: np.ndarray
    intercept: float
    center: np.ndarray
    scale: np.ndarray
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    converged: bool = True
    dropped: tuple[str, ...] = ()
    n_iter: int = 0

    def decision(self, table: FeatureTable) -> np.ndarray:
        if tuple(table.columns) != tuple(self.columns):
            raise AlignmentError(
                f"feature columns {list(table.columns)} do not match the training signature {list(self.columns)}"
            )
        if not self.used:
            return np.full(len(table), self.intercept)
        x = table.select(self.used).values
        if self.lo is not None:
            x = np.clip(x, self.lo, self.hi)
        return self.intercept + ((x - self.center) / self.scale) @ self.coef

    def predict(self, table: FeatureTable, name: str = "") -> ScoreState:
        return ScoreState(table.customers, expit(self.decision(table)), name or self.kind)

    def coefficients(self) -> dict[str, float]:
        """Coefficients on the original (unstandardized) feature scale."""
        raw = self.coef / self.scale
        out = {c: float(v) for c, v in zip(self.used, raw)}
        out["(intercept)"] = float(self.intercept - raw @ self.center)
        return out

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "columns": list(self.columns),
            "used": list(self.used),
            "dropped": list(self.dropped),
            "coef": [float(v) for v in self.coef],
            "intercept": float(self.intercept),
            "center": [float(v) for v in self.center],
            "scale": [float(v) for v in self.scale],
            "lo": None if self.lo is None else [float(v) for v in self.lo],
            "hi": None if self.hi is None else [float(v) for v in self.hi],
            "converged": bool(self.converged),
            "n_iter": int(self.n_iter),
        }

    @classmethod
    def from_json(cls, d: dict) -> "TrainedModel":
        return cls(
            kind=d["kind"],
            columns=tuple(d["columns"]),
            used=tuple(d["used"]),
            coef=np.asarray(d["coef"], dtype=float),
            intercept=float(d["intercept"]),
            center=np.asarray(d["center"], dtype=float),
            scale=np.asarray(d["scale"], dtype=float),
            lo=None if d.get("lo") is None else np.asarray(d["lo"], dtype=float),
            hi=None if d.get("hi") is None else np.asarray(d["hi"], dtype=float),
            converged=bool(d.get("converged", True)),
            dropped=tuple(d.get("dropped", ())),
            n_iter=int(d.get("n_iter", 0)),
        )

    def dump(self, fh: TextIO) -> None:
        json.dump(self.to_json(), fh, indent=1, sort_keys=True)
        fh.write("\n")


def fit_logistic(table: FeatureTable, labels=None, max_iter: int = 100, tol: float = 1e-10,
                 l2: float = 1e-4, standardize: bool = True, clip: bool = True) -> TrainedModel:
    """L2-penalised logistic regression (intercept unpenalised).

    Constant columns (range within 1e-8, relative) carry no information and
    are dropped with a log notice.
    ``standardize`` centres and scales the remaining columns first, which
    makes the penalty scale-free; predictions always take raw features.
    ``clip`` records the training range used to bound prediction inputs.
    """
    y = np.asarray(table.labels if labels is None else labels, dtype=float)
    if y.shape != (len(table),):
        raise AlignmentError("one label per row required")
    if len(table) < 2 or y.min() == y.max():
        raise FittingError("logistic regression needs at least two rows and both classes")
    x = table.values
    # constant up to float noise (converged CI scores settle on one value with ~1e-9 jitter)
    span = np.ptp(x, axis=0)
    const = span <= 1e-8 * np.maximum(1.0, np.abs(x).max(axis=0))
    dropped = tuple(c for c, k in zip(table.columns, const) if k)
    if dropped:
        log.info("dropping constant feature columns: %s", ", ".join(dropped))
    used = tuple(c for c, k in zip(table.columns, const) if not k)
    x = x[:, ~const]
    if standardize and x.shape[1]:
        center = x.mean(axis=0)
        scale = x.std(axis=0)
        scale[scale == 0] = 1.0
    else:
        center = np.zeros(x.shape[1])
        scale = np.ones(x.shape[1])
    fit = irls((x - center) / scale, y, l2=l2, max_iter=max_iter, tol=tol)
    if not fit.converged:
        log.warning("logistic regression did not converge in %d iterations", max_iter)
    lo, hi = (x.min(axis=0), x.max(axis=0)) if clip else (None, None)
    return TrainedModel("logistic", tuple(table.columns), used, fit.coef, fit.intercept,
                        center, scale, lo, hi, fit.converged, dropped, fit.n_iter)


def predict(model, table: FeatureTable, name: str = "") -> ScoreState:
    return model.predict(table, name)


class Classifier(Protocol):
    def fit(self, table: FeatureTable, labels) -> "object": ...


@dataclass
class LogisticClassifier:
    """The built-in classifier behind the pluggable interface."""

    l2: float = 1e-4
    max_iter: int = 100
    tol: float = 1e-10
    standardize: bool = True
    clip: bool = True

    def fit(self, table: FeatureTable, labels=None) -> TrainedModel:
        return fit_logistic(table, labels, self.max_iter, self.tol, self.l2, self.standardize, self.clip)


def oversample(table: FeatureTable, ratio: float = 0.5, seed: int = 0) -> FeatureTable:
    """Duplicate random minority rows until they make up at least ``ratio`` of the table.

    Original rows keep their order and come first; duplicates are appended.
    """
    if table.labels is None:
        raise SamplingError("oversampling needs a labelled table")
    if not 0 < ratio < 1:
        raise ConfigError("ratio must lie in (0, 1)")
    y = np.asarray(table.labels).astype(int)
    counts = np.bincount(y, minlength=2)
    if counts.min() == 0:
        raise SamplingError("oversampling needs both classes")
    minority = int(np.argmin(counts))
    n_min, n_maj = int(counts[minority]), int(counts[1 - minority])
    if n_min / (n_min + n_maj) >= ratio:
        return table
    # smallest m with (n_min + m) / (n + m) >= ratio
    need = int(np.ceil((ratio * (n_min + n_maj) - n_min) / (1 - ratio) - 1e-9))
    pool = np.flatnonzero(y == minority)
    rng = np.random.default_rng(seed)
    extra = rng.choice(pool, size=need, replace=True)
    idx = np.concatenate([np.arange(len(table)), extra])
    return table.rows(idx)


@dataclass(frozen=True)
class OotWindows:
    """Month bindings of an out-of-time run (1-based, inclusive ranges)."""

    train_features: tuple[int, int] = (1, 3)
    train_label: int = 4
    test_features: tuple[int, int] = (2, 4)
    test_label: int = 5

    def check(self) -> None:
        """Feature windows must end before their label month starts."""
        for (a, b), lab, what in ((self.train_features, self.train_label, "training"),
                                  (self.test_features, self.test_label, "test")):
            if a > b:
                raise ConfigError(f"{what} feature window {a}..{b} is empty")
            if b >= lab:
                raise LeakageError(f"{what} features from M{a}-M{b} overlap label month M{lab}")
        if self.test_label <= self.train_label:
            raise LeakageError("test labels must come after training labels")
        if self.train_features[1] >= self.test_label:
            raise LeakageError("training features overlap the test label month")


@dataclass
class OotResult:
    model: object
    train: ScoreState
    train_labels: np.ndarray
    test: ScoreState
    test_labels: np.ndarray
    columns: tuple[str, ...] = field(default=())


def run_oot(timeline, mode: str = "all", learners=(), windows: OotWindows | None = None,
            classifier: Classifier | None = None, ratio: float = 0.5, seed: int = 0, **kw) -> OotResult:
    """Train on the earlier feature window against the next month's labels, test one month later.

    ``timeline`` is a :class:`churnnet.pipeline.Timeline`; extra keywords go
    to :meth:`~churnnet.pipeline.Timeline.feature_table`.
    """
    windows = windows or OotWindows()
    windows.check()
    classifier = classifier or LogisticClassifier()
    timeline.require_months()
    train = timeline.feature_table(windows.train_features, windows.train_label, mode, learners, seed=seed, **kw)
    test = timeline.feature_table(windows.test_features, windows.test_label, mode, learners, seed=seed, **kw)
    model = classifier.fit(oversample(train, ratio, seed))
    return OotResult(
        model=model,
        train=model.predict(train, f"nrc-{mode}"),
        train_labels=np.asarray(train.labels),
        test=model.predict(test, f"nrc-{mode}"),
        test_labels=np.asarray(test.labels),
        columns=tuple(train.columns),
    )


def predictions_csv(state: ScoreState, labels, fh: TextIO) -> None:
    fh.write("customer_id,score,label\n")
    for cid, s, y in zip(state.customers.tolist(), state.scores.tolist(), np.asarray(labels).tolist()):
        fh.write(f"{cid},{s!r},{int(y)}\n")
