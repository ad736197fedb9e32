"""Label and score vectors aligned with a customer index."""
from __future__ import annotations

from dataclasses import dataclass
from typing import TextIO

import numpy as np

from .exceptions import AlignmentError, RangeError


@dataclass(frozen=True, eq=False)
class LabelState:
    """Known hard labels (0 = non-churner, 1 = churner) at time index ``t``."""

    customers: np.ndarray
    labels: np.ndarray
    t: int = 0

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.shape != (len(self.customers),):
            raise AlignmentError("one label per customer required")
        if not np.isin(lab, (0, 1)).all():
            raise RangeError("labels must be 0 or 1")

    @property
    def prior(self) -> float:
        return float(np.mean(self.labels)) if len(self.labels) else 0.0

    def as_scores(self) -> np.ndarray:
        return np.asarray(self.labels, dtype=float)


@dataclass(frozen=True, eq=False)
class ScoreState:
    """Churn probabilities P(churner) per customer, as produced by a learner."""

    customers: np.ndarray
    scores: np.ndarray
    learner: str = ""
    n_iter: int = 1
    converged: bool = True

    def __post_init__(self):
        s = np.asarray(self.scores)
        if s.shape != (len(self.customers),):
            raise AlignmentError("one score per customer required")
        if s.size and (np.isnan(s).any() or s.min() < -1e-12 or s.max() > 1 + 1e-12):
            raise RangeError("scores must lie in [0, 1]")

    def to_csv(self, fh: TextIO, header: bool = True) -> None:
        if header:
            fh.write("customer_id,learner_id,score\n")
        for cid, s in zip(self.customers.tolist(), self.scores.tolist()):
            fh.write(f"{cid},{self.learner},{s!r}\n")


def as_score_vector(state, n: int | None = None) -> np.ndarray:
    """Accept a LabelState, ScoreState or plain array and return float scores."""
    if isinstance(state, LabelState):
        v = state.as_scores()
    elif isinstance(state, ScoreState):
        v = np.asarray(state.scores, dtype=float)
    else:
        v = np.asarray(state, dtype=float)
    if n is not None and v.shape != (n,):
        raise AlignmentError(f"state has {v.shape} entries, graph has {n} nodes")
    return v
