"""Lift, AUC and the (expected) maximum profit measures for churn models.

Profit of targeting everyone scoring at or above cut-off ``t``::

    P(t; gamma) = CLV * (gamma * (1 - delta) - phi) * pi0 * F0(t)
                  - CLV * (delta + phi) * pi1 * F1(t)

``pi0``/``pi1`` are the churner / non-churner base rates and ``F0``/``F1`` the
fractions of churners / non-churners targeted. Targeting nobody (profit 0)
is always an option, so MP and EMP are non-negative.

For a fixed cut-off the profit is linear in ``gamma``; the optimal profit is
therefore the upper envelope of a set of lines, and EMP integrates that
piecewise-linear envelope exactly against the Beta density.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import special, stats

from .exceptions import ConfigError, MetricError


@dataclass(frozen=True)
class EmpParams:
    clv: float = 200.0
    delta: float = 10.0 / 200.0
    phi: float = 1.0 / 200.0
    alpha: float = 6.0
    beta: float = 14.0
    gamma: float | None = None  # point value for MP; defaults to the Beta mean

    def __post_init__(self):
        if not self.clv > 0:
            raise ConfigError("CLV must be positive")
        if not (0 <= self.delta <= 1 and 0 <= self.phi <= 1):
            raise ConfigError("delta and phi must lie in [0, 1]")
        if not (self.alpha > 0 and self.beta > 0):
            raise ConfigError("Beta parameters must be positive")
        if self.gamma is not None and not 0 <= self.gamma <= 1:
            raise ConfigError("gamma must lie in [0, 1]")

    @property
    def gamma_point(self) -> float:
        return self.alpha / (self.alpha + self.beta) if self.gamma is None else self.gamma

    def as_dict(self) -> dict:
        return asdict(self)


def _prep(scores, labels):
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels).astype(bool)
    if s.shape != y.shape or s.ndim != 1:
        raise MetricError("scores and labels must be 1-d and of equal length")
    return s, y


def lift(scores, labels, fraction: float) -> float:
    """Churn rate among the top ``ceil(fraction * n)`` scores over the base churn rate.

    Ties are broken by position (the customer-id order of the inputs).
    """
    s, y = _prep(scores, labels)
    if not 0 < fraction <= 1:
        raise MetricError("fraction must lie in (0, 1]")
    n_churn = int(y.sum())
    if n_churn == 0:
        raise MetricError("lift is undefined without churners")
    n = s.size
    top = max(1, math.ceil(fraction * n - 1e-9))
    order = np.argsort(-s, kind="stable")[:top]
    return float(y[order].mean() / (n_churn / n))


def auc(scores, labels) -> float:
    """Probability that a random churner outscores a random non-churner (ties count 1/2)."""
    s, y = _prep(scores, labels)
    n1 = int(y.sum())
    n0 = y.size - n1
    if n1 == 0 or n0 == 0:
        raise MetricError("AUC needs both classes")
    r = stats.rankdata(s)
    return float((r[y].sum() - n1 * (n1 + 1) / 2.0) / (n1 * n0))


def _cutoffs(s, y):
    """Targeted fractions of churners/non-churners for each distinct cut-off.

    Index 0 targets nobody; the last entry targets everyone.
    """
    order = np.argsort(-s, kind="stable")
    ss, yy = s[order], y[order]
    n1 = int(yy.sum())
    n0 = yy.size - n1
    last_of_group = np.r_[ss[1:] != ss[:-1], True]
    c1 = np.cumsum(yy)[last_of_group]
    c0 = np.cumsum(~yy)[last_of_group]
    f0 = np.r_[0.0, c1 / n1] if n1 else np.zeros(c1.size + 1)
    f1 = np.r_[0.0, c0 / n0] if n0 else np.zeros(c0.size + 1)
    return f0, f1, n1 / yy.size, n0 / yy.size


def _lines(f0, f1, pi0, pi1, p: EmpParams):
    """Profit per cut-off as ``slope * gamma + offset``."""
    slope = p.clv * (1 - p.delta) * pi0 * f0
    offset = -p.clv * p.phi * pi0 * f0 - p.clv * (p.delta + p.phi) * pi1 * f1
    return slope, offset


def profit_curve(scores, labels, params: EmpParams, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    """Profit and targeted fraction for every distinct cut-off (first entry: target nobody)."""
    s, y = _prep(scores, labels)
    f0, f1, pi0, pi1 = _cutoffs(s, y)
    slope, offset = _lines(f0, f1, pi0, pi1, params)
    return slope * gamma + offset, pi0 * f0 + pi1 * f1


def mp(scores, labels, params: EmpParams | None = None) -> tuple[float, float]:
    """Maximum profit over cut-offs and the targeted fraction that attains it.

    Among equally profitable cut-offs the smallest targeted fraction wins.
    """
    params = params or EmpParams()
    profit, eta = profit_curve(scores, labels, params, params.gamma_point)
    k = int(np.argmax(profit))
    return float(max(profit[k], 0.0)), float(eta[k]) if profit[k] > 0 else 0.0


def _envelope(slope, offset):
    """Upper envelope of lines on gamma in [0, 1].

    Returns breakpoints ``g[0]=0 < ... < g[m]=1`` and the index of the line
    that is maximal on each piece.
    """
    # sort by slope, keep the best offset for equal slopes
    order = np.lexsort((-offset, slope))
    sl, of, idx = slope[order], offset[order], order
    keep = np.r_[True, sl[1:] != sl[:-1]]
    sl, of, idx = sl[keep], of[keep], idx[keep]
    hull: list[int] = []
    for i in range(sl.size):
        while len(hull) >= 2:
            k, j = hull[-2], hull[-1]
            # j is useless if i overtakes k no later than j does
            x_ki = (of[k] - of[i]) / (sl[i] - sl[k])
            x_kj = (of[k] - of[j]) / (sl[j] - sl[k])
            if x_ki > x_kj:
                break
            hull.pop()
        hull.append(i)
    # restrict to [0, 1]
    pieces: list[tuple[float, int]] = []
    start = 0.0
    for pos, i in enumerate(hull):
        end = 1.0
        if pos + 1 < len(hull):
            j = hull[pos + 1]
            end = (of[i] - of[j]) / (sl[j] - sl[i])
        lo, hi = max(start, 0.0), min(end, 1.0)
        if hi > lo or (not pieces and pos == len(hull) - 1):
            pieces.append((lo, int(idx[i])))
        start = max(start, end)
        if start >= 1.0:
            break
    if not pieces:
        pieces.append((0.0, int(idx[hull[-1]])))
    g = np.array([p[0] for p in pieces] + [1.0])
    return g, np.array([p[1] for p in pieces])


def emp(scores, labels, params: EmpParams | None = None) -> tuple[float, float]:
    """Expected maximum profit over ``gamma ~ Beta(alpha, beta)`` and the expected targeted fraction."""
    params = params or EmpParams()
    s, y = _prep(scores, labels)
    f0, f1, pi0, pi1 = _cutoffs(s, y)
    slope, offset = _lines(f0, f1, pi0, pi1, params)
    eta = pi0 * f0 + pi1 * f1
    g, best = _envelope(slope, offset)
    a, b = params.alpha, params.beta
    cdf = special.betainc(a, b, g)
    # E[gamma; gamma <= x] = a/(a+b) * I_x(a+1, b)
    pcdf = a / (a + b) * special.betainc(a + 1, b, g)
    mass = np.diff(cdf)
    first_moment = np.diff(pcdf)
    value = float(np.sum(slope[best] * first_moment + offset[best] * mass))
    frac = float(np.sum(eta[best] * mass))
    return max(value, 0.0), frac


def emp_integrand(scores, labels, params: EmpParams, gamma: float) -> float:
    """Optimal profit at a fixed acceptance rate ``gamma`` (the envelope height)."""
    profit, _ = profit_curve(scores, labels, params, gamma)
    return float(max(profit.max(), 0.0))


PRESET_METRICS = ("lift@0.005", "lift@0.05", "auc", "emp")


def evaluate(metric: str, scores, labels, params: EmpParams | None = None) -> float:
    """Evaluate a metric by name: ``auc``, ``emp``, ``mp`` or ``lift@<fraction>``."""
    if metric == "auc":
        return auc(scores, labels)
    if metric == "emp":
        return emp(scores, labels, params)[0]
    if metric == "mp":
        return mp(scores, labels, params)[0]
    if metric.startswith("lift@"):
        return lift(scores, labels, float(metric[5:]))
    raise ConfigError(f"unknown metric {metric!r}")
