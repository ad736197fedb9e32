"""Rank-based comparison of methods over datasets: Friedman, Nemenyi, Kruskal-Wallis.

A performance table has one row per dataset (or score set) and one column
per method.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special, stats

from .exceptions import ConfigError, RangeError

# Studentized range quantiles q(alpha; k, inf) / sqrt(2) for k = 2..30.
_Q = {
    0.05: (1.959964, 2.343701, 2.569032, 2.727774, 2.849705, 2.94832, 3.030878, 3.10173,
           3.163684, 3.218654, 3.268004, 3.312739, 3.353618, 3.39123, 3.426041, 3.458425,
           3.488685, 3.517073, 3.543799, 3.56904, 3.592946, 3.615646, 3.637252, 3.657861,
           3.677556, 3.696413, 3.714498, 3.731869, 3.748578),
    0.10: (1.644854, 2.052293, 2.291341, 2.459516, 2.588521, 2.692732, 2.779884, 2.854606,
           2.919889, 2.977768, 3.029694, 3.076733, 3.119693, 3.159199, 3.195743, 3.229723,
           3.261461, 3.291224, 3.319233, 3.345676, 3.370712, 3.394477, 3.417089, 3.438651,
           3.459253, 3.478971, 3.497878, 3.516033, 3.533492),
}
MAX_K = 30


def nemenyi_q(k: int, alpha: float = 0.05) -> float:
    if alpha not in _Q:
        raise ConfigError(f"no Nemenyi table for alpha={alpha}; available: {sorted(_Q)}")
    if not 2 <= k <= MAX_K:
        raise RangeError(f"Nemenyi table covers 2..{MAX_K} methods, got {k}")
    return _Q[alpha][k - 2]


def chi2_sf(x: float, df: float) -> float:
    """Upper tail of the chi-square distribution via the regularized incomplete gamma."""
    if x <= 0:
        return 1.0
    return float(special.gammaincc(df / 2.0, x / 2.0))


@dataclass(frozen=True, eq=False)
class RankMatrix:
    """Performance values (datasets x methods) and their within-row ranks (1 = best)."""

    methods: tuple[str, ...]
    datasets: tuple[str, ...]
    values: np.ndarray
    higher_is_better: bool = True

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape != (len(self.datasets), len(self.methods)):
            raise ConfigError("values must be a datasets x methods matrix")
        if np.isnan(v).any():
            raise ConfigError("performance table has missing cells")

    @classmethod
    def from_array(cls, values, methods=None, datasets=None, higher_is_better=True) -> "RankMatrix":
        v = np.asarray(values, dtype=float)
        if v.ndim != 2:
            raise ConfigError("values must be two-dimensional")
        methods = tuple(methods) if methods is not None else tuple(f"m{j}" for j in range(v.shape[1]))
        datasets = tuple(datasets) if datasets is not None else tuple(f"d{i}" for i in range(v.shape[0]))
        return cls(methods, datasets, v, higher_is_better)

    @property
    def k(self) -> int:
        return len(self.methods)

    @property
    def n(self) -> int:
        return len(self.datasets)

    @property
    def ranks(self) -> np.ndarray:
        v = np.asarray(self.values, dtype=float)
        return stats.rankdata(-v if self.higher_is_better else v, axis=1)

    @property
    def average_ranks(self) -> np.ndarray:
        return self.ranks.mean(axis=0)


def average_ranks(values, higher_is_better: bool = True) -> np.ndarray:
    """Per-row ranks (ties share the mean rank) averaged over rows."""
    v = np.asarray(values, dtype=float)
    if v.ndim == 1:
        v = v[None, :]
    if np.isnan(v).any():
        raise ConfigError("performance table has missing cells")
    return RankMatrix.from_array(v, higher_is_better=higher_is_better).average_ranks


def _as_matrix(m) -> RankMatrix:
    return m if isinstance(m, RankMatrix) else RankMatrix.from_array(m)


@dataclass(frozen=True)
class StatResult:
    statistic: float
    pvalue: float


def friedman(matrix, iman_davenport: bool = False) -> StatResult:
    """Friedman chi-square on average ranks; optionally the Iman-Davenport F variant.

    ``chi2_F = 12N / (k(k+1)) * (sum_j R_j^2 - k(k+1)^2 / 4)`` with ``k - 1``
    degrees of freedom. Iman-Davenport: ``F = (N-1) chi2 / (N(k-1) - chi2)``
    on ``(k-1, (k-1)(N-1))`` degrees of freedom.
    """
    m = _as_matrix(matrix)
    k, n = m.k, m.n
    if k < 2 or n < 2:
        raise ConfigError("Friedman test needs at least two methods and two datasets")
    r = m.average_ranks
    chi2 = 12.0 * n / (k * (k + 1)) * (float(np.sum(r * r)) - k * (k + 1) ** 2 / 4.0)
    chi2 = max(chi2, 0.0)
    if not iman_davenport:
        return StatResult(chi2, chi2_sf(chi2, k - 1))
    denom = n * (k - 1) - chi2
    if denom <= 0:
        return StatResult(float("inf"), 0.0)
    f = (n - 1) * chi2 / denom
    return StatResult(f, float(stats.f.sf(f, k - 1, (k - 1) * (n - 1))))


@dataclass(frozen=True, eq=False)
class NemenyiResult:
    cd: float
    average_ranks: np.ndarray
    significant: np.ndarray  # k x k boolean, symmetric

    def pairs(self, methods: Sequence[str]) -> list[tuple[str, str]]:
        i, j = np.nonzero(np.triu(self.significant, 1))
        return [(methods[a], methods[b]) for a, b in zip(i.tolist(), j.tolist())]


def critical_difference(k: int, n: int, alpha: float = 0.05) -> float:
    return nemenyi_q(k, alpha) * float(np.sqrt(k * (k + 1) / (6.0 * n)))


def nemenyi(matrix, alpha: float = 0.05) -> NemenyiResult:
    """Critical difference and pairwise flags ``|R_i - R_j| > CD``."""
    m = _as_matrix(matrix)
    cd = critical_difference(m.k, m.n, alpha)
    r = m.average_ranks
    sig = np.abs(r[:, None] - r[None, :]) > cd
    return NemenyiResult(cd, r, sig)


def kruskal_wallis(groups: Sequence[Sequence[float]]) -> StatResult:
    """H statistic with tie correction; all-identical values give ``(0, 1)``."""
    groups = [np.asarray(g, dtype=float).ravel() for g in groups]
    if len(groups) < 2 or any(g.size == 0 for g in groups):
        raise ConfigError("Kruskal-Wallis needs at least two non-empty groups")
    allv = np.concatenate(groups)
    n = allv.size
    r = stats.rankdata(allv)
    _, counts = np.unique(allv, return_counts=True)
    ties = 1.0 - float(np.sum(counts ** 3 - counts)) / (n ** 3 - n)
    if ties <= 0:
        return StatResult(0.0, 1.0)
    h = 0.0
    pos = 0
    for g in groups:
        rs = r[pos:pos + g.size].sum()
        h += rs * rs / g.size
        pos += g.size
    h = (12.0 / (n * (n + 1)) * h - 3.0 * (n + 1)) / ties
    h = max(h, 0.0)
    return StatResult(h, chi2_sf(h, len(groups) - 1))


def rank_diagram(matrix: RankMatrix, alpha: float = 0.05) -> dict:
    """JSON-ready data for a critical-difference diagram."""
    nm = nemenyi(matrix, alpha)
    fr = friedman(matrix)
    order = np.argsort(nm.average_ranks, kind="stable")
    return {
        "methods": [matrix.methods[i] for i in order],
        "average_ranks": [float(nm.average_ranks[i]) for i in order],
        "cd": nm.cd,
        "alpha": alpha,
        "n_datasets": matrix.n,
        "friedman": {"statistic": fr.statistic, "pvalue": fr.pvalue},
        "significant_pairs": [list(p) for p in nm.pairs(matrix.methods)],
    }


def dump_rank_diagram(matrix: RankMatrix, fh, alpha: float = 0.05) -> None:
    json.dump(rank_diagram(matrix, alpha), fh, indent=1, sort_keys=True)
    fh.write("\n")
