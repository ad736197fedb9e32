"""Relational classifiers and collective inference on call graphs.

Relational classifiers (RC) map a vector of neighbour churn probabilities to
new per-node churn scores:

* ``wvrn``  - weighted vote relational neighbour
* ``cdrn``  - class-distribution relational neighbour (cosine to reference vectors)
* ``nlb``   - network-only link-based (logistic on count-link)
* ``sparc`` - spreading-activation relational classifier

Collective inference (CI) methods apply an RC repeatedly: ``no`` (one pass),
``gibbs``, ``ic``, ``rl``, ``rlsa`` and ``spa``. Every sweep is simultaneous:
all nodes are rescored from the previous sweep's vector.

A relational learner is named ``"<ci>-<rc>"``, e.g. ``gibbs-nlb``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import sparse
from scipy.special import expit

from .exceptions import ConfigError, FittingError, PretrainingError
from .graph import CallGraph
from .logistic import irls
from .states import ScoreState, as_score_vector

log = logging.getLogger(__name__)

RC_NAMES = ("wvrn", "cdrn", "nlb", "sparc")
CI_NAMES = ("no", "gibbs", "ic", "rl", "rlsa", "spa")
MAX_ITER = {"no": 1, "gibbs": 2000, "ic": 1000, "rl": 100, "rlsa": 100, "spa": 100}
ALL_LEARNERS = tuple(f"{ci}-{rc}" for ci in CI_NAMES for rc in RC_NAMES)


def parse_learner(learner_id: str) -> tuple[str, str]:
    try:
        ci, rc = learner_id.lower().split("-", 1)
    except ValueError:
        raise ConfigError(f"learner id must look like 'ci-rc', got {learner_id!r}") from None
    if ci not in CI_NAMES:
        raise ConfigError(f"unknown collective inference method {ci!r}")
    if rc not in RC_NAMES:
        raise ConfigError(f"unknown relational classifier {rc!r}")
    return ci, rc


def _offdiag(w: sparse.spmatrix) -> sparse.csr_matrix:
    w = sparse.csr_matrix(w, dtype=float, copy=True)
    w.setdiag(0)
    w.eliminate_zeros()
    return w


def _row_normalized(w: sparse.csr_matrix) -> tuple[sparse.csr_matrix, np.ndarray]:
    z = np.asarray(w.sum(axis=1)).ravel()
    inv = np.zeros_like(z)
    np.divide(1.0, z, out=inv, where=z > 0)
    return sparse.diags(inv) @ w, z > 0


def class_vectors(graph: CallGraph, state, normalized: bool = False) -> np.ndarray:
    """Per-node ``(CV_0, CV_1)``: weighted neighbour mass of non-churn and churn.

    With ``normalized=True`` the rows sum to one (count-link); isolated nodes
    get ``(0, 0)`` either way.
    """
    p = as_score_vector(state, graph.n)
    w = _offdiag(graph.weights)
    cv1 = w @ p
    cv0 = w @ (1.0 - p)
    cv = np.column_stack([cv0, cv1])
    if normalized:
        z = cv.sum(axis=1)
        np.divide(cv, z[:, None], out=cv, where=z[:, None] > 0)
    return cv


# --- relational classifiers ---------------------------------------------------

class RelationalClassifier:
    """An RC bound to one graph. Calling it rescores every node from ``p``."""

    name = ""

    def __init__(self, graph: CallGraph, prior: float):
        self.graph = graph
        self.prior = float(prior)
        self.w = _offdiag(graph.weights)

    def __call__(self, p: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class WVRN(RelationalClassifier):
    name = "wvrn"

    def __init__(self, graph, prior):
        super().__init__(graph, prior)
        self.p_matrix, self.has_nbrs = _row_normalized(self.w)

    def __call__(self, p):
        out = self.p_matrix @ p
        out[~self.has_nbrs] = self.prior
        return out


@dataclass(frozen=True)
class ReferenceVector:
    """Mean normalised class vectors ``(CV_0, CV_1)`` of churners and non-churners."""

    churn: np.ndarray
    nonchurn: np.ndarray


class CDRN(RelationalClassifier):
    """Cosine similarity of the class vector to each reference vector, normalised over classes."""

    name = "cdrn"

    def __init__(self, graph, prior, rv: ReferenceVector):
        super().__init__(graph, prior)
        self.rv1 = np.asarray(rv.churn, dtype=float)
        self.rv0 = np.asarray(rv.nonchurn, dtype=float)

    def __call__(self, p):
        cv1 = self.w @ p
        cv0 = self.w @ (1.0 - p)
        norm = np.hypot(cv0, cv1)
        sim1 = _cosine(cv0, cv1, norm, self.rv1)
        sim0 = _cosine(cv0, cv1, norm, self.rv0)
        tot = sim0 + sim1
        out = np.full(p.shape, self.prior)
        np.divide(sim1, tot, out=out, where=tot > 0)
        return out


def _cosine(cv0, cv1, norm, rv):
    rn = float(np.hypot(rv[0], rv[1]))
    out = np.zeros_like(norm)
    if rn == 0:
        return out
    np.divide(cv0 * rv[0] + cv1 * rv[1], norm * rn, out=out, where=norm > 0)
    return out


@dataclass(frozen=True)
class NlbModel:
    beta0: float
    beta1: float
    converged: bool = True


class NLB(RelationalClassifier):
    name = "nlb"

    def __init__(self, graph, prior, model: NlbModel):
        super().__init__(graph, prior)
        self.p_matrix, _ = _row_normalized(self.w)
        self.model = model

    def __call__(self, p):
        return expit(self.model.beta0 + self.model.beta1 * (self.p_matrix @ p))


class SPARC(RelationalClassifier):
    """Neighbour scores weighted by ``w_ij / strength_j`` and damped by ``d``."""

    name = "sparc"

    def __init__(self, graph, prior, d: float = 0.85):
        super().__init__(graph, prior)
        if not 0 < d < 1:
            raise ConfigError("diffusion d must lie in (0, 1)")
        self.d = d
        strength = np.asarray(self.w.sum(axis=1)).ravel()
        inv = np.zeros_like(strength)
        np.divide(1.0, strength, out=inv, where=strength > 0)
        self.r = (self.w @ sparse.diags(inv)).tocsr()
        self.z = np.asarray(self.r.sum(axis=1)).ravel()

    def __call__(self, p):
        num = self.r @ p
        out = np.full(p.shape, self.prior)
        np.divide(self.d * num, self.z, out=out, where=self.z > 0)
        return out


def _prior(state) -> float:
    p = as_score_vector(state)
    return float(p.mean()) if p.size else 0.0


def _wrap(graph, scores, learner, n_iter=1, converged=True) -> ScoreState:
    return ScoreState(graph.customers, np.clip(scores, 0.0, 1.0), learner, n_iter, converged)


def wvrn(graph: CallGraph, state, prior: float | None = None) -> ScoreState:
    """Weighted average of neighbour churn probabilities; isolated nodes get the prior."""
    p = as_score_vector(state, graph.n)
    rc = WVRN(graph, _prior(p) if prior is None else prior)
    return _wrap(graph, rc(p), "no-wvrn")


def cdrn_pretrain(graph: CallGraph, state, target, population=None) -> ReferenceVector:
    """Reference vectors from the previous timeframe.

    Class vectors are computed on ``graph`` (time t-1) from the labels known
    then (``state``) and averaged per class of ``target`` (labels at time t).
    Isolated nodes have no class vector and are skipped.
    """
    cv = class_vectors(graph, state, normalized=True)
    y = np.asarray(as_score_vector(target, graph.n)) > 0.5
    keep = cv.sum(axis=1) > 0
    if population is not None:
        keep &= np.asarray(population, dtype=bool)
    if not (keep & y).any():
        raise PretrainingError("no churners with a class vector in the pre-training labels")
    if not (keep & ~y).any():
        raise PretrainingError("no non-churners with a class vector in the pre-training labels")
    return ReferenceVector(churn=cv[keep & y].mean(axis=0), nonchurn=cv[keep & ~y].mean(axis=0))


def cdrn(graph: CallGraph, state, rv: ReferenceVector, prior: float | None = None) -> ScoreState:
    p = as_score_vector(state, graph.n)
    rc = CDRN(graph, _prior(p) if prior is None else prior, rv)
    return _wrap(graph, rc(p), "no-cdrn")


def nlb_pretrain(graph: CallGraph, state, target, population=None, l2: float = 1e-4, bound: float = 50.0) -> NlbModel:
    """Fit ``P(churn) = logistic(b0 + b1 * count_link_churn)`` on the previous timeframe.

    Count-link features come from ``graph``/``state`` at t-1, targets from
    labels at t. Coefficients are clipped to ``[-bound, bound]`` so perfectly
    separated data stays usable.
    """
    x = class_vectors(graph, state, normalized=True)[:, 1]
    y = as_score_vector(target, graph.n)
    if population is not None:
        keep = np.asarray(population, dtype=bool)
        x, y = x[keep], y[keep]
    if y.size == 0 or y.min() == y.max():
        raise FittingError("NLB pre-training needs both classes in the target labels")
    fit = irls(x[:, None], y, l2=l2)
    if not fit.converged:
        log.warning("NLB logistic fit did not converge in %d iterations", fit.n_iter)
    b0 = float(np.clip(fit.intercept, -bound, bound))
    b1 = float(np.clip(fit.coef[0], -bound, bound))
    return NlbModel(b0, b1, fit.converged)


def nlb(graph: CallGraph, state, model: NlbModel) -> ScoreState:
    p = as_score_vector(state, graph.n)
    return _wrap(graph, NLB(graph, _prior(p), model)(p), "no-nlb")


def spa_rc(graph: CallGraph, state, d: float = 0.85, prior: float | None = None) -> ScoreState:
    p = as_score_vector(state, graph.n)
    rc = SPARC(graph, _prior(p) if prior is None else prior, d)
    return _wrap(graph, rc(p), "no-sparc")


# --- collective inference -----------------------------------------------------

@dataclass
class CiConfig:
    method: str = "no"
    burn_in: int = 200
    max_iter: int | None = None
    threshold: float = 1e-4
    k: float = 1.0
    alpha: float = 0.99
    d: float = 0.85
    seed: int = 0

    def __post_init__(self):
        if self.method not in CI_NAMES:
            raise ConfigError(f"unknown collective inference method {self.method!r}")
        if self.burn_in < 0:
            raise ConfigError("burn_in must be >= 0")
        if not 0 < self.k <= 1:
            raise ConfigError("k must lie in (0, 1]")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if not 0 < self.d < 1:
            raise ConfigError("d must lie in (0, 1)")
        if not self.threshold > 0:
            raise ConfigError("threshold must be positive")

    @property
    def cap(self) -> int:
        return MAX_ITER[self.method] if self.max_iter is None else int(self.max_iter)


Trace = Callable[[int, np.ndarray], None]


def _gibbs(rc, v, cfg, rng, threshold, cap, trace):
    n = v.size
    for _ in range(cfg.burn_in):
        v = (rng.random(n) < rc(v)).astype(float)
    acc = np.zeros(n)
    for j in range(1, cap + 1):
        s = (rng.random(n) < rc(v)).astype(float)
        v = s
        acc += s
        if trace is not None:
            trace(j, acc / j)
        if j > 1 and abs(acc.sum() / j - (acc - s).sum() / (j - 1)) / n < threshold:
            return acc / j, j, True
    return acc / cap, cap, False


def _ic(rc, v, cfg, rng, threshold, cap, trace):
    v = (v > 0.5).astype(float)
    for j in range(1, cap + 1):
        lab = (rc(v) > 0.5).astype(float)
        if trace is not None:
            trace(j, lab)
        if not lab.any() or np.max(np.abs(v - lab)) <= threshold:
            return lab, j, True
        v = lab
    return v, cap, False


def _rl(rc, v, cfg, rng, threshold, cap, trace):
    for j in range(1, cap + 1):
        c = rc(v)
        if trace is not None:
            trace(j, c)
        if np.max(np.abs(c - v)) <= threshold:
            return c, j, True
        v = c
    return v, cap, False


def _rlsa(rc, v, cfg, rng, threshold, cap, trace):
    beta = cfg.k
    chat = v
    for j in range(1, cap + 1):
        chat = beta * rc(v) + (1.0 - beta) * chat
        if trace is not None:
            trace(j, chat)
        if np.max(np.abs(v - chat)) <= threshold:
            return chat, j, True
        v = chat
        beta *= cfg.alpha
    return v, cap, False


def _spa(rc, v, cfg, rng, threshold, cap, trace):
    for j in range(1, cap + 1):
        c = rc(v)
        if trace is not None:
            trace(j, c)
        changing = np.max(np.abs(c - v)) > threshold
        growing = np.count_nonzero(c > 0) > np.count_nonzero(v > 0)
        v = c
        if not (changing or growing):
            return v, j, True
    return v, cap, False


_CI = {"gibbs": _gibbs, "ic": _ic, "rl": _rl, "rlsa": _rlsa, "spa": _spa}


def run_ci(rc: RelationalClassifier, graph: CallGraph, init, cfg: CiConfig, rng=None) -> ScoreState:
    """Run collective inference from the known labels ``init``.

    Every node is (re)scored; known labels only seed the first sweep.
    ``rng`` (or ``cfg.seed``) drives Gibbs sampling.
    """
    v = as_score_vector(init, graph.n).copy()
    learner = f"{cfg.method}-{rc.name}"
    if cfg.method == "no":
        return _wrap(graph, rc(v), learner)
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    scores, n_iter, stopped = _CI[cfg.method](rc, v, cfg, rng, cfg.threshold, cfg.cap, None)
    return _wrap(graph, scores, learner, n_iter, stopped)


def sensitivity_trace(rc: RelationalClassifier, ci: CiConfig, graph: CallGraph, init, sweeps: int, rng=None) -> np.ndarray:
    """Variance of the score vector after each of ``sweeps`` sweeps (no early stopping).

    For Gibbs the traced vector is the running mean after burn-in.
    """
    v = as_score_vector(init, graph.n).copy()
    out: list[float] = []
    if ci.method == "no":
        c = rc(v)
        return np.full(sweeps, float(np.var(c)))
    rng = np.random.default_rng(ci.seed) if rng is None else rng
    _CI[ci.method](rc, v, ci, rng, -np.inf, sweeps, lambda j, s: out.append(float(np.var(s))))
    # IC may still stop early once every label is 0; the vector is fixed from then on
    out += out[-1:] * (sweeps - len(out))
    return np.asarray(out)


# --- learner factory ----------------------------------------------------------

@dataclass
class Pretraining:
    """Previous-timeframe inputs that CDRN and NLB learn from."""

    graph: CallGraph
    state: object
    target: object
    population: np.ndarray | None = None


def make_classifier(rc_name: str, graph: CallGraph, init, pretrain: Pretraining | None = None, d: float = 0.85) -> RelationalClassifier:
    prior = _prior(as_score_vector(init, graph.n))
    if rc_name == "wvrn":
        return WVRN(graph, prior)
    if rc_name == "sparc":
        return SPARC(graph, prior, d)
    if pretrain is None:
        raise PretrainingError(f"{rc_name} needs a pre-training timeframe")
    if rc_name == "cdrn":
        rv = cdrn_pretrain(pretrain.graph, pretrain.state, pretrain.target, pretrain.population)
        return CDRN(graph, prior, rv)
    if rc_name == "nlb":
        model = nlb_pretrain(pretrain.graph, pretrain.state, pretrain.target, pretrain.population)
        return NLB(graph, prior, model)
    raise ConfigError(f"unknown relational classifier {rc_name!r}")


def run_learner(learner_id: str, graph: CallGraph, init, pretrain: Pretraining | None = None,
                cfg: CiConfig | None = None, rc: RelationalClassifier | None = None) -> ScoreState:
    """Score every node of ``graph`` with relational learner ``learner_id``."""
    ci, rc_name = parse_learner(learner_id)
    base = cfg or CiConfig()
    cfg = CiConfig(method=ci, burn_in=base.burn_in, max_iter=base.max_iter if ci == base.method else None,
                   threshold=base.threshold, k=base.k, alpha=base.alpha, d=base.d, seed=base.seed)
    if rc is None:
        rc = make_classifier(rc_name, graph, init, pretrain, cfg.d)
    return run_ci(rc, graph, init, cfg)
