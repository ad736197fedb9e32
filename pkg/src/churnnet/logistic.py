"""L2-penalised logistic regression fitted by Newton / IRLS with step halving."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit


@dataclass
class LogitFit:
    coef: np.ndarray
    intercept: float
    converged: bool
    n_iter: int


def penalized_nll(w: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float) -> float:
    """Negative log-likelihood plus ``l2/2 * ||coef||^2``; ``w[0]`` is the unpenalised intercept."""
    z = w[0] + X @ w[1:]
    # log(1 + e^z) - y z, computed stably
    return float(np.sum(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * w[1:] @ w[1:])


def irls(X: np.ndarray, y: np.ndarray, l2: float = 1e-4, max_iter: int = 100, tol: float = 1e-10) -> LogitFit:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    Xa = np.hstack([np.ones((n, 1)), X])
    pen = np.full(p + 1, l2)
    pen[0] = 0.0
    ybar = np.clip(y.mean(), 1e-12, 1 - 1e-12)
    w = np.zeros(p + 1)
    w[0] = np.log(ybar / (1 - ybar))
    f = penalized_nll(w, X, y, l2)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        mu = expit(Xa @ w)
        grad = Xa.T @ (mu - y) + pen * w
        h = Xa.T @ (Xa * (mu * (1 - mu))[:, None]) + np.diag(pen)
        h[np.diag_indices_from(h)] += 1e-12
        try:
            step = np.linalg.solve(h, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(h, grad, rcond=None)[0]
        t = 1.0
        while True:
            w_new = w - t * step
            f_new = penalized_nll(w_new, X, y, l2)
            if f_new <= f + 1e-4 * t * -(grad @ step) or t < 1e-10:
                break
            t *= 0.5
        delta = np.max(np.abs(w_new - w))
        w, f = w_new, f_new
        if delta < tol or np.max(np.abs(grad)) < tol:
            converged = True
            break
    return LogitFit(coef=w[1:], intercept=float(w[0]), converged=converged, n_iter=it)
