"""Fixed-effect absorption and cluster-robust covariance."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


def _codes(x) -> np.ndarray:
    return np.unique(np.asarray(x), return_inverse=True)[1].ravel()


class Absorber:
    """Alternating projections onto the complement of several group dummies.

    Each sweep subtracts group means for every dimension in turn; sweeps stop
    once no entry moves by more than ``tol``.
    """

    def __init__(self, *groups, tol: float = 1e-10, max_sweeps: int = 10_000):
        if not groups:
            raise ValueError("at least one fixed-effect dimension is required")
        self.tol = tol
        self.max_sweeps = max_sweeps
        self._ops = []
        n = None
        for g in groups:
            codes = _codes(g)
            n = codes.size if n is None else n
            if codes.size != n:
                raise ValueError("fixed-effect id arrays must have equal length")
            ind = sp.csr_matrix((np.ones(n), (np.arange(n), codes)))
            counts = np.asarray(ind.sum(axis=0)).ravel()
            self._ops.append((ind, counts))
        self.n_obs = n
        self.sweeps = 0

    def __call__(self, M: np.ndarray) -> np.ndarray:
        out = np.array(M, dtype=float, copy=True)
        squeeze = out.ndim == 1
        if squeeze:
            out = out[:, None]
        for sweep in range(1, self.max_sweeps + 1):
            before = out.copy()
            for ind, counts in self._ops:
                means = (ind.T @ out) / counts[:, None]
                out -= ind @ means
            if np.max(np.abs(out - before), initial=0.0) < self.tol:
                self.sweeps = sweep
                return out[:, 0] if squeeze else out
        raise RuntimeError(
            f"fixed-effect absorption did not converge in {self.max_sweeps} sweeps"
        )


def cluster_covariance(X: np.ndarray, resid: np.ndarray, clusters, bread=None) -> np.ndarray:
    """Sandwich covariance clustered on ``clusters``.

    Scaled by ``G/(G-1) * (N-1)/(N-K)`` with ``K`` the number of columns of
    ``X``.
    """
    X = np.asarray(X, dtype=float)
    N, K = X.shape
    codes = _codes(clusters)
    G = int(codes.max()) + 1
    if G < 2:
        raise ValueError("cluster-robust covariance needs at least two clusters")
    if bread is None:
        bread = np.linalg.inv(X.T @ X)
    scores = np.zeros((G, K))
    np.add.at(scores, codes, X * resid[:, None])
    meat = scores.T @ scores
    scale = G / (G - 1) * (N - 1) / max(N - K, 1)
    V = scale * bread @ meat @ bread
    return 0.5 * (V + V.T)
