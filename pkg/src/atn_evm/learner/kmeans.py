"""k-means (Lloyd) with distance-weighted seeding."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import TooFewRows
from .scaling import Scaler


@dataclass(eq=False)
class ClusterModel:
    k: int
    centroids: np.ndarray          # k x d, scaled coordinates
    assignments: np.ndarray        # row -> cluster
    inertia: float
    scaler: Scaler | None = None
    inertia_trace: list[float] = field(default_factory=list)
    iterations: int = 0

    def assign(self, X_scaled) -> np.ndarray:
        return nearest(np.asarray(X_scaled, dtype=float), self.centroids)


def sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


def nearest(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    # argmin returns the first minimum, so ties go to the lower cluster index
    return np.argmin(sq_dists(X, C), axis=1)


def _seed_centroids(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(X)
    chosen = [int(rng.integers(n))]
    d2 = ((X - X[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = next((i for i in range(n) if i not in chosen), 0)
        chosen.append(idx)
        d2 = np.minimum(d2, ((X - X[idx]) ** 2).sum(axis=1))
    return X[chosen].copy()


def _inertia(X, C, labels) -> float:
    return float(((X - C[labels]) ** 2).sum())


def _repair_empty(X, labels, k):
    """Give each empty cluster the point farthest from the mean of the largest cluster."""
    labels = labels.copy()
    for c in range(k):
        if np.any(labels == c):
            continue
        big = int(np.argmax(np.bincount(labels, minlength=k)))
        members = np.flatnonzero(labels == big)
        centre = X[members].mean(axis=0)
        labels[members[int(np.argmax(((X[members] - centre) ** 2).sum(axis=1)))]] = c
    return labels


def _means(X, labels, k):
    return np.array([X[labels == c].mean(axis=0) for c in range(k)])


def kmeans(X, k: int, seed: int = 0, max_iter: int = 300):
    """Returns ``(centroids, labels, inertia_trace, iterations)``."""
    X = np.asarray(X, dtype=float)
    n = len(X)
    if k < 1 or n < k:
        raise TooFewRows(f"k-means with k={k} needs at least {k} rows, got {n}")
    rng = np.random.default_rng(seed)
    labels = _repair_empty(X, nearest(X, _seed_centroids(X, k, rng)), k)
    trace = []
    it = 0
    for it in range(1, max_iter + 1):
        C = _means(X, labels, k)
        trace.append(_inertia(X, C, labels))
        new = _repair_empty(X, nearest(X, C), k)
        if np.array_equal(new, labels):
            break
        labels = new
    else:
        # out of iterations: report the last assignment with its own means
        C = _means(X, labels, k)
        trace.append(_inertia(X, C, labels))
    return C, labels, trace, it


def fit_clusters(rows, k: int = 10, seed: int = 0, max_iter: int = 300) -> ClusterModel:
    """Min-max scale the parameter rows, then run k-means in the scaled space."""
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or len(rows) < k:
        raise TooFewRows(f"need at least k={k} rows, got {len(rows)}")
    scaler = Scaler.fit(rows)
    X = scaler.transform(rows)
    C, labels, trace, it = kmeans(X, k, seed, max_iter)
    return ClusterModel(k, C, labels, trace[-1], scaler, trace, it)
