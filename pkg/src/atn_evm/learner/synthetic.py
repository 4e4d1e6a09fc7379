"""Labelled environment sets with known cluster structure, for checking the classifier."""

from __future__ import annotations

import numpy as np

from ..scenario import ENV_DIM, N_PROBES

N_CONT = 3 + N_PROBES


def separable_env_set(n_clusters: int = 10, per_cluster: int = 50, spread: float = 0.02,
                      min_sep: float = 6.0, seed: int = 0):
    """Env rows in [0, 1]^7 x one-hot^4 with Gaussian clusters.

    Cluster centres are drawn until every pair is at least ``min_sep * spread``
    apart in the continuous coordinates; the OD one-hot is ``cluster % 4``.
    Returns ``(env_rows, labels, centres)``.
    """
    rng = np.random.default_rng(seed)
    centres = []
    while len(centres) < n_clusters:
        c = rng.uniform(0.1, 0.9, N_CONT)
        if all(np.linalg.norm(c - o) >= min_sep * spread for o in centres):
            centres.append(c)
    centres = np.array(centres)
    rows, labels = [], []
    for k, c in enumerate(centres):
        cont = c + spread * rng.standard_normal((per_cluster, N_CONT))
        onehot = np.zeros((per_cluster, ENV_DIM - N_CONT))
        onehot[:, k % (ENV_DIM - N_CONT)] = 1.0
        rows.append(np.hstack([cont, onehot]))
        labels += [k] * per_cluster
    return np.vstack(rows), np.array(labels), centres
