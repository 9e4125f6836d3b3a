"""Affinity propagation clustering by responsibility/availability messages.

Preferences default to the median similarity; a deterministic speck of noise
breaks degeneracies so duplicate points settle on a single exemplar. If the
exemplar set is not stable for 15 consecutive iterations within the budget,
the best-so-far assignment is returned with `converged` unset.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_ITER = 500
STABLE_ITERS = 15


@dataclass
class ClusterAssignment:
    exemplar_of: np.ndarray   # sample index of each sample's exemplar
    exemplars: np.ndarray     # sorted unique exemplar sample indices
    labels: np.ndarray        # cluster id = position of exemplar in `exemplars`
    damping: float
    converged: bool

    @property
    def n_clusters(self) -> int:
        return len(self.exemplars)


def negative_squared_distances(X: np.ndarray) -> np.ndarray:
    diff = X[:, None, :] - X[None, :, :]
    return -np.sum(diff * diff, axis=2)


def affinity_propagation(
    similarity: np.ndarray,
    damping: float = 0.8,
    preference: float | None = None,
    seed: int = 0,
) -> ClusterAssignment:
    S = np.array(similarity, dtype=float)
    n = S.shape[0]
    if S.shape != (n, n):
        raise ValueError("similarity matrix must be square")
    if not np.allclose(S, S.T, rtol=1e-8, atol=1e-10):
        raise ValueError("similarity matrix must be symmetric")
    if not (0.5 <= damping < 1.0):
        raise ValueError("damping must lie in [0.5, 1)")
    if n == 1:
        return ClusterAssignment(
            np.zeros(1, dtype=int), np.zeros(1, dtype=int), np.zeros(1, dtype=int),
            damping, True,
        )

    if preference is None:
        # a hair below the median so an all-equal similarity matrix (duplicate
        # points) collapses onto one exemplar instead of n self-exemplars
        span = float(S.max() - S.min())
        preference = float(np.median(S)) - (1e-12 + 1e-9 * span)
    S.flat[:: n + 1] = preference
    rng = np.random.default_rng(seed)
    scale = np.finfo(float).eps * np.abs(S) + np.finfo(float).tiny * 100
    S = S + scale * rng.standard_normal((n, n))

    R = np.zeros((n, n))
    A = np.zeros((n, n))
    idx = np.arange(n)
    stable = 0
    last = None
    for _ in range(MAX_ITER):
        # responsibilities
        AS = A + S
        first = AS.argmax(axis=1)
        y1 = AS[idx, first]
        AS[idx, first] = -np.inf
        y2 = AS.max(axis=1)
        Rnew = S - y1[:, None]
        Rnew[idx, first] = S[idx, first] - y2
        R = damping * R + (1.0 - damping) * Rnew
        # availabilities
        Rp = np.maximum(R, 0.0)
        Rp.flat[:: n + 1] = R.flat[:: n + 1]
        col = Rp.sum(axis=0)
        Anew = col[None, :] - Rp
        diag = Anew.flat[:: n + 1].copy()
        Anew = np.minimum(Anew, 0.0)
        Anew.flat[:: n + 1] = diag
        A = damping * A + (1.0 - damping) * Anew

        exemplars = np.nonzero(np.diag(A + R) > 0)[0]
        key = exemplars.tobytes()
        if last is not None and key == last and len(exemplars) > 0:
            stable += 1
            if stable >= STABLE_ITERS:
                return _assign(S, exemplars, damping, converged=True)
        else:
            stable = 0
        last = key

    exemplars = np.nonzero(np.diag(A + R) > 0)[0]
    if len(exemplars) == 0:
        exemplars = np.array([int(np.argmax(np.diag(A + R)))])
    return _assign(S, exemplars, damping, converged=False)


def _assign(S, exemplars, damping, converged):
    n = S.shape[0]
    choice = np.argmax(S[:, exemplars], axis=1)
    exemplar_of = exemplars[choice]
    exemplar_of[exemplars] = exemplars
    # re-shrink: drop exemplars nobody (except themselves) kept, if any lost all members
    used = np.unique(exemplar_of)
    labels = np.searchsorted(used, exemplar_of)
    return ClusterAssignment(exemplar_of, used, labels, damping, converged)


def nearest_exemplar(
    vector: np.ndarray, assignment: ClusterAssignment, training_vectors: np.ndarray
) -> int:
    """Cluster id of the closest exemplar by Euclidean distance; ties go to
    the lower-indexed exemplar."""
    ex = assignment.exemplars
    d = np.linalg.norm(training_vectors[ex] - np.asarray(vector, dtype=float), axis=1)
    return int(np.argmin(d))
