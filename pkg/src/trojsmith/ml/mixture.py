"""Diagonal Gaussian mixture fitted by EM, used as a behavior sampler.

The component count is chosen by the Bayesian information criterion over
1..max_components. Variances are floored at 1e-6 and the per-iteration
log-likelihood is checked to be non-decreasing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import TooFewSamples

VARIANCE_FLOOR = 1e-6
_LL_TOL = 1e-7


@dataclass
class MixtureModel:
    weights: np.ndarray     # (k,)
    means: np.ndarray       # (k, d)
    variances: np.ndarray   # (k, d) diagonal
    log_likelihood: float

    @property
    def n_components(self) -> int:
        return len(self.weights)

    def to_json(self) -> dict:
        return {
            "weights": [float(v) for v in self.weights],
            "means": [[float(v) for v in row] for row in self.means],
            "variances": [[float(v) for v in row] for row in self.variances],
            "log_likelihood": float(self.log_likelihood),
        }

    @classmethod
    def from_json(cls, d: dict) -> "MixtureModel":
        return cls(
            np.array(d["weights"], dtype=float),
            np.array(d["means"], dtype=float),
            np.array(d["variances"], dtype=float),
            float(d["log_likelihood"]),
        )


def _log_prob(X, weights, means, variances):
    """(n, k) joint log density log w_k + log N(x | mu_k, diag var_k)."""
    n, d = X.shape
    diff = X[:, None, :] - means[None, :, :]
    quad = np.sum(diff * diff / variances[None, :, :], axis=2)
    logdet = np.sum(np.log(variances), axis=1)
    return np.log(weights)[None, :] - 0.5 * (quad + logdet + d * np.log(2 * np.pi))


def _em(X, k, rng, max_iter=200):
    n, d = X.shape
    # seed means from k distinct-ish samples, then iterate
    idx = rng.choice(n, size=min(k, n), replace=False)
    means = X[idx].astype(float).copy()
    if len(means) < k:
        means = np.vstack([means, means[rng.integers(0, len(means), k - len(means))]])
        means += rng.normal(scale=1e-3, size=means.shape)
    var0 = np.maximum(X.var(axis=0), VARIANCE_FLOOR)
    variances = np.tile(var0, (k, 1))
    weights = np.full(k, 1.0 / k)

    prev_ll = -np.inf
    for _ in range(max_iter):
        lp = _log_prob(X, weights, means, variances)
        mx = lp.max(axis=1, keepdims=True)
        lse = mx[:, 0] + np.log(np.exp(lp - mx).sum(axis=1))
        ll = float(lse.sum())
        if ll + _LL_TOL < prev_ll:
            raise AssertionError(f"EM log-likelihood decreased: {prev_ll} -> {ll}")
        resp = np.exp(lp - lse[:, None])
        if ll - prev_ll < 1e-8 and prev_ll > -np.inf:
            prev_ll = ll
            break
        prev_ll = ll
        nk = resp.sum(axis=0) + 1e-300
        weights = nk / n
        means = (resp.T @ X) / nk[:, None]
        diff = X[:, None, :] - means[None, :, :]
        variances = np.einsum("nk,nkd->kd", resp, diff * diff) / nk[:, None]
        variances = np.maximum(variances, VARIANCE_FLOOR)
    return weights, means, variances, prev_ll


def _bic(ll, k, n, d):
    n_params = (k - 1) + 2 * k * d
    return -2.0 * ll + n_params * np.log(n)


def fit_mixture(
    samples,
    max_components: int = 5,
    seed: int = 0,
    n_init: int = 4,
) -> MixtureModel:
    X = np.atleast_2d(np.asarray([getattr(s, "as_array", lambda s=s: s)() for s in samples], dtype=float))
    n, d = X.shape
    if n < 2:
        raise TooFewSamples("mixture fit needs at least 2 samples")
    best = None
    best_bic = np.inf
    root = np.random.default_rng(seed)
    for k in range(1, min(max_components, n) + 1):
        for _ in range(n_init if k > 1 else 1):
            rng = np.random.default_rng(root.integers(0, 2**63))
            weights, means, variances, ll = _em(X, k, rng)
            bic = _bic(ll, k, n, d)
            if bic < best_bic - 1e-12:
                best_bic = bic
                best = MixtureModel(weights, means, variances, ll)
    return best


def sample_reference(model: MixtureModel, seed: int) -> np.ndarray:
    """One draw: weighted component choice then a Gaussian sample, clamped
    to [0, 1] to stay inside the scaled feature space."""
    rng = np.random.default_rng(seed)
    comp = rng.choice(model.n_components, p=model.weights / model.weights.sum())
    draw = rng.normal(model.means[comp], np.sqrt(model.variances[comp]))
    return np.clip(draw, 0.0, 1.0)
