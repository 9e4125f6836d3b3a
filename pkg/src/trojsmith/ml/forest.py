"""Random forest of CART trees with balanced class weights.

Each tree trains on a bootstrap sample, splits minimize class-weighted Gini
impurity over a random feature subset per node, and leaves store the
weighted class distribution. Class weight w_c = N / (2 * N_c) compensates
for the heavy class imbalance between the few Trojan nets and everything
else in a design. Prediction averages leaf distributions across trees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionMismatch, EmptyClass


@dataclass
class ForestParams:
    n_trees: int = 100
    max_depth: int = 12
    min_split: int = 2
    max_features: int | None = None  # default: round(sqrt(n_features))
    seed: int = 0


@dataclass
class Tree:
    # parallel node arrays; children index into them, feature -1 marks a leaf
    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    prob1: list[float] = field(default_factory=list)

    def add_leaf(self, p1: float) -> int:
        return self._add(-1, 0.0, -1, -1, p1)

    def add_split(self, f: int, thr: float) -> int:
        return self._add(f, thr, -1, -1, 0.5)

    def _add(self, f, thr, l, r, p1) -> int:
        self.feature.append(int(f))
        self.threshold.append(float(thr))
        self.left.append(int(l))
        self.right.append(int(r))
        self.prob1.append(float(p1))
        return len(self.feature) - 1

    def predict1(self, X: np.ndarray) -> np.ndarray:
        feat = np.array(self.feature)
        thr = np.array(self.threshold)
        left = np.array(self.left)
        right = np.array(self.right)
        p1 = np.array(self.prob1)
        node = np.zeros(len(X), dtype=int)
        active = feat[node] >= 0
        while active.any():
            idx = np.nonzero(active)[0]
            cur = node[idx]
            go_left = X[idx, feat[cur]] <= thr[cur]
            node[idx] = np.where(go_left, left[cur], right[cur])
            active = feat[node] >= 0
        return p1[node]


@dataclass
class ForestModel:
    trees: list[Tree]
    n_features: int
    class_weights: tuple[float, float]
    seed: int

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """(n, 2) array of class probabilities; columns sum to 1."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(
                f"expected {self.n_features} features, got {X.shape[1]}"
            )
        p1 = np.mean([t.predict1(X) for t in self.trees], axis=0)
        return np.column_stack([1.0 - p1, p1])

    def to_json(self) -> dict:
        return {
            "n_features": self.n_features,
            "class_weights": list(self.class_weights),
            "seed": self.seed,
            "trees": [
                {
                    "feature": t.feature,
                    "threshold": t.threshold,
                    "left": t.left,
                    "right": t.right,
                    "prob1": t.prob1,
                }
                for t in self.trees
            ],
        }

    @classmethod
    def from_json(cls, d: dict) -> "ForestModel":
        trees = [
            Tree(t["feature"], t["threshold"], t["left"], t["right"], t["prob1"])
            for t in d["trees"]
        ]
        return cls(trees, d["n_features"], tuple(d["class_weights"]), d["seed"])


def _best_split(X, y, w, features):
    """Lowest weighted-Gini split over the candidate features; None if no
    feature separates the node."""
    total_w1 = w[y == 1].sum()
    total_w = w.sum()
    best = None  # (impurity, feature, threshold)
    for f in features:
        col = X[:, f]
        idx = np.argsort(col, kind="stable")
        sc, sy, sw = col[idx], y[idx], w[idx]
        cw = np.cumsum(sw)
        cw1 = np.cumsum(sw * sy)
        # candidate boundaries between distinct consecutive values
        cut = np.nonzero(sc[:-1] < sc[1:])[0]
        if len(cut) == 0:
            continue
        lw, lw1 = cw[cut], cw1[cut]
        rw, rw1 = total_w - lw, total_w1 - lw1
        gini_l = 1.0 - (lw1 / lw) ** 2 - ((lw - lw1) / lw) ** 2
        gini_r = 1.0 - (rw1 / rw) ** 2 - ((rw - rw1) / rw) ** 2
        imp = (lw * gini_l + rw * gini_r) / total_w
        j = int(np.argmin(imp))
        cand = (float(imp[j]), f, float((sc[cut[j]] + sc[cut[j] + 1]) / 2.0))
        if best is None or cand[0] < best[0] - 1e-15:
            best = cand
    return best


def _grow(tree, X, y, w, rng, depth, params, n_features, m):
    w1 = w[y == 1].sum()
    wt = w.sum()
    p1 = w1 / wt
    if (
        depth >= params.max_depth
        or len(y) < params.min_split
        or p1 <= 0.0
        or p1 >= 1.0
    ):
        return tree.add_leaf(float(p1))
    features = np.sort(rng.choice(n_features, size=m, replace=False))
    found = _best_split(X, y, w, features)
    if found is None:
        # try the remaining features before giving up on the node
        rest = np.setdiff1d(np.arange(n_features), features)
        found = _best_split(X, y, w, rest) if len(rest) else None
    if found is None:
        return tree.add_leaf(float(p1))
    _, f, thr = found
    node = tree.add_split(f, thr)
    mask = X[:, f] <= thr
    tree.left[node] = _grow(tree, X[mask], y[mask], w[mask], rng, depth + 1, params, n_features, m)
    tree.right[node] = _grow(tree, X[~mask], y[~mask], w[~mask], rng, depth + 1, params, n_features, m)
    return node


def train_classifier(
    positives: np.ndarray | list,
    negatives: np.ndarray | list,
    params: ForestParams | None = None,
) -> ForestModel:
    params = params or ForestParams()
    pos = np.atleast_2d(np.asarray(positives, dtype=float))
    neg = np.atleast_2d(np.asarray(negatives, dtype=float))
    if pos.size == 0 or neg.size == 0:
        raise EmptyClass("both classes must be non-empty")
    X = np.vstack([neg, pos])
    y = np.concatenate([np.zeros(len(neg), dtype=int), np.ones(len(pos), dtype=int)])
    n = len(y)
    w_pos = n / (2.0 * len(pos))
    w_neg = n / (2.0 * len(neg))
    w = np.where(y == 1, w_pos, w_neg)
    n_features = X.shape[1]
    m = params.max_features or max(1, round(math.sqrt(n_features)))

    trees = []
    root_rng = np.random.default_rng(params.seed)
    for _ in range(params.n_trees):
        rng = np.random.default_rng(root_rng.integers(0, 2**63))
        boot = rng.integers(0, n, size=n)
        tree = Tree()
        _grow(tree, X[boot], y[boot], w[boot], rng, 0, params, n_features, m)
        trees.append(tree)
    return ForestModel(trees, n_features, (w_neg, w_pos), params.seed)


def _coerce(v) -> np.ndarray:
    return np.asarray(getattr(v, "values", v), dtype=float)


def score_nets(model: ForestModel, scaled) -> dict[str, float] | np.ndarray:
    """Positive-class probability per net (fitness). Accepts a mapping of
    net name -> (ScaledFeatures or array) or a plain sequence of vectors."""
    if isinstance(scaled, dict):
        names = sorted(scaled)
        if not names:
            return {}
        X = np.stack([_coerce(scaled[n]) for n in names])
        p = model.predict_proba(X)[:, 1]
        return {n: float(v) for n, v in zip(names, p)}
    X = np.stack([_coerce(v) for v in scaled])
    return model.predict_proba(X)[:, 1]
