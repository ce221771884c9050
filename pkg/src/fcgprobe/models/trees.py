"""CART trees, random forests, SAMME boosting and benign-path constraints.

Splits send ``x[feature] <= threshold`` to the left child.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateData, DimensionMismatch
from .labels import BENIGN, MALWARE

LEAF = -1


@dataclass
class DecisionTree:
    feature: np.ndarray    # int, LEAF for leaves
    threshold: np.ndarray  # float, unused at leaves
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray      # class label at leaves

    def __post_init__(self):
        self.feature = np.asarray(self.feature, dtype=int)
        self.threshold = np.asarray(self.threshold, dtype=float)
        self.left = np.asarray(self.left, dtype=int)
        self.right = np.asarray(self.right, dtype=int)
        self.value = np.asarray(self.value, dtype=int)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def leaf(self, x) -> int:
        node = 0
        feat, thr, left, right = self.feature, self.threshold, self.left, self.right
        while feat[node] != LEAF:
            node = left[node] if x[feat[node]] <= thr[node] else right[node]
        return int(node)

    def predict_one(self, x) -> int:
        return int(self.value[self.leaf(x)])

    def predict(self, xs) -> np.ndarray:
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        return np.array([self.predict_one(row) for row in xs], dtype=int)


@dataclass
class TreeEnsemble:
    trees: list[DecisionTree]
    mode: str  # "random_forest" or "adaboost"
    tree_weights: np.ndarray
    input_dim: int

    def __post_init__(self):
        if self.mode not in ("random_forest", "adaboost"):
            raise ValueError(f"unknown ensemble mode {self.mode!r}")
        self.tree_weights = np.asarray(self.tree_weights, dtype=float)

    def votes(self, x) -> tuple[float, float]:
        """(benign weight, malware weight) summed over trees."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.input_dim,):
            raise DimensionMismatch(f"expected {self.input_dim} features, got {x.shape}")
        ben = mal = 0.0
        for t, w in zip(self.trees, self.tree_weights):
            if t.predict_one(x) == BENIGN:
                ben += w
            else:
                mal += w
        return ben, mal

    def predict_one(self, x) -> int:
        ben, mal = self.votes(x)
        return BENIGN if ben > mal else MALWARE

    def predict(self, xs) -> np.ndarray:
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        return np.array([self.predict_one(row) for row in xs], dtype=int)


# -- CART -------------------------------------------------------------------

def _majority(y, w) -> int:
    ben = w[y == BENIGN].sum()
    mal = w[y == MALWARE].sum()
    return BENIGN if ben > mal else MALWARE


def _gini(wb, wm):
    tot = wb + wm
    with np.errstate(invalid="ignore", divide="ignore"):
        g = 1.0 - (wb * wb + wm * wm) / (tot * tot)
    return np.where(tot > 0, g, 0.0)


def _best_split(x, y, w, features):
    best = None  # (impurity, feature, threshold)
    ben = (y == BENIGN).astype(float) * w
    mal = (y == MALWARE).astype(float) * w
    for f in features:
        col = x[:, f]
        order = np.argsort(col, kind="stable")
        xs = col[order]
        cb = np.cumsum(ben[order])[:-1]
        cm = np.cumsum(mal[order])[:-1]
        valid = xs[:-1] < xs[1:]
        if not valid.any():
            continue
        tb, tm = ben.sum(), mal.sum()
        wl = cb + cm
        wr = (tb - cb) + (tm - cm)
        imp = wl * _gini(cb, cm) + wr * _gini(tb - cb, tm - cm)
        imp = np.where(valid, imp, np.inf)
        i = int(np.argmin(imp))
        if best is None or imp[i] < best[0] - 1e-15:
            lo, hi = xs[i], xs[i + 1]
            thr = lo + (hi - lo) / 2.0
            if not lo <= thr < hi:
                thr = lo
            best = (float(imp[i]), int(f), float(thr))
    return best


def build_tree(x, y, w=None, max_depth=4, max_features=None, rng=None, min_samples_split=2) -> DecisionTree:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=int)
    w = np.ones(len(y)) if w is None else np.asarray(w, dtype=float)
    d = x.shape[1]
    nodes = {"feature": [], "threshold": [], "left": [], "right": [], "value": []}

    def new_node():
        for v in nodes.values():
            v.append(LEAF if v is not nodes["threshold"] else 0.0)
        return len(nodes["feature"]) - 1

    def grow(idx, depth):
        nid = new_node()
        yi, wi = y[idx], w[idx]
        nodes["value"][nid] = _majority(yi, wi)
        if depth >= max_depth or len(idx) < min_samples_split or len(np.unique(yi)) < 2:
            return nid
        if max_features is not None and max_features < d:
            feats = np.sort(rng.choice(d, size=max_features, replace=False))
        else:
            feats = range(d)
        split = _best_split(x[idx], yi, wi, feats)
        parent = float(wi.sum() * _gini(wi[yi == BENIGN].sum(), wi[yi == MALWARE].sum()))
        if split is None or split[0] >= parent - 1e-15:
            return nid
        _, f, thr = split
        go_left = x[idx, f] <= thr
        nodes["feature"][nid] = f
        nodes["threshold"][nid] = thr
        nodes["left"][nid] = grow(idx[go_left], depth + 1)
        nodes["right"][nid] = grow(idx[~go_left], depth + 1)
        return nid

    grow(np.arange(len(y)), 0)
    return DecisionTree(**nodes)


@dataclass
class ForestConfig:
    n_trees: int = 25
    max_depth: int = 4
    max_features: int | None = None  # None -> ceil(sqrt(d))
    bootstrap: bool = True
    seed: int = 0


@dataclass
class BoostConfig:
    n_stages: int = 25
    stump_depth: int = 1
    seed: int = 0


def _check(data, labels):
    x = np.asarray(data, dtype=float)
    y = np.asarray(labels, dtype=int)
    if x.ndim != 2 or len(x) != len(y):
        raise DimensionMismatch("data must be (n, d) with one label per row")
    if len(np.unique(y)) < 2:
        raise DegenerateData("training data must contain both classes")
    return x, y


def forest_train(data, labels, config: ForestConfig | None = None) -> TreeEnsemble:
    cfg = config or ForestConfig()
    x, y = _check(data, labels)
    rng = np.random.default_rng(cfg.seed)
    mf = cfg.max_features or math.ceil(math.sqrt(x.shape[1]))
    trees = []
    for _ in range(cfg.n_trees):
        idx = rng.integers(0, len(y), size=len(y)) if cfg.bootstrap else np.arange(len(y))
        trees.append(build_tree(x[idx], y[idx], max_depth=cfg.max_depth, max_features=mf, rng=rng))
    return TreeEnsemble(trees, "random_forest", np.ones(len(trees)), x.shape[1])


def adaboost_train(data, labels, config: BoostConfig | None = None) -> TreeEnsemble:
    """Two-class SAMME: stage weight log((1 - err) / err)."""
    cfg = config or BoostConfig()
    x, y = _check(data, labels)
    rng = np.random.default_rng(cfg.seed)
    w = np.full(len(y), 1.0 / len(y))
    trees, alphas = [], []
    for _ in range(cfg.n_stages):
        tree = build_tree(x, y, w, max_depth=cfg.stump_depth, rng=rng)
        miss = tree.predict(x) != y
        err = float(w[miss].sum() / w.sum())
        if err >= 0.5:
            if not trees:
                trees.append(tree)
                alphas.append(1.0)
            break
        alpha = math.log((1.0 - err) / err) if err > 0 else 10.0
        trees.append(tree)
        alphas.append(alpha)
        if err == 0:
            break
        w = w * np.exp(alpha * miss)
        w /= w.sum()
    return TreeEnsemble(trees, "adaboost", np.array(alphas), x.shape[1])


# -- constraints ------------------------------------------------------------

@dataclass(frozen=True)
class Constraint:
    feature: int
    lower: float = -math.inf
    upper: float = math.inf
    lower_closed: bool = False
    upper_closed: bool = True
    tree: int = -1
    leaf: int = -1

    def __post_init__(self):
        if not _nonempty(self.lower, self.lower_closed, self.upper, self.upper_closed):
            raise ValueError(f"empty interval for feature {self.feature}")

    def contains(self, v: float) -> bool:
        if v < self.lower or (v == self.lower and not self.lower_closed):
            return False
        if v > self.upper or (v == self.upper and not self.upper_closed):
            return False
        return True

    def intersects(self, other: "Constraint") -> bool:
        if self.lower > other.lower:
            lo, lc = self.lower, self.lower_closed
        elif other.lower > self.lower:
            lo, lc = other.lower, other.lower_closed
        else:
            lo, lc = self.lower, self.lower_closed and other.lower_closed
        if self.upper < other.upper:
            hi, hc = self.upper, self.upper_closed
        elif other.upper < self.upper:
            hi, hc = other.upper, other.upper_closed
        else:
            hi, hc = self.upper, self.upper_closed and other.upper_closed
        return _nonempty(lo, lc, hi, hc)


def _nonempty(lo, lc, hi, hc) -> bool:
    return lo < hi or (lo == hi and lc and hc and math.isfinite(lo))


def benign_paths(tree: DecisionTree, tree_id: int = -1) -> list[list[Constraint]]:
    """One list of per-feature constraints for each root-to-benign-leaf path."""
    out = []

    def walk(node, bounds):
        f = tree.feature[node]
        if f == LEAF:
            if tree.value[node] == BENIGN:
                out.append([
                    Constraint(feat, lo, hi, False, True, tree_id, node)
                    for feat, (lo, hi) in sorted(bounds.items())
                ])
            return
        thr = float(tree.threshold[node])
        lo, hi = bounds.get(f, (-math.inf, math.inf))
        if lo < min(hi, thr):
            walk(tree.left[node], {**bounds, int(f): (lo, min(hi, thr))})
        if max(lo, thr) < hi:
            walk(tree.right[node], {**bounds, int(f): (max(lo, thr), hi)})

    walk(0, {})
    return out


def extract_benign_constraints(e: TreeEnsemble, eliminate_conflicts: bool = True) -> list[Constraint]:
    per_tree = [benign_paths(t, i) for i, t in enumerate(e.trees)]
    flat = [c for paths in per_tree for path in paths for c in path]
    if not eliminate_conflicts:
        return flat
    # features a tree constrains on every one of its benign paths
    required: list[dict[int, list[Constraint]]] = []
    for paths in per_tree:
        req: dict[int, list[Constraint]] = {}
        if paths:
            common = set.intersection(*({c.feature for c in p} for p in paths))
            for p in paths:
                for c in p:
                    if c.feature in common:
                        req.setdefault(c.feature, []).append(c)
        required.append(req)
    kept = []
    for c in flat:
        conflict = any(
            tid != c.tree and c.feature in req and not any(c.intersects(o) for o in req[c.feature])
            for tid, req in enumerate(required)
        )
        if not conflict:
            kept.append(c)
    return kept


class ConstraintSet:
    """Vectorized membership counting over a fixed list of constraints."""

    def __init__(self, constraints):
        self.constraints = list(constraints)
        c = self.constraints
        self.feature = np.array([k.feature for k in c], dtype=int)
        self.lower = np.array([k.lower for k in c], dtype=float)
        self.upper = np.array([k.upper for k in c], dtype=float)
        self.lower_closed = np.array([k.lower_closed for k in c], dtype=bool)
        self.upper_closed = np.array([k.upper_closed for k in c], dtype=bool)

    def __len__(self) -> int:
        return len(self.constraints)

    def satisfied(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if len(self.feature) and self.feature.max() >= x.shape[-1]:
            raise DimensionMismatch("constraint feature index outside the vector")
        v = x[..., self.feature]
        above = (v > self.lower) | (self.lower_closed & (v == self.lower))
        below = (v < self.upper) | (self.upper_closed & (v == self.upper))
        return above & below

    def count(self, x) -> np.ndarray | int:
        s = self.satisfied(x).sum(axis=-1)
        return int(s) if np.ndim(s) == 0 else s


def sat_count(constraints, x) -> int:
    if not isinstance(constraints, ConstraintSet):
        constraints = ConstraintSet(constraints)
    if len(constraints) == 0:
        return 0
    return int(constraints.count(x))
