"""From-scratch tree ensembles: CART trees, random forest, multiclass
gradient boosting, and second-order (regularized) boosting.

All split searches are exact (every midpoint between consecutive distinct
sorted values is a candidate) with fixed tie-breaking: lowest feature index,
then lowest threshold. The per-feature scans run on the active kernel
backend; tree growth, leaf values and ensemble logic are shared python, so
both backends produce identical models.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import _backend

MODEL_FORMAT = "moocgrade-model/1"
HESS_FLOOR = 1e-16


@dataclass(frozen=True)
class TreeParams:
    max_depth: int | None = None
    min_samples_leaf: int = 1
    features_considered: int | str = "all"   # "all", "sqrt", or a count
    seed: int = 0


def _resolve_feature_count(spec, d: int) -> int:
    if spec == "all":
        return d
    if spec == "sqrt":
        return max(1, int(np.sqrt(d)))
    k = int(spec)
    if not 1 <= k <= d:
        raise ValueError(f"features_considered {spec!r} out of range for "
                         f"{d} features")
    return k


def second_order_leaf_weight(grad_sum: float, hess_sum: float,
                             lam: float) -> float:
    """Closed-form regularized leaf weight -G / (H + lambda), floored."""
    return -grad_sum / max(hess_sum + lam, HESS_FLOOR)


class DecisionTree:
    """Binary CART tree over flat node arrays; x[f] <= t routes left."""

    def __init__(self, mode: str, n_features: int, n_classes: int | None):
        self.mode = mode
        self.n_features = n_features
        self.n_classes = n_classes
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list = []          # distribution (gini) or scalar
        self.n_samples: list[int] = []
        self.gain: list[float] = []

    def _add_node(self, n: int) -> int:
        node_id = len(self.feature)
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(None)
        self.n_samples.append(n)
        self.gain.append(0.0)
        return node_id

    def finalize(self):
        self.feature = np.asarray(self.feature, dtype=np.int64)
        self.threshold = np.asarray(self.threshold, dtype=np.float64)
        self.left = np.asarray(self.left, dtype=np.int64)
        self.right = np.asarray(self.right, dtype=np.int64)
        self.n_samples = np.asarray(self.n_samples, dtype=np.int64)
        self.gain = np.asarray(self.gain, dtype=np.float64)
        if self.mode == "gini":
            self.value = np.stack([
                v if v is not None else np.zeros(self.n_classes)
                for v in self.value])
        else:
            self.value = np.asarray(
                [v if v is not None else 0.0 for v in self.value],
                dtype=np.float64)

    @property
    def node_count(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf node index for every row (vectorized level walk)."""
        node = np.zeros(len(X), dtype=np.int64)
        while True:
            cur_feat = self.feature[node]
            active = np.flatnonzero(cur_feat >= 0)
            if len(active) == 0:
                return node
            sub = node[active]
            go_left = X[active, self.feature[sub]] <= self.threshold[sub]
            node[active] = np.where(go_left, self.left[sub], self.right[sub])

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if self.mode != "gini":
            raise ValueError("predict_proba requires a classification tree")
        return self.value[self.apply(X)]

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "n_features": self.n_features,
            "n_classes": self.n_classes,
            "feature": np.asarray(self.feature).tolist(),
            "threshold": np.asarray(self.threshold).tolist(),
            "left": np.asarray(self.left).tolist(),
            "right": np.asarray(self.right).tolist(),
            "value": np.asarray(self.value).tolist(),
            "n_samples": np.asarray(self.n_samples).tolist(),
            "gain": np.asarray(self.gain).tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        tree = cls(d["mode"], d["n_features"], d["n_classes"])
        tree.feature = np.asarray(d["feature"], dtype=np.int64)
        tree.threshold = np.asarray(d["threshold"], dtype=np.float64)
        tree.left = np.asarray(d["left"], dtype=np.int64)
        tree.right = np.asarray(d["right"], dtype=np.int64)
        tree.value = np.asarray(d["value"], dtype=np.float64)
        tree.n_samples = np.asarray(d["n_samples"], dtype=np.int64)
        tree.gain = np.asarray(d["gain"], dtype=np.float64)
        return tree


def _check_training_data(X, y=None):
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("X must be a non-empty 2-D array")
    if np.isnan(X).any():
        raise ValueError("X contains NaN")
    if y is not None and len(y) != len(X):
        raise ValueError(f"length mismatch: {len(X)} rows vs {len(y)} labels")
    return X


def _grow_tree(X, mode, params: TreeParams, rng, *, labels=None,
               n_classes=None, targets=None, newton_weights=None,
               grad=None, hess=None, lam=0.0, gamma=0.0, leaf_scale=1.0,
               contrib_out=None) -> DecisionTree:
    """Shared growth loop (preorder, left child first) for all tree modes."""
    kernels = _backend.get()
    n, d = X.shape
    k_feats = _resolve_feature_count(params.features_considered, d)
    min_leaf = params.min_samples_leaf
    tree = DecisionTree(mode, d, n_classes)

    def leaf_value(idx):
        if mode == "gini":
            counts = np.bincount(labels[idx], minlength=n_classes)
            return counts / len(idx)
        if mode == "mse":
            num = float(targets[idx].sum())
            if newton_weights is None:
                return leaf_scale * (num / len(idx))
            den = float(newton_weights[idx].sum())
            return leaf_scale * (num / max(den, HESS_FLOOR))
        g_sum = float(grad[idx].sum())
        h_sum = float(hess[idx].sum())
        return leaf_scale * second_order_leaf_weight(g_sum, h_sum, lam)

    def best_split(idx):
        if len(idx) < 2 * min_leaf or len(idx) < 2:
            return None
        if k_feats < d:
            feats = np.sort(rng.choice(d, size=k_feats, replace=False))
        else:
            feats = range(d)
        best = None
        for f in feats:
            col = X[idx, f]
            order = np.argsort(col, kind="stable")
            vals = col[order]
            if mode == "gini":
                pos, thr, gain = kernels.scan_split_gini(
                    vals, labels[idx][order], n_classes, min_leaf)
            elif mode == "mse":
                pos, thr, gain = kernels.scan_split_mse(
                    vals, targets[idx][order], min_leaf)
            else:
                pos, thr, gain = kernels.scan_split_xgb(
                    vals, grad[idx][order], hess[idx][order],
                    lam, gamma, min_leaf)
            if pos >= 0 and gain > 0.0 and (best is None or gain > best[0]):
                best = (gain, int(f), thr)
        return best

    # explicit stack; push right before left so growth is preorder with the
    # left child first, fixing the per-node rng draw order
    stack = [(np.arange(n, dtype=np.int64), 0, -1, False)]
    while stack:
        idx, depth, parent, is_left = stack.pop()
        node_id = tree._add_node(len(idx))
        if parent >= 0:
            if is_left:
                tree.left[parent] = node_id
            else:
                tree.right[parent] = node_id
        split = None
        if params.max_depth is None or depth < params.max_depth:
            split = best_split(idx)
        if split is None:
            tree.value[node_id] = leaf_value(idx)
            if contrib_out is not None:
                contrib_out[idx] = tree.value[node_id]
            continue
        gain, f, thr = split
        tree.feature[node_id] = f
        tree.threshold[node_id] = thr
        tree.gain[node_id] = gain
        mask = X[idx, f] <= thr
        stack.append((idx[~mask], depth + 1, node_id, False))
        stack.append((idx[mask], depth + 1, node_id, True))
    tree.finalize()
    return tree


def train_tree(X, y, params: TreeParams = TreeParams(), *,
               mode: str = "gini", n_classes: int | None = None,
               rng=None) -> DecisionTree:
    """Train a single CART tree (Gini classification or squared-error
    regression on raw targets)."""
    X = _check_training_data(X, y)
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence(params.seed))
    if mode == "gini":
        y = np.asarray(y, dtype=np.int64)
        if n_classes is None:
            n_classes = int(y.max()) + 1
        return _grow_tree(X, "gini", params, rng, labels=y,
                          n_classes=n_classes)
    if mode == "mse":
        return _grow_tree(X, "mse", params, rng,
                          targets=np.asarray(y, dtype=np.float64))
    raise ValueError(f"unknown tree mode {mode!r}")


@dataclass
class ForestModel:
    trees: list[DecisionTree]
    n_trees: int
    bootstrap: bool
    tree_params: TreeParams
    seed: int
    n_classes: int
    n_features: int

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = _as_matrix(X, self.n_features)
        acc = np.zeros((len(X), self.n_classes))
        for tree in self.trees:
            acc += tree.predict_proba(X)
        return acc / self.n_trees


def train_random_forest(X, y, n_trees: int = 100, *,
                        bootstrap: bool = True,
                        tree_params: TreeParams = TreeParams(
                            features_considered="sqrt"),
                        seed: int = 0, n_classes: int | None = None,
                        threads: int = 1) -> ForestModel:
    """Random forest of Gini CART trees; prediction averages leaf
    distributions. Per-tree seeds derive from (seed, tree index), so the
    result is independent of thread count.
    """
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    X = _check_training_data(X, y)
    y = np.asarray(y, dtype=np.int64)
    if n_classes is None:
        n_classes = int(y.max()) + 1
    n = len(X)

    def build(t):
        rng = np.random.default_rng(np.random.SeedSequence(
            seed, spawn_key=(t,)))
        idx = rng.integers(0, n, n) if bootstrap \
            else np.arange(n, dtype=np.int64)
        return _grow_tree(X[idx], "gini", tree_params, rng,
                          labels=y[idx], n_classes=n_classes)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = list(pool.map(build, range(n_trees)))
    else:
        trees = [build(t) for t in range(n_trees)]
    return ForestModel(trees=trees, n_trees=n_trees, bootstrap=bootstrap,
                       tree_params=tree_params, seed=seed,
                       n_classes=n_classes, n_features=X.shape[1])


@dataclass
class BoostedModel:
    stages: list[list[DecisionTree]]   # one regression tree per class
    base_scores: np.ndarray
    learning_rate: float
    variant: str                       # "first_order" | "second_order"
    lam: float
    gamma: float
    tree_params: TreeParams
    n_classes: int
    n_features: int

    def decision_scores(self, X: np.ndarray) -> np.ndarray:
        X = _as_matrix(X, self.n_features)
        F = np.tile(self.base_scores, (len(X), 1))
        for stage in self.stages:
            for k, tree in enumerate(stage):
                F[:, k] += tree.predict_value(X)
        return F

    def staged_scores(self, X: np.ndarray):
        """Yield accumulated scores after each stage (loss tracking)."""
        X = _as_matrix(X, self.n_features)
        F = np.tile(self.base_scores, (len(X), 1))
        for stage in self.stages:
            for k, tree in enumerate(stage):
                F[:, k] += tree.predict_value(X)
            yield F.copy()

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return softmax(self.decision_scores(X))


def _as_matrix(X, n_features: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != n_features:
        raise ValueError(f"expected {n_features} features, "
                         f"got {X.shape[1]}")
    return X


def softmax(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_log_loss(scores: np.ndarray, y: np.ndarray) -> float:
    """Mean multiclass cross-entropy of raw scores (stable logsumexp)."""
    m = scores.max(axis=1)
    lse = m + np.log(np.exp(scores - m[:, None]).sum(axis=1))
    return float(np.mean(lse - scores[np.arange(len(y)), y]))


def _prior_base_scores(y: np.ndarray, n_classes: int) -> np.ndarray:
    prior = np.bincount(y, minlength=n_classes) / len(y)
    return np.log(np.maximum(prior, 1e-12))


def _train_boosting(X, y, n_stages, learning_rate, tree_params, n_classes,
                    variant, lam, gamma, threads):
    if n_stages < 1:
        raise ValueError("n_stages must be >= 1")
    if learning_rate < 0:
        raise ValueError("learning_rate must be >= 0")
    X = _check_training_data(X, y)
    y = np.asarray(y, dtype=np.int64)
    if n_classes is None:
        n_classes = int(y.max()) + 1
    n = len(X)
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = 1.0
    base = _prior_base_scores(y, n_classes)
    F = np.tile(base, (n, 1))
    stages = []

    def fit_class(stage, k, P, contrib):
        rng = np.random.default_rng(np.random.SeedSequence(
            tree_params.seed, spawn_key=(stage, k)))
        p = P[:, k]
        if variant == "first_order":
            return _grow_tree(
                X, "mse", tree_params, rng,
                targets=onehot[:, k] - p, newton_weights=p * (1.0 - p),
                leaf_scale=learning_rate, contrib_out=contrib)
        return _grow_tree(
            X, "xgb", tree_params, rng,
            grad=p - onehot[:, k], hess=p * (1.0 - p),
            lam=lam, gamma=gamma, leaf_scale=learning_rate,
            contrib_out=contrib)

    pool = None
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        pool = ThreadPoolExecutor(max_workers=threads)
    try:
        for stage in range(n_stages):
            P = softmax(F)
            contrib = np.zeros((n, n_classes))
            if pool is not None:
                trees = list(pool.map(
                    lambda k: fit_class(stage, k, P, contrib[:, k]),
                    range(n_classes)))
            else:
                trees = [fit_class(stage, k, P, contrib[:, k])
                         for k in range(n_classes)]
            F += contrib
            stages.append(trees)
    finally:
        if pool is not None:
            pool.shutdown()
    return BoostedModel(stages=stages, base_scores=base,
                        learning_rate=learning_rate, variant=variant,
                        lam=lam, gamma=gamma, tree_params=tree_params,
                        n_classes=n_classes, n_features=X.shape[1])


def train_gradient_boosting(X, y, n_stages: int = 100,
                            learning_rate: float = 0.1,
                            tree_params: TreeParams = TreeParams(max_depth=3),
                            *, n_classes: int | None = None,
                            threads: int = 1) -> BoostedModel:
    """Multiclass gradient boosting on the softmax log-loss.

    Per stage and class, a squared-error tree fits the residual
    onehot - softmax(F); leaf values are the Newton estimate
    sum(residual) / sum(p(1-p)) scaled by the learning rate.
    """
    return _train_boosting(X, y, n_stages, learning_rate, tree_params,
                           n_classes, "first_order", 0.0, 0.0, threads)


def train_second_order_boosting(X, y, n_stages: int = 100,
                                learning_rate: float = 0.3,
                                lam: float = 1.0, gamma: float = 0.0,
                                tree_params: TreeParams = TreeParams(
                                    max_depth=6),
                                *, n_classes: int | None = None,
                                threads: int = 1) -> BoostedModel:
    """Second-order boosting with split gain
    0.5*(GL^2/(HL+lam) + GR^2/(HR+lam) - G^2/(H+lam)) - gamma and leaf
    weights -G/(H+lam); splits with non-positive gain are rejected.
    """
    if lam < 0 or gamma < 0:
        raise ValueError("lam and gamma must be >= 0")
    return _train_boosting(X, y, n_stages, learning_rate, tree_params,
                           n_classes, "second_order", lam, gamma, threads)


def predict_proba(model, x) -> np.ndarray:
    """Probability vector(s) over classes; rows sum to 1."""
    out = model.predict_proba(x)
    return out[0] if np.asarray(x).ndim == 1 else out


def predict_class(model, x):
    """argmax of predict_proba; ties resolve to the lowest class index."""
    proba = model.predict_proba(x)
    cls = np.argmax(proba, axis=1)
    return int(cls[0]) if np.asarray(x).ndim == 1 else cls


def _iter_trees(model):
    if isinstance(model, ForestModel):
        yield from model.trees
    elif isinstance(model, BoostedModel):
        for stage in model.stages:
            yield from stage
    elif isinstance(model, DecisionTree):
        yield model
    else:
        raise TypeError(f"unsupported model type {type(model).__name__}")


def feature_importance(model, feature_names=None) -> dict:
    """Total split gain per feature across all trees, normalized to sum 1.

    Gain is impurity decrease times node sample count for Gini/MSE trees
    and the regularized gain for second-order trees. Features never split
    on get importance 0.
    """
    trees = list(_iter_trees(model))
    if not trees:
        raise ValueError("model has no trees")
    d = trees[0].n_features
    totals = np.zeros(d)
    for tree in trees:
        internal = tree.feature >= 0
        np.add.at(totals, tree.feature[internal], tree.gain[internal])
    total = totals.sum()
    if total > 0:
        totals = totals / total
    if feature_names is None:
        feature_names = [f"f{i}" for i in range(d)]
    if len(feature_names) != d:
        raise ValueError("feature_names length mismatch")
    return {name: float(v) for name, v in zip(feature_names, totals)}


def model_to_json(model) -> str:
    """Serialize a trained model to a round-trip-exact JSON document."""
    if isinstance(model, ForestModel):
        doc = {
            "format": MODEL_FORMAT,
            "kind": "forest",
            "n_trees": model.n_trees,
            "bootstrap": model.bootstrap,
            "seed": model.seed,
            "n_classes": model.n_classes,
            "n_features": model.n_features,
            "tree_params": _params_to_dict(model.tree_params),
            "trees": [t.to_dict() for t in model.trees],
        }
    elif isinstance(model, BoostedModel):
        doc = {
            "format": MODEL_FORMAT,
            "kind": "boosting",
            "variant": model.variant,
            "learning_rate": model.learning_rate,
            "lambda": model.lam,
            "gamma": model.gamma,
            "n_classes": model.n_classes,
            "n_features": model.n_features,
            "base_scores": model.base_scores.tolist(),
            "tree_params": _params_to_dict(model.tree_params),
            "stages": [[t.to_dict() for t in stage]
                       for stage in model.stages],
        }
    else:
        raise TypeError(f"unsupported model type {type(model).__name__}")
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def model_from_json(text: str):
    doc = json.loads(text)
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"unsupported model format {doc.get('format')!r}")
    params = _params_from_dict(doc["tree_params"])
    if doc["kind"] == "forest":
        return ForestModel(
            trees=[DecisionTree.from_dict(t) for t in doc["trees"]],
            n_trees=doc["n_trees"], bootstrap=doc["bootstrap"],
            tree_params=params, seed=doc["seed"],
            n_classes=doc["n_classes"], n_features=doc["n_features"])
    if doc["kind"] == "boosting":
        return BoostedModel(
            stages=[[DecisionTree.from_dict(t) for t in stage]
                    for stage in doc["stages"]],
            base_scores=np.asarray(doc["base_scores"], dtype=np.float64),
            learning_rate=doc["learning_rate"], variant=doc["variant"],
            lam=doc["lambda"], gamma=doc["gamma"], tree_params=params,
            n_classes=doc["n_classes"], n_features=doc["n_features"])
    raise ValueError(f"unknown model kind {doc['kind']!r}")


def _params_to_dict(p: TreeParams) -> dict:
    return {"max_depth": p.max_depth,
            "min_samples_leaf": p.min_samples_leaf,
            "features_considered": p.features_considered,
            "seed": p.seed}


def _params_from_dict(d: dict) -> TreeParams:
    return TreeParams(max_depth=d["max_depth"],
                      min_samples_leaf=d["min_samples_leaf"],
                      features_considered=d["features_considered"],
                      seed=d["seed"])
