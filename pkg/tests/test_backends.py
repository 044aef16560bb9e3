"""Cross-checks between the compiled kernels and the numpy fallback.

Split scans must agree bit-for-bit (same accumulation order by design), so
whole trees and boosted models serialize identically under either backend.
Skip-gram training shares the random stream but routes float updates through
BLAS in the fallback, so vectors agree only to rounding noise.
"""

import numpy as np
import pytest

from moocgrade import _backend
from moocgrade._backend import pykernels
from moocgrade.embed import SkipGramConfig, WalkConfig, generate_walks, \
    train_skipgram
from moocgrade.graph import build_bipartite
from moocgrade.models import (
    TreeParams,
    model_to_json,
    train_gradient_boosting,
    train_random_forest,
    train_second_order_boosting,
    train_tree,
)

from conftest import dataset_from_pairs

ckernels = pytest.importorskip(
    "moocgrade._backend._ckernels",
    reason="compiled kernels not built; cross-backend checks skipped")


@pytest.fixture
def use_python_backend():
    _backend.set_backend("python")
    yield
    _backend.set_backend("compiled")


def sorted_column(rng, n, n_distinct):
    vals = np.sort(rng.choice(rng.normal(size=n_distinct), size=n))
    return np.ascontiguousarray(vals, dtype=np.float64)


class TestScanEquivalence:
    def test_gini_bitwise(self, rng):
        for _ in range(200):
            n = int(rng.integers(2, 60))
            vals = sorted_column(rng, n, int(rng.integers(1, n + 1)))
            labels = rng.integers(0, 4, n).astype(np.int64)
            min_leaf = int(rng.integers(1, 4))
            a = ckernels.scan_split_gini(vals, labels, 4, min_leaf)
            b = pykernels.scan_split_gini(vals, labels, 4, min_leaf)
            assert a == b

    def test_mse_bitwise(self, rng):
        for _ in range(200):
            n = int(rng.integers(2, 60))
            vals = sorted_column(rng, n, int(rng.integers(1, n + 1)))
            targets = np.ascontiguousarray(rng.normal(size=n))
            min_leaf = int(rng.integers(1, 4))
            a = ckernels.scan_split_mse(vals, targets, min_leaf)
            b = pykernels.scan_split_mse(vals, targets, min_leaf)
            assert a == b

    def test_xgb_bitwise(self, rng):
        for _ in range(200):
            n = int(rng.integers(2, 60))
            vals = sorted_column(rng, n, int(rng.integers(1, n + 1)))
            grad = np.ascontiguousarray(rng.normal(size=n))
            hess = np.ascontiguousarray(rng.uniform(0.01, 0.3, n))
            lam = float(rng.choice([0.0, 0.5, 1.0, 10.0]))
            gamma = float(rng.choice([0.0, 0.1, 1.0]))
            a = ckernels.scan_split_xgb(vals, grad, hess, lam, gamma, 1)
            b = pykernels.scan_split_xgb(vals, grad, hess, lam, gamma, 1)
            assert a == b

    def test_constant_column_no_split(self):
        vals = np.ones(10)
        labels = np.arange(10, dtype=np.int64) % 3
        assert ckernels.scan_split_gini(vals, labels, 3, 1) == (-1, 0.0, 0.0)
        assert pykernels.scan_split_gini(vals, labels, 3, 1) == (-1, 0.0, 0.0)


class TestModelEquivalence:
    def test_tree_identical(self, rng, use_python_backend):
        X = rng.normal(size=(120, 5))
        y = rng.integers(0, 3, 120)
        py_tree = train_tree(X, y, TreeParams(max_depth=6), n_classes=3)
        _backend.set_backend("compiled")
        c_tree = train_tree(X, y, TreeParams(max_depth=6), n_classes=3)
        assert py_tree.to_dict() == c_tree.to_dict()

    def test_forest_identical(self, rng, use_python_backend):
        X = rng.normal(size=(80, 4))
        y = rng.integers(0, 3, 80)
        py_model = train_random_forest(X, y, n_trees=5, seed=7, n_classes=3)
        _backend.set_backend("compiled")
        c_model = train_random_forest(X, y, n_trees=5, seed=7, n_classes=3)
        assert model_to_json(py_model) == model_to_json(c_model)

    def test_boosting_identical(self, rng, use_python_backend):
        X = rng.normal(size=(100, 4))
        y = rng.integers(0, 3, 100)
        py_gb = train_gradient_boosting(X, y, n_stages=10, n_classes=3)
        py_xgb = train_second_order_boosting(X, y, n_stages=10, n_classes=3)
        _backend.set_backend("compiled")
        c_gb = train_gradient_boosting(X, y, n_stages=10, n_classes=3)
        c_xgb = train_second_order_boosting(X, y, n_stages=10, n_classes=3)
        assert model_to_json(py_gb) == model_to_json(c_gb)
        assert model_to_json(py_xgb) == model_to_json(c_xgb)


class TestSgnsEquivalence:
    def test_same_draws_close_vectors(self, use_python_backend):
        g = build_bipartite(dataset_from_pairs(
            [(1, 10), (1, 11), (2, 10), (2, 12), (3, 11), (3, 12)]))
        walks = generate_walks(g, WalkConfig(num_walks_per_node=5,
                                             walk_length=8, seed=2))
        cfg = SkipGramConfig(dimension=8, window=3, epochs=2, seed=9)
        py_table = train_skipgram(walks, cfg, graph=g)
        _backend.set_backend("compiled")
        c_table = train_skipgram(walks, cfg, graph=g)
        for key in py_table.keys():
            assert np.allclose(py_table[key], c_table[key], atol=1e-9)

    def test_hogwild_smoke(self):
        g = build_bipartite(dataset_from_pairs(
            [(1, 10), (1, 11), (2, 10), (2, 12), (3, 11), (3, 12)]))
        walks = generate_walks(g, WalkConfig(num_walks_per_node=10,
                                             walk_length=8, seed=2))
        table = train_skipgram(walks, SkipGramConfig(
            dimension=8, window=3, epochs=2, seed=9), graph=g, threads=3)
        for vec in table.vectors.values():
            assert np.isfinite(vec).all()
