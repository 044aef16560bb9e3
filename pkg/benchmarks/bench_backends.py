"""Benchmark the compiled kernels against the pure-python fallback.

Times the three split scans and one epoch of skip-gram training on
synthetic workloads, then a small end-to-end boosting fit. Run with:

    python benchmarks/bench_backends.py [--quick]
"""

import argparse
import time

import numpy as np

from moocgrade import _backend
from moocgrade.data import SynthConfig, generate_synthetic, discretize_grade
from moocgrade.embed import SkipGramConfig, WalkConfig, generate_walks, \
    train_skipgram
from moocgrade.graph import build_bipartite
from moocgrade.models import train_gradient_boosting


def timeit(fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_scans(n, rng):
    vals = np.sort(rng.normal(size=n))
    labels = rng.integers(0, 5, n).astype(np.int64)
    targets = np.ascontiguousarray(rng.normal(size=n))
    hess = np.ascontiguousarray(rng.uniform(0.01, 0.25, n))
    k = _backend.get()
    return {
        f"scan_gini (n={n})":
            timeit(lambda: k.scan_split_gini(vals, labels, 5, 1)),
        f"scan_mse (n={n})":
            timeit(lambda: k.scan_split_mse(vals, targets, 1)),
        f"scan_xgb (n={n})":
            timeit(lambda: k.scan_split_xgb(vals, targets, hess,
                                            1.0, 0.0, 1)),
    }


def bench_sgns(graph, walks, dim):
    cfg = SkipGramConfig(dimension=dim, window=5, epochs=1, seed=1)
    return {
        f"sgns 1 epoch (walks={len(walks)}, dim={dim})":
            timeit(lambda: train_skipgram(walks, cfg, graph=graph),
                   repeats=1),
    }


def bench_boosting(X, y, stages):
    return {
        f"gb fit ({len(X)}x{X.shape[1]}, {stages} stages)":
            timeit(lambda: train_gradient_boosting(
                X, y, n_stages=stages, n_classes=5), repeats=1),
    }


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true",
                        help="smaller workloads")
    args = parser.parse_args()

    scan_n = 20_000 if args.quick else 200_000
    synth = SynthConfig(students=150 if args.quick else 600,
                        challenges=60 if args.quick else 150, cohorts=5)
    stages = 10 if args.quick else 30

    rng = np.random.default_rng(0)
    data = generate_synthetic(synth, 1)
    graph = build_bipartite(data)
    walks = generate_walks(graph, WalkConfig(
        num_walks_per_node=10, walk_length=10, seed=1))
    X = np.array([[r.timestamp, r.exercise_id, r.course_id, r.difficulty,
                   r.retries, r.duration] for r in data.records])
    y = np.array([discretize_grade(r.final_score) for r in data.records])

    if "compiled" not in _backend.available():
        print("compiled kernels not built; benchmarking python only")
    results = {}
    for name in _backend.available():
        _backend.set_backend(name)
        rows = {}
        rows.update(bench_scans(scan_n, rng))
        rows.update(bench_sgns(graph, walks, dim=32))
        rows.update(bench_boosting(X, y, stages))
        results[name] = rows

    workloads = list(next(iter(results.values())))
    width = max(len(w) for w in workloads)
    backends = list(results)
    header = f"{'workload':<{width}}  " + "  ".join(
        f"{b:>10}" for b in backends)
    if len(backends) == 2:
        header += f"  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for w in workloads:
        line = f"{w:<{width}}  " + "  ".join(
            f"{results[b][w] * 1e3:>8.2f}ms" for b in backends)
        if len(backends) == 2:
            ratio = results["python"][w] / results["compiled"][w]
            line += f"  {ratio:>7.1f}x"
        print(line)


if __name__ == "__main__":
    main()
