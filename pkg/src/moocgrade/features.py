"""Feature assembly for the two model inputs: the raw interaction-log
baseline and the structural variant where identifier columns are replaced
by degree, eigenvector centrality, and node embeddings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, discretize_grade
from .embed import EmbeddingTable
from .graph import BipartiteGraph, CHALLENGE, STUDENT, CentralityMap

BASELINE = "baseline"
DEEPWALK = "deepwalk"
NODE2VEC = "node2vec"
VARIANTS = (BASELINE, DEEPWALK, NODE2VEC)

_SHARED = ("timestamp", "exercise_id", "course_id", "difficulty",
           "retries", "duration")


@dataclass(frozen=True)
class FeatureMatrix:
    X: np.ndarray                  # (n, d) float64
    y: np.ndarray                  # (n,) int64 grade classes
    user_ids: np.ndarray
    challenge_ids: np.ndarray
    feature_names: list[str]
    variant: str

    def __len__(self) -> int:
        return len(self.X)

    def to_csv(self) -> str:
        """Header = feature names + label; for external cross-checking."""
        lines = [",".join(self.feature_names + ["label"])]
        for row, label in zip(self.X, self.y):
            lines.append(",".join(repr(float(v)) for v in row)
                         + f",{int(label)}")
        return "\n".join(lines) + "\n"


def feature_names(variant: str, dim: int = 0) -> list[str]:
    """Feature layout for a variant, matching assemble() column-for-column."""
    if variant == BASELINE:
        return ["user_id", "challenge_id", "timestamp", "exercise_id",
                "course_id", "difficulty", "retries", "duration"]
    if variant in (DEEPWALK, NODE2VEC):
        if dim < 1:
            raise ValueError("structural variants need dim >= 1")
        return (list(_SHARED)
                + ["user_degree", "challenge_degree", "user_ec",
                   "challenge_ec"]
                + [f"user_emb_{i}" for i in range(dim)]
                + [f"challenge_emb_{i}" for i in range(dim)])
    raise ValueError(f"unknown variant {variant!r}")


def assemble(records: Dataset, variant: str,
             graph: BipartiteGraph | None = None,
             centrality: CentralityMap | None = None,
             embeddings: EmbeddingTable | None = None,
             missing: str = "mean") -> FeatureMatrix:
    """Build the labeled feature matrix for `records`.

    The baseline layout keeps the raw identifiers as numeric columns; the
    structural layout drops them and appends degree, centrality, and the
    node embedding of each side. Nodes absent from the graph/embeddings
    (possible when the graph was built from the training split only) are
    backfilled with the componentwise mean embedding and zero
    degree/centrality when missing="mean", or raise when missing="strict".
    """
    n = len(records)
    y = np.fromiter((discretize_grade(r.final_score) for r in records),
                    dtype=np.int64, count=n)
    user_ids = np.fromiter((r.user_id for r in records), dtype=np.int64,
                           count=n)
    challenge_ids = np.fromiter((r.challenge_id for r in records),
                                dtype=np.int64, count=n)

    if variant == BASELINE:
        X = np.empty((n, 8), dtype=np.float64)
        for i, r in enumerate(records):
            X[i] = (r.user_id, r.challenge_id, r.timestamp, r.exercise_id,
                    r.course_id, r.difficulty, r.retries, r.duration)
        return FeatureMatrix(X=X, y=y, user_ids=user_ids,
                             challenge_ids=challenge_ids,
                             feature_names=feature_names(BASELINE),
                             variant=variant)

    if variant not in (DEEPWALK, NODE2VEC):
        raise ValueError(f"unknown variant {variant!r}")
    if graph is None or centrality is None or embeddings is None:
        raise ValueError(
            "structural variants need graph, centrality, and embeddings")
    if missing not in ("mean", "strict"):
        raise ValueError(f"unknown missing policy {missing!r}")

    dim = embeddings.dimension
    names = feature_names(variant, dim)
    mean_emb = embeddings.mean_vector() if missing == "mean" else None
    X = np.empty((n, len(names)), dtype=np.float64)
    for i, r in enumerate(records):
        X[i, :6] = (r.timestamp, r.exercise_id, r.course_id, r.difficulty,
                    r.retries, r.duration)
        for off, key in ((0, (STUDENT, r.user_id)),
                         (1, (CHALLENGE, r.challenge_id))):
            if key in embeddings:
                deg = float(len(graph.neighbors(graph.node_index(key))))
                ec = centrality.of(key)
                emb = embeddings[key]
            elif missing == "mean":
                deg = 0.0
                ec = 0.0
                emb = mean_emb
            else:
                raise KeyError(
                    f"{key[0]} {key[1]} missing from embeddings "
                    f"(missing='strict')")
            X[i, 6 + off] = deg
            X[i, 8 + off] = ec
            lo = 10 + off * dim
            X[i, lo:lo + dim] = emb
    return FeatureMatrix(X=X, y=y, user_ids=user_ids,
                         challenge_ids=challenge_ids,
                         feature_names=names, variant=variant)


def group_importances(importances: dict) -> dict:
    """Aggregate per-dimension embedding importances into two grouped
    entries ("user embedding", "challenge embedding")."""
    grouped: dict[str, float] = {}
    for name, value in importances.items():
        if name.startswith("user_emb_"):
            key = "user embedding"
        elif name.startswith("challenge_emb_"):
            key = "challenge embedding"
        else:
            key = name
        grouped[key] = grouped.get(key, 0.0) + value
    return grouped
