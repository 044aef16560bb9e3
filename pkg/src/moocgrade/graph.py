"""Student-challenge bipartite graph and node-level structural statistics.

Nodes are addressed either by typed key ("student", user_id) /
("challenge", challenge_id) or by a dense internal index: students first in
ascending user_id, then challenges in ascending challenge_id. The internal
index is what walks and embeddings operate on.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset

STUDENT = "student"
CHALLENGE = "challenge"

NodeKey = tuple[str, int]


class ConvergenceError(RuntimeError):
    """Power iteration failed to converge; carries the last residual."""

    def __init__(self, residual: float, max_iter: int):
        super().__init__(
            f"eigenvector centrality did not converge after {max_iter} "
            f"iterations (residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class BipartiteGraph:
    """Undirected bipartite graph over students and challenges."""

    students: np.ndarray            # sorted user ids
    challenges: np.ndarray          # sorted challenge ids
    indptr: np.ndarray              # CSR over internal indices
    indices: np.ndarray             # concatenated sorted neighbor lists
    _student_pos: dict[int, int] = field(repr=False)
    _challenge_pos: dict[int, int] = field(repr=False)

    @property
    def num_students(self) -> int:
        return len(self.students)

    @property
    def num_challenges(self) -> int:
        return len(self.challenges)

    @property
    def num_nodes(self) -> int:
        return len(self.students) + len(self.challenges)

    @property
    def num_edges(self) -> int:
        return len(self.indices) // 2

    def node_key(self, i: int) -> NodeKey:
        if i < self.num_students:
            return (STUDENT, int(self.students[i]))
        return (CHALLENGE, int(self.challenges[i - self.num_students]))

    def node_index(self, key: NodeKey) -> int:
        side, ident = key
        if side == STUDENT:
            if ident not in self._student_pos:
                raise KeyError(f"unknown student node {ident}")
            return self._student_pos[ident]
        if side == CHALLENGE:
            if ident not in self._challenge_pos:
                raise KeyError(f"unknown challenge node {ident}")
            return self.num_students + self._challenge_pos[ident]
        raise KeyError(f"unknown node side {side!r}")

    def node_keys(self) -> list[NodeKey]:
        return [self.node_key(i) for i in range(self.num_nodes)]

    def neighbors(self, i: int) -> np.ndarray:
        """Sorted internal indices adjacent to internal node i."""
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def degree_array(self) -> np.ndarray:
        return np.diff(self.indptr)


def build_bipartite(d: Dataset) -> BipartiteGraph:
    """One node per distinct id on each side, one edge per distinct pair."""
    if len(d) == 0:
        raise ValueError("cannot build a graph from an empty Dataset")
    pairs = {(r.user_id, r.challenge_id) for r in d.records}
    students = np.array(sorted({u for u, _ in pairs}), dtype=np.int64)
    challenges = np.array(sorted({c for _, c in pairs}), dtype=np.int64)
    spos = {int(u): i for i, u in enumerate(students)}
    cpos = {int(c): i for i, c in enumerate(challenges)}

    n = len(students) + len(challenges)
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, c in pairs:
        si = spos[u]
        ci = len(students) + cpos[c]
        adj[si].append(ci)
        adj[ci].append(si)
    indptr = np.zeros(n + 1, dtype=np.int64)
    chunks = []
    for i, nbrs in enumerate(adj):
        nbrs.sort()
        chunks.append(np.asarray(nbrs, dtype=np.int64))
        indptr[i + 1] = indptr[i] + len(nbrs)
    indices = (np.concatenate(chunks) if chunks
               else np.zeros(0, dtype=np.int64))
    return BipartiteGraph(
        students=students, challenges=challenges,
        indptr=indptr, indices=indices,
        _student_pos=spos, _challenge_pos=cpos,
    )


def density(g: BipartiteGraph) -> float:
    """Bipartite density |E| / (|S| * |C|)."""
    if g.num_students == 0 or g.num_challenges == 0:
        raise ValueError("density undefined: one side of the graph is empty")
    return g.num_edges / (g.num_students * g.num_challenges)


def degree(g: BipartiteGraph, node: NodeKey) -> int:
    """Number of edges incident to `node` (typed key)."""
    i = g.node_index(node)
    return int(g.indptr[i + 1] - g.indptr[i])


def connected_components(g: BipartiteGraph) -> list[np.ndarray]:
    """Connected components as sorted arrays of internal indices."""
    n = g.num_nodes
    seen = np.zeros(n, dtype=bool)
    comps = []
    for start in range(n):
        if seen[start]:
            continue
        queue = deque([start])
        seen[start] = True
        comp = [start]
        while queue:
            cur = queue.popleft()
            for nbr in g.neighbors(cur):
                if not seen[nbr]:
                    seen[nbr] = True
                    comp.append(int(nbr))
                    queue.append(int(nbr))
        comps.append(np.array(sorted(comp), dtype=np.int64))
    return comps


@dataclass(frozen=True)
class CentralityMap:
    """Eigenvector centrality per node, aligned with internal indices."""

    graph: BipartiteGraph
    values: np.ndarray

    def of(self, key: NodeKey) -> float:
        return float(self.values[self.graph.node_index(key)])

    def as_dict(self) -> dict[NodeKey, float]:
        return {self.graph.node_key(i): float(v)
                for i, v in enumerate(self.values)}


def eigenvector_centrality(g: BipartiteGraph, tol: float = 1e-8,
                           max_iter: int = 1000) -> CentralityMap:
    """Principal-eigenvector centrality by power iteration on A + I.

    The identity shift removes the +/- eigenvalue symmetry of bipartite
    adjacency matrices (which makes plain power iteration oscillate) without
    changing eigenvectors. Iteration starts from all-ones and stops when
    successive L2-normalized vectors differ by less than `tol`. Disconnected
    graphs are handled per component, each component vector L2-normalized
    independently.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    n = g.num_nodes
    # symmetric edge list for the matvec: out[i] = sum_{j in N(i)} x[j]
    src = np.repeat(np.arange(n), np.diff(g.indptr))
    dst = g.indices
    values = np.zeros(n, dtype=np.float64)
    for comp in connected_components(g):
        x = np.zeros(n, dtype=np.float64)
        x[comp] = 1.0
        x[comp] /= np.linalg.norm(x[comp])
        converged = False
        residual = np.inf
        for _ in range(max_iter):
            y = x + np.bincount(src, weights=x[dst], minlength=n)
            norm = np.linalg.norm(y[comp])
            y[comp] /= norm
            residual = float(np.linalg.norm(y[comp] - x[comp]))
            x = y
            if residual < tol:
                converged = True
                break
        if not converged:
            raise ConvergenceError(residual, max_iter)
        values[comp] = x[comp]
    return CentralityMap(graph=g, values=values)


def graph_stats(g: BipartiteGraph) -> dict:
    """Summary dict for the graph-stats report (fixed field names)."""
    deg = g.degree_array()
    hist_vals, hist_counts = np.unique(deg, return_counts=True)
    return {
        "students": g.num_students,
        "challenges": g.num_challenges,
        "nodes": g.num_nodes,
        "edges": g.num_edges,
        "density": density(g),
        "degree_histogram": [[int(d), int(c)]
                             for d, c in zip(hist_vals, hist_counts)],
    }
