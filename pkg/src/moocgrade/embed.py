"""Random-walk node embeddings: uniform (DeepWalk-style) and second-order
biased (node2vec-style) walks fed to skip-gram with negative sampling.

Walks operate on the graph's internal node indices and are returned as an
int32 array with -1 padding past a truncated walk (only possible at an
isolated node). Each walk draws from its own SplitMix64 stream seeded from
(seed, node index, walk index), so generation order and thread count cannot
change the corpus.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from . import _backend
from .graph import BipartiteGraph, STUDENT
from .rng import SplitMix64, mix64

# stream tags so walk and training draws never collide
_WALK_TAG = 0x57414C4B
_SGNS_TAG = 0x53474E53
_INIT_TAG = 0x494E4954


class CoverageError(ValueError):
    """A node required in the embedding never appears in the walk corpus."""


@dataclass(frozen=True)
class WalkConfig:
    num_walks_per_node: int = 100
    walk_length: int = 10
    p: float = 1.0
    q: float = 1.0
    biased: bool = False   # False: uniform (DeepWalk); True: node2vec
    seed: int = 0

    def validate(self):
        if self.num_walks_per_node < 1:
            raise ValueError("num_walks_per_node must be >= 1")
        if self.walk_length < 2:
            raise ValueError("walk_length must be >= 2")
        if self.biased and (self.p <= 0 or self.q <= 0):
            raise ValueError("p and q must be positive")


@dataclass(frozen=True)
class SkipGramConfig:
    dimension: int = 128
    window: int = 10
    negatives_per_positive: int = 5
    epochs: int = 5
    initial_learning_rate: float = 0.025
    seed: int = 0

    def validate(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.negatives_per_positive < 1:
            raise ValueError("negatives_per_positive must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.initial_learning_rate <= 0:
            raise ValueError("initial_learning_rate must be positive")


@dataclass(frozen=True)
class EmbeddingTable:
    """node key -> dense vector, all vectors the same dimension."""

    vectors: dict
    dimension: int

    def __contains__(self, key):
        return key in self.vectors

    def __getitem__(self, key) -> np.ndarray:
        return self.vectors[key]

    def keys(self):
        return self.vectors.keys()

    def mean_vector(self) -> np.ndarray:
        return np.mean(np.stack(list(self.vectors.values())), axis=0)

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["node_type", "node_id"]
                        + [f"d_{i}" for i in range(self.dimension)])
        for key in sorted(self.vectors):
            side, ident = key
            writer.writerow([side, ident]
                            + [repr(float(x)) for x in self.vectors[key]])
        return out.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "EmbeddingTable":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if header[:2] != ["node_type", "node_id"]:
            raise ValueError("embedding CSV must start with "
                             "node_type,node_id columns")
        dim = len(header) - 2
        vectors = {}
        for row in reader:
            if not row:
                continue
            vectors[(row[0], int(row[1]))] = np.array(
                [float(x) for x in row[2:]], dtype=np.float64)
        return cls(vectors=vectors, dimension=dim)


def transition_weights(g: BipartiteGraph, prev: int, cur: int,
                       p: float, q: float) -> np.ndarray:
    """Unnormalized second-order weights over neighbors(cur), given prev.

    1/p to return to prev, 1 to a neighbor at distance 1 from prev, 1/q to a
    neighbor at distance 2. Indices are internal; order follows
    g.neighbors(cur).
    """
    nbrs = g.neighbors(cur)
    prev_nbrs = set(int(x) for x in g.neighbors(prev))
    w = np.empty(len(nbrs), dtype=np.float64)
    for idx, x in enumerate(nbrs):
        x = int(x)
        if x == prev:
            w[idx] = 1.0 / p
        elif x in prev_nbrs:
            w[idx] = 1.0
        else:
            w[idx] = 1.0 / q
    return w


def transition_distribution(g: BipartiteGraph, prev: int, cur: int,
                            p: float, q: float) -> np.ndarray:
    """Normalized biased transition probabilities over neighbors(cur)."""
    w = transition_weights(g, prev, cur, p, q)
    return w / w.sum()


def _walk_from(g: BipartiteGraph, start: int, cfg: WalkConfig,
               rng: SplitMix64, neighbor_sets, out: np.ndarray):
    out[0] = start
    cur = start
    prev = -1
    for pos in range(1, cfg.walk_length):
        nbrs = g.neighbors(cur)
        deg = len(nbrs)
        if deg == 0:
            return
        if not cfg.biased or prev < 0:
            nxt = int(nbrs[rng.below(deg)])
        else:
            # sequential scan of the unnormalized cumulative weights; the
            # middle (distance-1) case never fires on bipartite graphs but
            # is kept for correctness on general inputs
            prev_set = neighbor_sets[prev]
            total = 0.0
            weights = []
            for x in nbrs:
                x = int(x)
                if x == prev:
                    wgt = 1.0 / cfg.p
                elif x in prev_set:
                    wgt = 1.0
                else:
                    wgt = 1.0 / cfg.q
                weights.append(wgt)
                total += wgt
            r = rng.random() * total
            acc = 0.0
            nxt = int(nbrs[deg - 1])
            for idx, wgt in enumerate(weights):
                acc += wgt
                if r < acc:
                    nxt = int(nbrs[idx])
                    break
        out[pos] = nxt
        prev = cur
        cur = nxt


def generate_walks(g: BipartiteGraph, cfg: WalkConfig) -> np.ndarray:
    """All walks as an int32 array of internal node indices.

    Exactly num_walks_per_node * num_nodes rows, generated node-major in
    internal index order; -1 pads positions after an early truncation.
    """
    cfg.validate()
    if g.num_nodes == 0:
        raise ValueError("cannot generate walks on an empty graph")
    n = g.num_nodes
    walks = np.full((cfg.num_walks_per_node * n, cfg.walk_length), -1,
                    dtype=np.int32)
    neighbor_sets = None
    if cfg.biased:
        neighbor_sets = [frozenset(int(x) for x in g.neighbors(i))
                         for i in range(n)]
    # the stream is keyed by strategy too: biased(p=1,q=1) walks match
    # uniform walks in distribution but draw from different streams
    strategy = 1 if cfg.biased else 0
    row = 0
    for node in range(n):
        for widx in range(cfg.num_walks_per_node):
            rng = SplitMix64(mix64(cfg.seed, _WALK_TAG, strategy,
                                   node, widx))
            _walk_from(g, node, cfg, rng, neighbor_sets, walks[row])
            row += 1
    return walks


def make_unigram_cumulative(walks: np.ndarray, num_nodes: int,
                            power: float = 0.75) -> np.ndarray:
    """Cumulative unnormalized unigram^power table for negative sampling."""
    flat = walks[walks >= 0]
    counts = np.bincount(flat, minlength=num_nodes).astype(np.float64)
    return np.cumsum(counts ** power)


def train_skipgram(walks: np.ndarray, cfg: SkipGramConfig, *,
                   graph: BipartiteGraph | None = None,
                   num_nodes: int | None = None,
                   threads: int = 1,
                   on_epoch_end=None) -> EmbeddingTable:
    """Train skip-gram with negative sampling on a walk corpus.

    Returns the input-side ("center") vectors; context vectors are
    discarded. Single-threaded runs are deterministic under cfg.seed;
    threads > 1 uses hogwild shards on the compiled backend (documented as
    non-deterministic) and falls back to one thread otherwise.
    """
    cfg.validate()
    walks = np.ascontiguousarray(walks, dtype=np.int32)
    if walks.size == 0:
        raise ValueError("walk corpus is empty")
    if num_nodes is None:
        num_nodes = (graph.num_nodes if graph is not None
                     else int(walks.max()) + 1)
    flat = walks[walks >= 0]
    present = np.zeros(num_nodes, dtype=bool)
    present[flat] = True
    if not present.all():
        missing = int(np.flatnonzero(~present)[0])
        raise CoverageError(
            f"node {missing} (internal index) appears in no walk")

    cum = make_unigram_cumulative(walks, num_nodes)
    init_rng = np.random.default_rng(
        np.random.SeedSequence(mix64(cfg.seed, _INIT_TAG)))
    syn0 = ((init_rng.random((num_nodes, cfg.dimension)) - 0.5)
            / cfg.dimension)
    syn1 = np.zeros((num_nodes, cfg.dimension), dtype=np.float64)

    valid_per_walk = (walks >= 0).sum(axis=1)
    positions = int(valid_per_walk.sum())
    total_steps = cfg.epochs * positions
    alpha_min = cfg.initial_learning_rate * 1e-4

    kernels = _backend.get()
    state = mix64(cfg.seed, _SGNS_TAG)
    step = 0
    n_walks = walks.shape[0]
    use_threads = threads > 1 and getattr(kernels, "COMPILED", False)
    for epoch in range(cfg.epochs):
        if use_threads:
            state = _train_epoch_hogwild(
                kernels, syn0, syn1, walks, valid_per_walk, cfg, cum,
                alpha_min, epoch, positions, total_steps, state, threads)
            step = (epoch + 1) * positions
        else:
            state, step = kernels.sgns_train(
                syn0, syn1, walks, 0, n_walks, cfg.window,
                cfg.negatives_per_positive, cum,
                cfg.initial_learning_rate, alpha_min,
                step, total_steps, state)
        if on_epoch_end is not None:
            on_epoch_end(epoch, syn0, syn1)

    if graph is not None:
        vectors = {graph.node_key(i): syn0[i].copy()
                   for i in range(num_nodes)}
    else:
        vectors = {i: syn0[i].copy() for i in range(num_nodes)}
    return EmbeddingTable(vectors=vectors, dimension=cfg.dimension)


def _train_epoch_hogwild(kernels, syn0, syn1, walks, valid_per_walk, cfg,
                         cum, alpha_min, epoch, positions, total_steps,
                         state, threads):
    """Lock-free shard training; vector updates may race (hogwild)."""
    from concurrent.futures import ThreadPoolExecutor

    n_walks = walks.shape[0]
    bounds = [(s * n_walks) // threads for s in range(threads + 1)]
    prefix = np.concatenate([[0], np.cumsum(valid_per_walk)])

    def run(shard):
        lo, hi = bounds[shard], bounds[shard + 1]
        if lo == hi:
            return
        shard_state = mix64(state, epoch, shard)
        shard_step = epoch * positions + int(prefix[lo])
        kernels.sgns_train(
            syn0, syn1, walks, lo, hi, cfg.window,
            cfg.negatives_per_positive, cum, cfg.initial_learning_rate,
            alpha_min, shard_step, total_steps, shard_state)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(run, range(threads)))
    return mix64(state, epoch, threads)


def sgns_probe_loss(syn0: np.ndarray, syn1: np.ndarray,
                    pairs: np.ndarray, negatives: np.ndarray) -> float:
    """Mean negative-sampling objective on a fixed probe batch.

    pairs: (m, 2) center/context indices; negatives: (m, k) fixed draws.
    Lower is better.
    """
    u = syn0[pairs[:, 0]]
    v = syn1[pairs[:, 1]]
    pos = np.einsum("ij,ij->i", u, v)
    loss = -_log_sigmoid(pos)
    for col in range(negatives.shape[1]):
        vn = syn1[negatives[:, col]]
        loss -= _log_sigmoid(-np.einsum("ij,ij->i", u, vn))
    return float(loss.mean())


def _log_sigmoid(x):
    return np.where(x >= 0, -np.log1p(np.exp(-np.abs(x))),
                    x - np.log1p(np.exp(-np.abs(x))))


def embed_graph(g: BipartiteGraph, walk_cfg: WalkConfig,
                sg_cfg: SkipGramConfig, threads: int = 1) -> EmbeddingTable:
    """generate_walks then train_skipgram; the single pipeline entry point."""
    walks = generate_walks(g, walk_cfg)
    return train_skipgram(walks, sg_cfg, graph=g, threads=threads)


def embedding_table_to_sides(table: EmbeddingTable):
    """Split a graph-keyed table into per-side id -> vector dicts."""
    students = {}
    challenges = {}
    for (side, ident), vec in table.vectors.items():
        (students if side == STUDENT else challenges)[ident] = vec
    return students, challenges
