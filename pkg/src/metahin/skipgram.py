"""Skip-gram embedding of walk corpora with hierarchical softmax.

The softmax over the vocabulary is factorized along a Huffman tree built from
corpus frequencies: the probability of a context node is the product, over
the internal nodes on its root-to-leaf path, of a sigmoid of the dot product
between the center node's vector and that internal node's parameter vector.
Training is plain SGD, one step per (center, context) pair, with a linearly
decaying learning rate. No frequency subsampling and no window shrinking, so
the trained objective is exactly the sum of pairwise -log probabilities and
analytic gradients can be checked against finite differences.

With workers > 1 the updates are applied lock-free by several threads on
shared parameter arrays; races are permitted and results are not reproducible
in that mode.
"""

from __future__ import annotations

import heapq
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._jit import njit
from .graph import Hin, NodeId, NodeType

__all__ = [
    "SkipGramConfig",
    "HuffmanTree",
    "EmbeddingTable",
    "build_vocab_and_tree",
    "initial_table",
    "hs_probability",
    "pair_gradients",
    "corpus_nll",
    "train",
    "save_embeddings",
    "load_embeddings",
]


class EmptyCorpusError(ValueError):
    pass


class VocabError(KeyError):
    pass


@dataclass(frozen=True)
class SkipGramConfig:
    dimension: int = 64
    window: int = 5
    epochs: int = 3
    initial_lr: float = 0.025
    min_lr: float = 0.025e-4
    seed: int = 0
    workers: int = 1

    def __post_init__(self) -> None:
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.initial_lr > self.min_lr > 0:
            raise ValueError("need initial_lr > min_lr > 0")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


def _walks_of(corpus) -> list[list[NodeId]]:
    return corpus.walks if hasattr(corpus, "walks") else list(corpus)


class HuffmanTree:
    """Huffman coding of the corpus vocabulary plus the internal-node
    parameter vectors of the hierarchical softmax."""

    def __init__(self, node_ids: np.ndarray, counts: np.ndarray) -> None:
        self.node_ids = node_ids  # ascending
        self.counts = counts
        self.paths: list[np.ndarray] = []  # internal indices, root to parent
        self.codes: list[np.ndarray] = []  # 0 = first-merged child, 1 = second
        self.theta: np.ndarray | None = None
        self._build()

    @property
    def vocab_size(self) -> int:
        return len(self.node_ids)

    @property
    def num_internal(self) -> int:
        return max(self.vocab_size - 1, 0)

    def row_of(self, node_id: NodeId) -> int:
        row = int(np.searchsorted(self.node_ids, node_id))
        if row >= self.vocab_size or self.node_ids[row] != node_id:
            raise VocabError(f"node {node_id} is not in the corpus vocabulary")
        return row

    def code_length(self, node_id: NodeId) -> int:
        return len(self.codes[self.row_of(node_id)])

    def kraft_sum(self) -> float:
        return float(sum(2.0 ** -len(c) for c in self.codes))

    def init_parameters(self, dimension: int) -> None:
        self.theta = np.zeros((self.num_internal, dimension))

    def _build(self) -> None:
        v = self.vocab_size
        if v == 0:
            raise EmptyCorpusError("empty vocabulary")
        if v == 1:
            self.paths = [np.zeros(0, dtype=np.int64)]
            self.codes = [np.zeros(0, dtype=np.int8)]
            return
        # Heap entries (count, kind, serial): leaves sort before internal
        # nodes on equal counts, and lower node ids before higher ones, so the
        # tree is deterministic.
        heap: list[tuple[int, int, int]] = [
            (int(self.counts[i]), 0, i) for i in range(v)
        ]
        heapq.heapify(heap)
        parent = np.zeros(2 * v - 1, dtype=np.int64)
        side = np.zeros(2 * v - 1, dtype=np.int8)
        for m in range(v - 1):
            c1, _, first = heapq.heappop(heap)
            c2, _, second = heapq.heappop(heap)
            merged = v + m
            parent[first] = merged
            side[first] = 0
            parent[second] = merged
            side[second] = 1
            heapq.heappush(heap, (c1 + c2, 1, merged))
        root = 2 * v - 2
        for row in range(v):
            path = []
            codes = []
            node = row
            while node != root:
                codes.append(side[node])
                path.append(parent[node] - v)  # internal index in [0, v-1)
                node = parent[node]
            path.reverse()
            codes.reverse()
            self.paths.append(np.array(path, dtype=np.int64))
            self.codes.append(np.array(codes, dtype=np.int8))


def build_vocab_and_tree(corpus) -> HuffmanTree:
    """Huffman tree over all node ids occurring in the corpus, with
    frequencies equal to occurrence counts."""
    counts: dict[int, int] = {}
    for walk in _walks_of(corpus):
        for v in walk:
            counts[v] = counts.get(v, 0) + 1
    if not counts:
        raise EmptyCorpusError("corpus contains no nodes")
    node_ids = np.array(sorted(counts), dtype=np.int64)
    freq = np.array([counts[int(i)] for i in node_ids], dtype=np.int64)
    return HuffmanTree(node_ids, freq)


@dataclass
class EmbeddingTable:
    """d-dimensional input vector per embedded node, indexed by node id."""

    dimension: int
    node_ids: np.ndarray  # (V,) ascending
    vectors: np.ndarray  # (V, d) float64

    def __post_init__(self) -> None:
        self._row = {int(v): i for i, v in enumerate(self.node_ids)}

    def __len__(self) -> int:
        return len(self.node_ids)

    def has(self, node_id: NodeId) -> bool:
        return node_id in self._row

    def vector(self, node_id: NodeId) -> np.ndarray:
        row = self._row.get(node_id)
        if row is None:
            raise VocabError(f"node {node_id} has no embedding")
        return self.vectors[row]

    def get(self, node_id: NodeId) -> np.ndarray | None:
        row = self._row.get(node_id)
        return None if row is None else self.vectors[row]

    def rebind(self, source: Hin, target: Hin) -> "EmbeddingTable":
        """Re-key the table from one graph's ids to another's via (type, key).
        Nodes absent from the target graph are dropped."""
        ids = []
        rows = []
        for i, v in enumerate(self.node_ids):
            t, key = source.node_type(int(v)), source.node_key(int(v))
            if target.has_node(t, key):
                ids.append(target.id_of(t, key))
                rows.append(i)
        order = np.argsort(ids, kind="stable")
        new_ids = np.array([ids[i] for i in order], dtype=np.int64)
        new_vecs = self.vectors[[rows[i] for i in order]].copy()
        return EmbeddingTable(self.dimension, new_ids, new_vecs)


def initial_table(tree: HuffmanTree, cfg: SkipGramConfig) -> EmbeddingTable:
    """Fresh table, components uniform in [-0.5/d, 0.5/d], rows in id order."""
    rng = np.random.default_rng(cfg.seed)
    d = cfg.dimension
    vectors = rng.uniform(-0.5 / d, 0.5 / d, size=(tree.vocab_size, d))
    return EmbeddingTable(d, tree.node_ids.copy(), vectors)


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def hs_probability(
    tree: HuffmanTree, table: EmbeddingTable, center: NodeId, context: NodeId
) -> float:
    """P(context | center): product over the context's tree path of
    sigmoid(+-<X(center), theta>)."""
    if tree.theta is None:
        raise ValueError("tree parameters not initialized")
    x = table.vector(center)
    row = tree.row_of(context)
    p = 1.0
    for n, b in zip(tree.paths[row], tree.codes[row]):
        z = float(x @ tree.theta[n])
        p *= _sigmoid(z) if b == 0 else _sigmoid(-z)
    return p


def pair_gradients(
    tree: HuffmanTree, table: EmbeddingTable, center: NodeId, context: NodeId
) -> tuple[float, np.ndarray, dict[int, np.ndarray]]:
    """Loss -log P(context|center) with its analytic gradients w.r.t. the
    center vector and each internal parameter vector on the path."""
    if tree.theta is None:
        raise ValueError("tree parameters not initialized")
    x = table.vector(center)
    row = tree.row_of(context)
    loss = 0.0
    grad_x = np.zeros_like(x)
    grad_theta: dict[int, np.ndarray] = {}
    for n, b in zip(tree.paths[row], tree.codes[row]):
        z = float(x @ tree.theta[n])
        f = _sigmoid(z)
        loss -= math.log(_sigmoid(z) if b == 0 else _sigmoid(-z))
        g = f - 1.0 + float(b)  # d(-log p)/dz at this level
        grad_x += g * tree.theta[n]
        grad_theta[int(n)] = g * x
    return loss, grad_x, grad_theta


def corpus_nll(corpus, tree: HuffmanTree, table: EmbeddingTable, window: int) -> float:
    """Mean -log hs_probability over every (center, context) pair; the exact
    training objective, for small corpora."""
    total = 0.0
    pairs = 0
    for walk in _walks_of(corpus):
        n = len(walk)
        for j in range(n):
            for k in range(max(0, j - window), min(n, j + window + 1)):
                if k == j:
                    continue
                total -= math.log(hs_probability(tree, table, walk[j], walk[k]))
                pairs += 1
    return total / pairs if pairs else 0.0


# -- trainer -----------------------------------------------------------------


@njit(cache=True, nogil=True)
def _sgd_pairs(
    tokens,
    offsets,
    vectors,
    theta,
    path_flat,
    path_off,
    codes_flat,
    window,
    lr0,
    lr_min,
    step0,
    total_steps,
):
    """Sequential SGD over all pairs of the given walks. tokens holds vocab
    rows; offsets delimits walks. Returns the step counter after the pass."""
    d = vectors.shape[1]
    step = step0
    grad_x = np.zeros(d)
    for wi in range(offsets.shape[0] - 1):
        lo_w = offsets[wi]
        hi_w = offsets[wi + 1]
        for j in range(lo_w, hi_w):
            center = tokens[j]
            lo = j - window
            if lo < lo_w:
                lo = lo_w
            hi = j + window
            if hi > hi_w - 1:
                hi = hi_w - 1
            x = vectors[center]
            for kpos in range(lo, hi + 1):
                if kpos == j:
                    continue
                ctx = tokens[kpos]
                lr = lr0 - (lr0 - lr_min) * (step / total_steps)
                if lr < lr_min:
                    lr = lr_min
                step += 1
                for q in range(d):
                    grad_x[q] = 0.0
                for pp in range(path_off[ctx], path_off[ctx + 1]):
                    n = path_flat[pp]
                    z = 0.0
                    for q in range(d):
                        z += x[q] * theta[n, q]
                    f = 1.0 / (1.0 + np.exp(-z))
                    g = f - 1.0 + codes_flat[pp]
                    for q in range(d):
                        grad_x[q] += g * theta[n, q]
                        theta[n, q] -= lr * g * x[q]
                for q in range(d):
                    x[q] -= lr * grad_x[q]
    return step


def _token_arrays(
    walks: list[list[NodeId]], tree: HuffmanTree
) -> tuple[np.ndarray, np.ndarray]:
    lengths = np.array([len(w) for w in walks], dtype=np.int64)
    offsets = np.zeros(len(walks) + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    tokens = np.empty(int(offsets[-1]), dtype=np.int64)
    pos = 0
    for walk in walks:
        for v in walk:
            tokens[pos] = tree.row_of(v)
            pos += 1
    return tokens, offsets


def _flat_paths(tree: HuffmanTree) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    path_off = np.zeros(tree.vocab_size + 1, dtype=np.int64)
    for i, p in enumerate(tree.paths):
        path_off[i + 1] = path_off[i] + len(p)
    path_flat = np.concatenate(tree.paths) if tree.vocab_size > 1 else np.zeros(0, np.int64)
    codes_flat = (
        np.concatenate(tree.codes).astype(np.float64)
        if tree.vocab_size > 1
        else np.zeros(0)
    )
    return path_flat.astype(np.int64), path_off, codes_flat


def _count_pairs(offsets: np.ndarray, window: int) -> int:
    total = 0
    for wi in range(len(offsets) - 1):
        n = int(offsets[wi + 1] - offsets[wi])
        for j in range(n):
            total += min(n - 1, j + window) - max(0, j - window)
    return total


def train(
    corpus, cfg: SkipGramConfig, tree: HuffmanTree | None = None
) -> EmbeddingTable:
    """Train embeddings over the corpus; returns the table of input vectors.

    Passing a tree reuses its vocabulary and leaves the trained hierarchical
    softmax parameters on it (tree.theta), which tests use to evaluate the
    objective. Deterministic and byte-reproducible for workers == 1.
    """
    walks = _walks_of(corpus)
    if not walks:
        raise EmptyCorpusError("corpus is empty")
    if tree is None:
        tree = build_vocab_and_tree(walks)
    tree.init_parameters(cfg.dimension)
    table = initial_table(tree, cfg)
    tokens, offsets = _token_arrays(walks, tree)
    assert tree.theta is not None
    theta = tree.theta

    flat = _flat_paths(tree)
    per_epoch = _count_pairs(offsets, cfg.window)
    total_steps = max(per_epoch * cfg.epochs, 1)
    step = 0
    for _ in range(cfg.epochs):
        if cfg.workers == 1:
            step = _sgd_pairs(
                tokens,
                offsets,
                table.vectors,
                theta,
                *flat,
                cfg.window,
                cfg.initial_lr,
                cfg.min_lr,
                step,
                total_steps,
            )
        else:
            step = _parallel_epoch(
                tokens, offsets, table.vectors, theta, flat, cfg, step, total_steps
            )
        if not np.isfinite(table.vectors).all() or not np.isfinite(theta).all():
            raise FloatingPointError("non-finite parameter during training")
    return table


def _parallel_epoch(
    tokens, offsets, vectors, theta, flat, cfg, step0, total_steps
) -> int:
    """Lock-free epoch: walk shards run in threads over shared arrays."""
    n_walks = len(offsets) - 1
    shards = np.array_split(np.arange(n_walks), cfg.workers)
    jobs = []
    start = step0
    for shard in shards:
        if len(shard) == 0:
            continue
        sub_off = offsets[shard[0] : shard[-1] + 2]
        jobs.append((sub_off, start))
        start += _count_pairs(sub_off, cfg.window)
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        futures = [
            pool.submit(
                _sgd_pairs,
                tokens,
                sub_off,
                vectors,
                theta,
                *flat,
                cfg.window,
                cfg.initial_lr,
                cfg.min_lr,
                shard_step0,
                total_steps,
            )
            for sub_off, shard_step0 in jobs
        ]
        for f in futures:
            f.result()
    return start


# -- persistence --------------------------------------------------------------
#
# Text format: first line "N d", then one line per node,
# "TYPE:key v1 ... vd" with 17-significant-digit floats (exact float64
# round trip). Rows are sorted by (type, key).


def save_embeddings(table: EmbeddingTable, hin: Hin, path: str) -> None:
    entries = []
    for i, v in enumerate(table.node_ids):
        v = int(v)
        entries.append((hin.node_type(v), hin.node_key(v), i))
    entries.sort(key=lambda e: (e[0], e[1]))
    with open(path, "w", encoding="utf-8") as fobj:
        fobj.write(f"{len(table)} {table.dimension}\n")
        for t, key, row in entries:
            coords = " ".join(f"{x:.17g}" for x in table.vectors[row])
            fobj.write(f"{t.name}:{key} {coords}\n")


def load_embeddings(path: str, hin: Hin) -> EmbeddingTable:
    with open(path, "r", encoding="utf-8") as fobj:
        header = fobj.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: malformed embedding header")
        n, d = int(header[0]), int(header[1])
        ids = np.empty(n, dtype=np.int64)
        vectors = np.empty((n, d))
        for i in range(n):
            parts = fobj.readline().split()
            if len(parts) != d + 1:
                raise ValueError(f"{path}: row {i} has {len(parts) - 1} coordinates")
            type_name, _, key = parts[0].partition(":")
            ids[i] = hin.id_of(NodeType[type_name], key)
            vectors[i] = [float(x) for x in parts[1:]]
    order = np.argsort(ids, kind="stable")
    return EmbeddingTable(d, ids[order], vectors[order])
