"""Per-node representation matrices from frozen embeddings.

A node's matrix stacks its own embedding (row 0) with the embeddings of its
1st..k-th order neighbors, each order truncated to a fixed row budget and
zero-padded where rows are missing or a neighbor has no stored embedding.
Order m holds the nodes at shortest-path distance m; within an order, nodes
are arranged by type in the fixed order APP, SIG, AFF, IMEI, API, then by id.
Because only adjacency local to the node is touched and embeddings are read
from a frozen table, building a matrix costs O(rows x dimension) lookups plus
local neighbor enumeration, independent of graph size at bounded degree.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .graph import Hin, NodeId
from .skipgram import EmbeddingTable


@dataclass(frozen=True)
class NeighborBudget:
    """Row budget: 1 row for the node itself plus t_k rows per order."""

    per_order: tuple[int, ...] = (21, 42)

    def __post_init__(self) -> None:
        if len(self.per_order) < 1:
            raise ValueError("need at least one order")
        if any(t < 0 for t in self.per_order):
            raise ValueError("per-order budgets must be nonnegative")
        if self.rows < 2:
            raise ValueError("total rows must be >= 2")

    @property
    def max_order(self) -> int:
        return len(self.per_order)

    @property
    def rows(self) -> int:
        return 1 + sum(self.per_order)

    @classmethod
    def square(cls, dimension: int, max_order: int = 2) -> "NeighborBudget":
        """Budget with total rows equal to the embedding dimension, the
        remaining rows split 1:2:... across orders (later orders are larger)."""
        remaining = dimension - 1
        weights = list(range(1, max_order + 1))
        total_w = sum(weights)
        per_order = [remaining * w // total_w for w in weights]
        per_order[-1] += remaining - sum(per_order)
        return cls(tuple(per_order))


def k_order_neighbors(hin: Hin, v: NodeId, k: int) -> list[list[NodeId]]:
    """Neighbor sets S(1)..S(k): S(m) holds the nodes first reached at step m
    (set semantics, already-seen nodes excluded), each sorted by type in the
    fixed BFS order, then by id."""
    seen = {v}
    frontier = [v]
    orders: list[list[NodeId]] = []
    for _ in range(k):
        nxt: set[NodeId] = set()
        for u in frontier:
            for w in hin.neighbors(u):
                if w not in seen:
                    nxt.add(w)
        layer = sorted(nxt, key=lambda u: (hin.node_type(u), u))
        orders.append(layer)
        seen.update(nxt)
        frontier = layer
    return orders


def build_repr_matrix(
    hin: Hin, table: EmbeddingTable, v: NodeId, budget: NeighborBudget
) -> np.ndarray:
    """(rows x d) matrix: row 0 the node's own embedding, then each order's
    neighbors truncated to its budget; zero rows where nothing is available."""
    d = table.dimension
    matrix = np.zeros((budget.rows, d))
    own = table.get(v)
    if own is not None:
        matrix[0] = own
    orders = k_order_neighbors(hin, v, budget.max_order)
    row = 1
    for t_m, layer in zip(budget.per_order, orders):
        for i, u in enumerate(layer[:t_m]):
            vec = table.get(u)
            if vec is not None:
                matrix[row + i] = vec
        row += t_m
    return matrix


def local_avg(hin: Hin, table: EmbeddingTable, v: NodeId) -> np.ndarray:
    """Mean embedding of the direct neighbors present in the table; the zero
    vector when none are embedded."""
    vecs = [table.get(u) for u in hin.neighbors(v)]
    vecs = [x for x in vecs if x is not None]
    if not vecs:
        return np.zeros(table.dimension)
    return np.mean(vecs, axis=0)


# -- dumps --------------------------------------------------------------------

_MAGIC = b"RMX1"


def write_matrix(matrix: np.ndarray, path: str) -> None:
    """Binary dump: magic, little-endian int32 (rows, cols), then row-major
    float64 values."""
    rows, cols = matrix.shape
    with open(path, "wb") as fobj:
        fobj.write(_MAGIC)
        fobj.write(struct.pack("<ii", rows, cols))
        fobj.write(np.ascontiguousarray(matrix, dtype="<f8").tobytes())


def read_matrix(path: str) -> np.ndarray:
    with open(path, "rb") as fobj:
        magic = fobj.read(4)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a matrix dump")
        rows, cols = struct.unpack("<ii", fobj.read(8))
        data = np.frombuffer(fobj.read(rows * cols * 8), dtype="<f8")
    return data.reshape(rows, cols).astype(np.float64)


def matrix_to_json(matrix: np.ndarray) -> str:
    return json.dumps(
        {"rows": matrix.shape[0], "cols": matrix.shape[1], "data": matrix.tolist()}
    )


def matrix_from_json(text: str) -> np.ndarray:
    doc = json.loads(text)
    return np.array(doc["data"], dtype=np.float64).reshape(doc["rows"], doc["cols"])
