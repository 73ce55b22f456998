"""Typed heterogeneous graph with type-indexed adjacency and schema validation.

Nodes carry an entity type and a string key; dense integer ids are handed out
in insertion order. Edges are undirected, unweighted, deduplicated, and must
connect a type pair allowed by the fixed schema (APP-API, APP-IMEI, APP-SIG,
APP-AFF, IMEI-SIG, IMEI-AFF). After construction the graph is treated as
immutable and is safe to share across threads for reads.
"""

from __future__ import annotations

import io
from bisect import bisect_left, insort
from enum import IntEnum
from typing import Iterable, Iterator, TextIO

NodeId = int


class NodeType(IntEnum):
    """Entity types. Integer order APP < SIG < AFF < IMEI < API is the
    breadth-first type order used when assembling representation matrices."""

    APP = 0
    SIG = 1
    AFF = 2
    IMEI = 3
    API = 4


class RelationType(IntEnum):
    R1_INVOKE = 1     # APP - API
    R2_EXIST = 2      # APP - IMEI
    R3_CERTIFY = 3    # APP - SIG
    R4_ASSOCIATE = 4  # APP - AFF
    R5_HAVE = 5       # IMEI - SIG
    R6_POSSESS = 6    # IMEI - AFF


# The schema has at most one relation per unordered type pair, so the relation
# of an edge is inferred from its endpoint types.
_SCHEMA: dict[frozenset[NodeType], RelationType] = {
    frozenset({NodeType.APP, NodeType.API}): RelationType.R1_INVOKE,
    frozenset({NodeType.APP, NodeType.IMEI}): RelationType.R2_EXIST,
    frozenset({NodeType.APP, NodeType.SIG}): RelationType.R3_CERTIFY,
    frozenset({NodeType.APP, NodeType.AFF}): RelationType.R4_ASSOCIATE,
    frozenset({NodeType.IMEI, NodeType.SIG}): RelationType.R5_HAVE,
    frozenset({NodeType.IMEI, NodeType.AFF}): RelationType.R6_POSSESS,
}


class GraphError(Exception):
    """Base class for graph construction errors."""


class DuplicateNodeError(GraphError):
    pass


class SchemaViolationError(GraphError):
    pass


class UnknownNodeError(GraphError):
    pass


def relation_for(a: NodeType, b: NodeType) -> RelationType:
    """Relation type connecting the pair (a, b), or SchemaViolationError."""
    rel = _SCHEMA.get(frozenset({a, b}))
    if rel is None:
        raise SchemaViolationError(f"no relation connects {a.name} and {b.name}")
    return rel


class Hin:
    """Heterogeneous graph: node table plus per-node per-type sorted adjacency."""

    def __init__(self) -> None:
        self._types: list[NodeType] = []
        self._keys: list[str] = []
        self._index: dict[tuple[NodeType, str], NodeId] = {}
        # adjacency[v][t] is the ascending list of type-t neighbors of v
        self._adj: list[dict[NodeType, list[NodeId]]] = []
        self._edge_count = 0

    # -- construction ------------------------------------------------------

    def add_node(self, node_type: NodeType, key: str) -> NodeId:
        if (node_type, key) in self._index:
            raise DuplicateNodeError(f"node {node_type.name}:{key} already exists")
        node_id = len(self._types)
        self._types.append(node_type)
        self._keys.append(key)
        self._index[(node_type, key)] = node_id
        self._adj.append({})
        return node_id

    def add_edge(self, src: NodeId, dst: NodeId) -> RelationType:
        """Insert an undirected edge; re-adding an existing edge is a no-op."""
        rel = relation_for(self.node_type(src), self.node_type(dst))
        if not self._insert_half_edge(src, dst):
            return rel
        self._insert_half_edge(dst, src)
        self._edge_count += 1
        return rel

    def _insert_half_edge(self, src: NodeId, dst: NodeId) -> bool:
        bucket = self._adj[src].setdefault(self.node_type(dst), [])
        pos = bisect_left(bucket, dst)
        if pos < len(bucket) and bucket[pos] == dst:
            return False
        bucket.insert(pos, dst)
        return True

    # -- lookups -----------------------------------------------------------

    @property
    def num_nodes(self) -> int:
        return len(self._types)

    @property
    def num_edges(self) -> int:
        return self._edge_count

    def node_type(self, v: NodeId) -> NodeType:
        try:
            return self._types[v]
        except IndexError:
            raise UnknownNodeError(f"no node with id {v}") from None

    def node_key(self, v: NodeId) -> str:
        self.node_type(v)
        return self._keys[v]

    def id_of(self, node_type: NodeType, key: str) -> NodeId:
        try:
            return self._index[(node_type, key)]
        except KeyError:
            raise UnknownNodeError(f"no node {node_type.name}:{key}") from None

    def has_node(self, node_type: NodeType, key: str) -> bool:
        return (node_type, key) in self._index

    def neighbors_of_type(self, v: NodeId, t: NodeType) -> list[NodeId]:
        """Ascending list of type-t neighbors of v (empty for none)."""
        self.node_type(v)
        return self._adj[v].get(t, [])

    def neighbors(self, v: NodeId) -> Iterator[NodeId]:
        """All neighbors of v grouped by type (fixed type order), ids ascending."""
        self.node_type(v)
        for t in NodeType:
            yield from self._adj[v].get(t, ())

    def degree(self, v: NodeId) -> int:
        return sum(len(b) for b in self._adj[v].values())

    def has_edge(self, u: NodeId, v: NodeId) -> bool:
        bucket = self._adj[u].get(self.node_type(v))
        if not bucket:
            return False
        pos = bisect_left(bucket, v)
        return pos < len(bucket) and bucket[pos] == v

    def nodes_of_type(self, t: NodeType) -> list[NodeId]:
        return [v for v in range(self.num_nodes) if self._types[v] == t]

    def edges(self) -> Iterator[tuple[NodeId, NodeId]]:
        """Each undirected edge once, as (u, v) with u < v, in id order."""
        for u in range(self.num_nodes):
            for t in NodeType:
                for v in self._adj[u].get(t, ()):
                    if u < v:
                        yield u, v

    # -- derived graphs ----------------------------------------------------

    def canonical_subgraph(self, exclude: Iterable[NodeId] = ()) -> "Hin":
        """Copy of this graph without `exclude` nodes (and their edges).

        Node ids in the copy are assigned in (type, key) order, so two graphs
        with equal node sets and edge sets get identical ids regardless of the
        order their inputs arrived in. Nodes left without any edge are dropped
        unless they carry type APP (an app stays addressable even if isolated).
        """
        excluded = set(exclude)
        kept_edges: list[tuple[NodeId, NodeId]] = []
        touched: set[NodeId] = set()
        for u, v in self.edges():
            if u in excluded or v in excluded:
                continue
            kept_edges.append((u, v))
            touched.add(u)
            touched.add(v)
        kept_nodes = [
            v
            for v in range(self.num_nodes)
            if v not in excluded and (v in touched or self._types[v] == NodeType.APP)
        ]
        kept_nodes.sort(key=lambda v: (self._types[v], self._keys[v]))
        sub = Hin()
        mapping = {}
        for v in kept_nodes:
            mapping[v] = sub.add_node(self._types[v], self._keys[v])
        for u, v in kept_edges:
            sub.add_edge(mapping[u], mapping[v])
        return sub


# -- edge-list serialization -----------------------------------------------
#
# One edge per line: src_type<TAB>src_key<TAB>dst_type<TAB>dst_key.
# Lines starting with '#' are comments, except '#node<TAB>TYPE<TAB>key' which
# declares an isolated node so the node set survives a round trip.


class EdgeFileError(GraphError):
    """Malformed edge-list or label file; carries the offending line number."""

    def __init__(self, path: str, lineno: int, message: str) -> None:
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = path
        self.lineno = lineno


def _parse_type(token: str, path: str, lineno: int) -> NodeType:
    try:
        return NodeType[token]
    except KeyError:
        raise EdgeFileError(path, lineno, f"unknown node type {token!r}") from None


def write_edges(hin: Hin, fobj: TextIO) -> None:
    linked: set[NodeId] = set()
    for u, v in hin.edges():
        linked.add(u)
        linked.add(v)
    for v in range(hin.num_nodes):
        if v not in linked:
            fobj.write(f"#node\t{hin.node_type(v).name}\t{hin.node_key(v)}\n")
    for u, v in hin.edges():
        fobj.write(
            f"{hin.node_type(u).name}\t{hin.node_key(u)}\t"
            f"{hin.node_type(v).name}\t{hin.node_key(v)}\n"
        )


def save_edges(hin: Hin, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fobj:
        write_edges(hin, fobj)


def read_edges(fobj: TextIO, path: str = "<edges>") -> Hin:
    hin = Hin()

    def intern(t: NodeType, key: str) -> NodeId:
        if hin.has_node(t, key):
            return hin.id_of(t, key)
        return hin.add_node(t, key)

    for lineno, raw in enumerate(fobj, start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        if line.startswith("#"):
            parts = line.split("\t")
            if parts[0] == "#node":
                if len(parts) != 3:
                    raise EdgeFileError(path, lineno, "expected #node\\tTYPE\\tkey")
                intern(_parse_type(parts[1], path, lineno), parts[2])
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise EdgeFileError(
                path, lineno, f"expected 4 tab-separated fields, got {len(parts)}"
            )
        src_t = _parse_type(parts[0], path, lineno)
        dst_t = _parse_type(parts[2], path, lineno)
        try:
            hin.add_edge(intern(src_t, parts[1]), intern(dst_t, parts[3]))
        except SchemaViolationError as exc:
            raise EdgeFileError(path, lineno, str(exc)) from None
    return hin


def load_edges(path: str) -> Hin:
    with open(path, "r", encoding="utf-8") as fobj:
        return read_edges(fobj, path)


def edges_as_text(hin: Hin) -> str:
    buf = io.StringIO()
    write_edges(hin, buf)
    return buf.getvalue()
