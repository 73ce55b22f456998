"""Meta-path guided random walks over a typed graph.

At an app node the walker resamples the active meta-path uniformly among the
paths whose first hop is realizable (there is at least one neighbor of the
path's second type); this realizes the lambda-weighted type mixture over next
nodes, renormalized over realizable moves. At a non-app node the walker
advances along the active path, choosing uniformly among neighbors of the
next required type. A walk truncates when no move is realizable.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .graph import Hin, NodeId, NodeType
from .metapaths import MetaPath, MetaPathSet

WalkState = tuple[MetaPath, int]


@dataclass(frozen=True)
class WalkConfig:
    walks_per_node: int = 20
    walk_length: int = 50  # nodes per walk, counting the start node
    seed: int = 0

    def __post_init__(self) -> None:
        if self.walks_per_node < 1:
            raise ValueError("walks_per_node must be >= 1")
        if self.walk_length < 2:
            raise ValueError("walk_length must be >= 2")


@dataclass
class WalkCorpus:
    walks: list[list[NodeId]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.walks)

    def extend(self, other: "WalkCorpus") -> None:
        self.walks.extend(other.walks)

    def node_ids(self) -> set[NodeId]:
        seen: set[NodeId] = set()
        for walk in self.walks:
            seen.update(walk)
        return seen


def transition_weights(
    hin: Hin,
    v: NodeId,
    state: WalkState | None,
    paths: MetaPathSet,
) -> dict[NodeId, float]:
    """Exact next-node distribution at v; empty dict signals a dead end.

    `state` is the (active meta-path, position of v within it) pair; it is
    ignored at app nodes, where the active path is resampled.
    """
    if hin.node_type(v) == NodeType.APP:
        realizable = 0
        buckets: list[tuple[int, list[NodeId]]] = []
        for t in paths.second_types():
            neigh = hin.neighbors_of_type(v, t)
            if neigh:
                lam = paths.lam(t)
                realizable += lam
                buckets.append((lam, neigh))
        if realizable == 0:
            return {}
        weights: dict[NodeId, float] = {}
        for lam, neigh in buckets:
            w = lam / (realizable * len(neigh))
            for u in neigh:
                weights[u] = weights.get(u, 0.0) + w
        return weights
    if state is None:
        raise ValueError("state is required at non-APP nodes")
    path, pos = state
    if path.types[pos] != hin.node_type(v):
        raise ValueError(
            f"state mismatch: node is {hin.node_type(v).name}, "
            f"path position holds {path.types[pos].name}"
        )
    neigh = hin.neighbors_of_type(v, path.types[pos + 1])
    if not neigh:
        return {}
    w = 1.0 / len(neigh)
    return {u: w for u in neigh}


def generate_walk(
    hin: Hin,
    start: NodeId,
    walk_length: int,
    paths: MetaPathSet,
    rng: np.random.Generator,
) -> list[NodeId]:
    """One walk of at most walk_length nodes starting at an app node."""
    if hin.node_type(start) != NodeType.APP:
        raise ValueError("walks start at APP nodes")
    walk = [start]
    active: MetaPath | None = None
    pos = 0
    while len(walk) < walk_length:
        v = walk[-1]
        if hin.node_type(v) == NodeType.APP:
            realizable = [
                p for p in paths if hin.neighbors_of_type(v, p.types[1])
            ]
            if not realizable:
                break
            active = realizable[rng.integers(len(realizable))]
            pos = 0
        assert active is not None
        neigh = hin.neighbors_of_type(v, active.types[pos + 1])
        if not neigh:
            break
        walk.append(neigh[rng.integers(len(neigh))])
        pos += 1
    return walk


def _start_rng(seed: int, key: str) -> np.random.Generator:
    """Independent substream per start node, keyed by the node's string key
    so parallel and serial corpus builds agree."""
    salt = int.from_bytes(
        hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest(), "little"
    )
    return np.random.default_rng([seed, salt])


def build_corpus(
    hin: Hin,
    cfg: WalkConfig,
    paths: MetaPathSet,
    app_nodes: list[NodeId],
) -> WalkCorpus:
    """Exactly cfg.walks_per_node walks from each app node, deterministically."""
    if not app_nodes:
        raise ValueError("app_nodes must be nonempty")
    corpus = WalkCorpus()
    for v in sorted(app_nodes):
        rng = _start_rng(cfg.seed, hin.node_key(v))
        for _ in range(cfg.walks_per_node):
            corpus.walks.append(generate_walk(hin, v, cfg.walk_length, paths, rng))
    return corpus


def build_grouped_corpus(
    hin: Hin,
    cfg: WalkConfig,
    groups: list[MetaPathSet],
    app_nodes: list[NodeId],
) -> WalkCorpus:
    """Concatenation of one corpus per meta-path group.

    Groups get distinct seed offsets so their walks are independent draws.
    """
    corpus = WalkCorpus()
    for gi, group in enumerate(groups):
        sub = build_corpus(
            hin,
            WalkConfig(cfg.walks_per_node, cfg.walk_length, seed=cfg.seed + gi),
            group,
            app_nodes,
        )
        corpus.extend(sub)
    return corpus


def walk_is_metapath_consistent(
    hin: Hin, walk: list[NodeId], paths: MetaPathSet
) -> bool:
    """True when the walk's type sequence decomposes into meta-path prefixes
    from `paths` (split at APP visits) and every consecutive pair is an edge."""
    if not walk or hin.node_type(walk[0]) != NodeType.APP:
        return False
    for u, v in zip(walk, walk[1:]):
        if not hin.has_edge(u, v):
            return False
    # NFA over (path, position) states; APP tokens reset the active set.
    active: set[tuple[MetaPath, int]] = set()
    for i, v in enumerate(walk):
        t = hin.node_type(v)
        if t == NodeType.APP:
            if i > 0 and not any(p.types[pos + 1] == t for p, pos in active):
                return False
            active = {(p, 0) for p in paths}
        else:
            advanced = {
                (p, pos + 1) for p, pos in active if p.types[pos + 1] == t
            }
            if not advanced:
                return False
            active = advanced
    return True


def write_corpus(corpus: WalkCorpus, hin: Hin, path: str) -> None:
    """One walk per line, space-separated TYPE:key tokens."""
    with open(path, "w", encoding="utf-8") as fobj:
        for walk in corpus.walks:
            fobj.write(
                " ".join(
                    f"{hin.node_type(v).name}:{hin.node_key(v)}" for v in walk
                )
                + "\n"
            )


def read_corpus(path: str, hin: Hin) -> WalkCorpus:
    corpus = WalkCorpus()
    with open(path, "r", encoding="utf-8") as fobj:
        for line in fobj:
            tokens = line.split()
            if not tokens:
                continue
            walk = []
            for tok in tokens:
                type_name, _, key = tok.partition(":")
                walk.append(hin.id_of(NodeType[type_name], key))
            corpus.walks.append(walk)
    return corpus
