"""Meta-paths: ordered node-type sequences over the graph schema.

A meta-path starts and ends at APP and every consecutive type pair must be a
schema relation. Walks are guided by a set of meta-paths; at an app node the
walker picks the next node type with weight lambda(T)/|S| where lambda(T)
counts member paths whose second type is T.

Text format, one path per line::

    PID1: APP-API-APP
    PID5: APP-AFF-IMEI-AFF-APP

Blank lines separate groups when a file defines several walk groups.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .graph import NodeType, SchemaViolationError, relation_for


class MetaPathError(ValueError):
    pass


@dataclass(frozen=True)
class MetaPath:
    path_id: str
    types: tuple[NodeType, ...]

    def __post_init__(self) -> None:
        if len(self.types) < 3:
            raise MetaPathError(f"{self.path_id}: a meta-path needs at least 3 types")
        if self.types[0] != NodeType.APP or self.types[-1] != NodeType.APP:
            raise MetaPathError(f"{self.path_id}: meta-paths start and end at APP")
        for a, b in zip(self.types, self.types[1:]):
            try:
                relation_for(a, b)
            except SchemaViolationError:
                raise MetaPathError(
                    f"{self.path_id}: {a.name}-{b.name} is not a schema relation"
                ) from None

    def __str__(self) -> str:
        return f"{self.path_id}: " + "-".join(t.name for t in self.types)


@dataclass(frozen=True)
class MetaPathSet:
    paths: tuple[MetaPath, ...]
    _lambda: dict[NodeType, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.paths:
            raise MetaPathError("a meta-path set must not be empty")
        ids = [p.path_id for p in self.paths]
        if len(set(ids)) != len(ids):
            raise MetaPathError(f"duplicate path ids in {ids}")
        lam: dict[NodeType, int] = {}
        for p in self.paths:
            lam[p.types[1]] = lam.get(p.types[1], 0) + 1
        object.__setattr__(self, "_lambda", lam)

    def __len__(self) -> int:
        return len(self.paths)

    def __iter__(self):
        return iter(self.paths)

    def lam(self, second_type: NodeType) -> int:
        """Number of member paths whose first hop is APP -> second_type."""
        return self._lambda.get(second_type, 0)

    def second_types(self) -> list[NodeType]:
        return sorted(self._lambda)

    def paths_with_second_type(self, t: NodeType) -> list[MetaPath]:
        return [p for p in self.paths if p.types[1] == t]


def parse_metapath(line: str) -> MetaPath:
    """Parse one 'ID: TYPE-TYPE-...' line."""
    if ":" not in line:
        raise MetaPathError(f"expected 'ID: TYPE-TYPE-...', got {line!r}")
    path_id, _, rest = line.partition(":")
    names = [tok.strip() for tok in rest.strip().split("-")]
    types = []
    for name in names:
        try:
            types.append(NodeType[name])
        except KeyError:
            raise MetaPathError(f"{path_id.strip()}: unknown node type {name!r}") from None
    return MetaPath(path_id.strip(), tuple(types))


def parse_metapath_groups(text: str) -> list[MetaPathSet]:
    """Parse a meta-path spec; blank lines split groups, '#' starts a comment."""
    groups: list[list[MetaPath]] = [[]]
    for raw in text.splitlines():
        line = raw.strip()
        if line.startswith("#"):
            continue
        if not line:
            if groups[-1]:
                groups.append([])
            continue
        groups[-1].append(parse_metapath(line))
    if not groups[-1]:
        groups.pop()
    if not groups:
        raise MetaPathError("meta-path spec defines no paths")
    return [MetaPathSet(tuple(g)) for g in groups]


def load_metapath_groups(path: str) -> list[MetaPathSet]:
    with open(path, "r", encoding="utf-8") as fobj:
        return parse_metapath_groups(fobj.read())


def _mk(path_id: str, *names: str) -> MetaPath:
    return MetaPath(path_id, tuple(NodeType[n] for n in names))


# Default catalogue: the schema-consistent symmetric app-to-app paths of
# length <= 5 touching each relation.
PID1 = _mk("PID1", "APP", "API", "APP")
PID2 = _mk("PID2", "APP", "IMEI", "APP")
PID3 = _mk("PID3", "APP", "SIG", "APP")
PID4 = _mk("PID4", "APP", "AFF", "APP")
PID5 = _mk("PID5", "APP", "AFF", "IMEI", "AFF", "APP")
PID6 = _mk("PID6", "APP", "SIG", "IMEI", "SIG", "APP")

DEFAULT_PATHS: dict[str, MetaPath] = {
    p.path_id: p for p in (PID1, PID2, PID3, PID4, PID5, PID6)
}

# Default walk grouping; one corpus is sampled per group and the corpora are
# concatenated before embedding.
DEFAULT_GROUPS: tuple[MetaPathSet, ...] = (
    MetaPathSet((PID1,)),
    MetaPathSet((PID3, PID4)),
    MetaPathSet((PID2, PID5, PID6)),
)


def default_groups() -> list[MetaPathSet]:
    return list(DEFAULT_GROUPS)


def format_groups(groups: list[MetaPathSet]) -> str:
    blocks = ["\n".join(str(p) for p in g) for g in groups]
    return "\n\n".join(blocks) + "\n"
