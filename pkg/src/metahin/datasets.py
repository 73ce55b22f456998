"""Labeled datasets: real-format loaders and a synthetic generator.

The synthetic generator plants a two-class structure: apps of each class
prefer entities from their own class's half of every entity pool. Phone-level
relations (IMEI-SIG, IMEI-AFF) are then induced from co-installation, the way
they arise in real data, so the longer meta-paths stay informative.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .graph import (
    EdgeFileError,
    Hin,
    NodeId,
    NodeType,
    UnknownNodeError,
    load_edges,
)


@dataclass
class LabeledDataset:
    hin: Hin
    labels: dict[NodeId, int]  # APP node id -> {0 benign, 1 malicious}
    in_sample: set[NodeId]
    out_of_sample: set[NodeId]

    def __post_init__(self) -> None:
        for v in self.labels:
            if self.hin.node_type(v) != NodeType.APP:
                raise ValueError("labels are defined on APP nodes only")
        if self.in_sample & self.out_of_sample:
            raise ValueError("in_sample and out_of_sample overlap")
        if self.in_sample | self.out_of_sample != set(self.labels):
            raise ValueError("split must cover exactly the labeled apps")


def read_labels(path: str, hin: Hin) -> dict[NodeId, int]:
    """Parse 'app_key<TAB>label' lines; every key must be an APP node."""
    labels: dict[NodeId, int] = {}
    with open(path, "r", encoding="utf-8") as fobj:
        for lineno, raw in enumerate(fobj, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise EdgeFileError(path, lineno, "expected app_key<TAB>label")
            key, label_str = parts
            if label_str not in ("0", "1"):
                raise EdgeFileError(path, lineno, f"label must be 0 or 1, got {label_str!r}")
            if not hin.has_node(NodeType.APP, key):
                raise UnknownNodeError(
                    f"{path}:{lineno}: label references unknown app {key!r}"
                )
            labels[hin.id_of(NodeType.APP, key)] = int(label_str)
    return labels


def split_holdout(
    labeled: list[NodeId], holdout_fraction: float, seed: int
) -> tuple[set[NodeId], set[NodeId]]:
    """Deterministic split; floor(fraction * n) nodes go out of sample."""
    if not 0.0 <= holdout_fraction < 1.0:
        raise ValueError("holdout_fraction must be in [0, 1)")
    ordered = sorted(labeled)
    n_out = int(holdout_fraction * len(ordered))
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(ordered))
    out = {ordered[i] for i in perm[:n_out]}
    return set(ordered) - out, out


def load_dataset(
    edge_path: str, label_path: str, holdout_fraction: float, seed: int
) -> LabeledDataset:
    hin = load_edges(edge_path)
    labels = read_labels(label_path, hin)
    in_sample, out = split_holdout(sorted(labels), holdout_fraction, seed)
    return LabeledDataset(hin, labels, in_sample, out)


def write_labels(ds: LabeledDataset, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fobj:
        for v in sorted(ds.labels):
            fobj.write(f"{ds.hin.node_key(v)}\t{ds.labels[v]}\n")


# -- synthetic generation ----------------------------------------------------

# Entity pools an app links to directly, with key prefixes for readability.
_APP_RELATION_POOLS: tuple[tuple[NodeType, str], ...] = (
    (NodeType.API, "api"),
    (NodeType.IMEI, "imei"),
    (NodeType.SIG, "sig"),
    (NodeType.AFF, "aff"),
)


@dataclass(frozen=True)
class SynthConfig:
    n_apps_per_class: int = 500
    n_api: int = 200
    n_imei: int = 150
    n_sig: int = 100
    n_aff: int = 100
    p_intra: float = 0.9
    p_inter: float = 0.1
    mean_degree: float = 5.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_inter < self.p_intra <= 1.0:
            raise ValueError("need 0 <= p_inter < p_intra <= 1")
        for name in ("n_apps_per_class", "n_api", "n_imei", "n_sig", "n_aff"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.mean_degree <= 0:
            raise ValueError("mean_degree must be positive")

    def pool_size(self, t: NodeType) -> int:
        return {
            NodeType.API: self.n_api,
            NodeType.IMEI: self.n_imei,
            NodeType.SIG: self.n_sig,
            NodeType.AFF: self.n_aff,
        }[t]


def synth_hin(cfg: SynthConfig) -> LabeledDataset:
    """Two-class planted HIN; all labeled apps start in sample.

    Each app draws Poisson(mean_degree) links per app-incident relation; each
    link targets the app's own class half of the pool with probability
    p_intra/(p_intra+p_inter), else the other half. IMEI-SIG and IMEI-AFF
    edges are induced by co-installation afterwards.
    """
    rng = np.random.default_rng(cfg.seed)
    hin = Hin()
    labels: dict[NodeId, int] = {}

    apps: list[NodeId] = []
    for cls in (0, 1):
        for i in range(cfg.n_apps_per_class):
            v = hin.add_node(NodeType.APP, f"app{cls}_{i:05d}")
            labels[v] = cls
            apps.append(v)

    pools: dict[NodeType, list[NodeId]] = {}
    for t, prefix in _APP_RELATION_POOLS:
        pools[t] = [
            hin.add_node(t, f"{prefix}{i:05d}") for i in range(cfg.pool_size(t))
        ]

    p_own = cfg.p_intra / (cfg.p_intra + cfg.p_inter)
    for app in apps:
        cls = labels[app]
        for t, _ in _APP_RELATION_POOLS:
            pool = pools[t]
            half = len(pool) // 2
            own = pool[:half] if cls == 0 else pool[half:]
            other = pool[half:] if cls == 0 else pool[:half]
            n_links = rng.poisson(cfg.mean_degree)
            for _ in range(n_links):
                side = own if rng.random() < p_own else other
                if not side:
                    side = own or other
                hin.add_edge(app, side[rng.integers(len(side))])

    # Phone-level relations induced by co-installation: a phone "has" the
    # signatures and "possesses" the affiliations of its installed apps.
    for imei in pools[NodeType.IMEI]:
        for app in hin.neighbors_of_type(imei, NodeType.APP):
            for sig in hin.neighbors_of_type(app, NodeType.SIG):
                hin.add_edge(imei, sig)
            for aff in hin.neighbors_of_type(app, NodeType.AFF):
                hin.add_edge(imei, aff)

    return LabeledDataset(hin, labels, set(labels), set())


def with_holdout(ds: LabeledDataset, holdout_fraction: float, seed: int) -> LabeledDataset:
    """Same graph and labels, re-split with the given holdout."""
    in_sample, out = split_holdout(sorted(ds.labels), holdout_fraction, seed)
    return LabeledDataset(ds.hin, ds.labels, in_sample, out)


def synth_manifest(cfg: SynthConfig) -> str:
    doc = {"generator": "synth_hin", "config": asdict(cfg)}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
