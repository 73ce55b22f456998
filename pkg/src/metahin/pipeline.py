"""End-to-end orchestration: embed the in-sample graph, build representation
matrices, train the classifier, and score new nodes against frozen artifacts.

Out-of-sample apps are excluded from the embedding graph entirely, not just
from walk starts, so deleting them from the input files reproduces the same
embeddings and model byte for byte (no test leakage). Prediction reads only
the frozen embedding table; nothing is retrained when new nodes arrive.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .datasets import LabeledDataset
from .graph import Hin, NodeId, NodeType
from .metapaths import MetaPathSet, default_groups, format_groups, parse_metapath_groups
from .metrics import Metrics, evaluate
from .nn import DnnConfig, DnnModel, Prediction, load_model, save_model
from .nn import train as train_dnn
from .reprmatrix import NeighborBudget, build_repr_matrix
from .skipgram import (
    EmbeddingTable,
    SkipGramConfig,
    load_embeddings,
    save_embeddings,
    train as train_skipgram,
)
from .walks import WalkConfig, build_grouped_corpus

__all__ = [
    "PipelineConfig",
    "PipelineArtifacts",
    "fit",
    "predict",
    "predict_many",
    "evaluate",
    "embedding_stage",
    "matrix_stage",
    "row_vector_matrix",
]


@dataclass(frozen=True)
class PipelineConfig:
    groups: tuple[MetaPathSet, ...] = ()
    walk: WalkConfig = WalkConfig()
    skipgram: SkipGramConfig = SkipGramConfig()
    budget: NeighborBudget | None = None
    dnn: DnnConfig | None = None
    holdout_fraction: float = 0.2
    split_seed: int = 0

    def resolved(self) -> "PipelineConfig":
        """Fill derived fields: default groups, a square budget matching the
        embedding dimension, and the classifier input shape."""
        groups = self.groups or tuple(default_groups())
        budget = self.budget or NeighborBudget.square(self.skipgram.dimension)
        dnn = self.dnn or DnnConfig(
            input_rows=budget.rows, input_cols=self.skipgram.dimension
        )
        if dnn.input_rows != budget.rows or dnn.input_cols != self.skipgram.dimension:
            raise ValueError(
                f"classifier input {dnn.input_rows}x{dnn.input_cols} does not match "
                f"budget rows {budget.rows} x dimension {self.skipgram.dimension}"
            )
        return PipelineConfig(
            groups,
            self.walk,
            self.skipgram,
            budget,
            dnn,
            self.holdout_fraction,
            self.split_seed,
        )

    def to_json(self) -> str:
        cfg = self.resolved()
        assert cfg.budget is not None and cfg.dnn is not None
        doc = {
            "meta_paths": format_groups(list(cfg.groups)),
            "walk": {
                "walks_per_node": cfg.walk.walks_per_node,
                "walk_length": cfg.walk.walk_length,
                "seed": cfg.walk.seed,
            },
            "skipgram": {
                "dimension": cfg.skipgram.dimension,
                "window": cfg.skipgram.window,
                "epochs": cfg.skipgram.epochs,
                "initial_lr": cfg.skipgram.initial_lr,
                "min_lr": cfg.skipgram.min_lr,
                "seed": cfg.skipgram.seed,
                "workers": cfg.skipgram.workers,
            },
            "budget": list(cfg.budget.per_order),
            "dnn": cfg.dnn.to_dict(),
            "holdout_fraction": cfg.holdout_fraction,
            "split_seed": cfg.split_seed,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "PipelineConfig":
        doc = json.loads(text)
        return cls(
            groups=tuple(parse_metapath_groups(doc["meta_paths"])),
            walk=WalkConfig(**doc["walk"]),
            skipgram=SkipGramConfig(**doc["skipgram"]),
            budget=NeighborBudget(tuple(doc["budget"])),
            dnn=DnnConfig.from_dict(doc["dnn"]),
            holdout_fraction=doc["holdout_fraction"],
            split_seed=doc["split_seed"],
        )


@dataclass
class PipelineArtifacts:
    config: PipelineConfig
    train_hin: Hin
    table: EmbeddingTable  # bound to train_hin ids
    model: DnnModel
    loss_curve: list[float] = field(default_factory=list)
    _bound: dict[int, EmbeddingTable] = field(default_factory=dict, repr=False)

    @property
    def budget(self) -> NeighborBudget:
        budget = self.config.budget
        assert budget is not None
        return budget

    def table_on(self, hin: Hin) -> EmbeddingTable:
        """Embedding table re-keyed to the given graph's node ids."""
        if hin is self.train_hin:
            return self.table
        cached = self._bound.get(id(hin))
        if cached is None:
            cached = self.table.rebind(self.train_hin, hin)
            self._bound[id(hin)] = cached
        return cached

    def save(self, directory: str) -> None:
        os.makedirs(directory, exist_ok=True)
        save_embeddings(self.table, self.train_hin, os.path.join(directory, "embeddings.txt"))
        save_model(self.model, os.path.join(directory, "model.bin"))
        with open(os.path.join(directory, "config.json"), "w", encoding="utf-8") as fobj:
            fobj.write(self.config.to_json())


def load_artifacts(directory: str, hin: Hin) -> PipelineArtifacts:
    """Load saved artifacts bound to the (possibly extended) serving graph."""
    with open(os.path.join(directory, "config.json"), "r", encoding="utf-8") as fobj:
        config = PipelineConfig.from_json(fobj.read()).resolved()
    table = load_embeddings(os.path.join(directory, "embeddings.txt"), hin)
    model = load_model(os.path.join(directory, "model.bin"))
    return PipelineArtifacts(config, hin, table, model)


def embedding_stage(
    dataset: LabeledDataset, cfg: PipelineConfig
) -> tuple[Hin, EmbeddingTable]:
    """Walk and embed the in-sample subgraph (out-of-sample apps and their
    edges removed). Returns the canonical subgraph and the table bound to it."""
    cfg = cfg.resolved()
    sub = dataset.hin.canonical_subgraph(exclude=dataset.out_of_sample)
    starts = [
        sub.id_of(NodeType.APP, dataset.hin.node_key(v)) for v in dataset.in_sample
    ]
    corpus = build_grouped_corpus(sub, cfg.walk, list(cfg.groups), starts)
    table = train_skipgram(corpus, cfg.skipgram)
    return sub, table


def matrix_stage(
    hin: Hin,
    table: EmbeddingTable,
    nodes: list[NodeId],
    budget: NeighborBudget,
) -> np.ndarray:
    """Stack of representation matrices for the given nodes."""
    return np.stack([build_repr_matrix(hin, table, v, budget) for v in nodes])


def row_vector_matrix(vec: np.ndarray, budget: NeighborBudget) -> np.ndarray:
    """Matrix carrying only a d-vector in row 0; the representation used when
    a plain vector (own embedding or a neighbor average) feeds the classifier."""
    matrix = np.zeros((budget.rows, len(vec)))
    matrix[0] = vec
    return matrix


def fit(dataset: LabeledDataset, cfg: PipelineConfig) -> PipelineArtifacts:
    """Embed, build matrices for every in-sample app, and train the classifier."""
    cfg = cfg.resolved()
    assert cfg.budget is not None and cfg.dnn is not None
    in_labels = {dataset.labels[v] for v in dataset.in_sample}
    if len(in_labels) < 2:
        raise ValueError("in-sample apps must contain both classes")

    sub, table = embedding_stage(dataset, cfg)
    in_apps = sorted(
        sub.id_of(NodeType.APP, dataset.hin.node_key(v)) for v in dataset.in_sample
    )
    labels = np.array(
        [dataset.labels[dataset.hin.id_of(NodeType.APP, sub.node_key(v))] for v in in_apps],
        dtype=np.int64,
    )
    matrices = matrix_stage(sub, table, in_apps, cfg.budget)
    model = DnnModel(cfg.dnn)
    curve = train_dnn(model, matrices, labels, cfg.dnn)
    return PipelineArtifacts(cfg, sub, table, model, curve)


def predict(artifacts: PipelineArtifacts, hin: Hin, node: NodeId) -> Prediction:
    """Score one node against frozen artifacts; the node must be present in
    `hin` with its declared edges. Embeddings are never recomputed."""
    table = artifacts.table_on(hin)
    matrix = build_repr_matrix(hin, table, node, artifacts.budget)
    return artifacts.model.predict(matrix)


def predict_many(
    artifacts: PipelineArtifacts, hin: Hin, nodes: list[NodeId], batch_size: int = 64
) -> list[Prediction]:
    table = artifacts.table_on(hin)
    preds: list[Prediction] = []
    for start in range(0, len(nodes), batch_size):
        chunk = nodes[start : start + batch_size]
        batch = matrix_stage(hin, table, chunk, artifacts.budget)
        probs = artifacts.model.predict_proba(batch)
        preds.extend(Prediction(int(p.argmax()), p) for p in probs)
    return preds


def metrics_against(
    preds: list[Prediction], truth: list[int]
) -> Metrics:
    return evaluate(
        [p.label for p in preds], truth, scores=[p.score for p in preds]
    )
