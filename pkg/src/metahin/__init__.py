"""metahin: meta-path guided embedding and classification for typed graphs.

Pipeline: meta-path guided random walks over a heterogeneous graph, skip-gram
embedding with hierarchical softmax, fixed-size neighbor representation
matrices for any node (including nodes that arrive after embedding), and a
small convolutional classifier trained on those matrices.
"""

__version__ = "0.1.0"

from .datasets import LabeledDataset, SynthConfig, load_dataset, synth_hin, with_holdout
from .graph import Hin, NodeType, RelationType, load_edges, save_edges
from .metapaths import MetaPath, MetaPathSet, default_groups, parse_metapath_groups
from .metrics import Metrics, evaluate
from .pipeline import PipelineArtifacts, PipelineConfig, fit, load_artifacts, predict
from .reprmatrix import NeighborBudget, build_repr_matrix, k_order_neighbors, local_avg
from .skipgram import EmbeddingTable, SkipGramConfig, build_vocab_and_tree, hs_probability
from .walks import WalkConfig, WalkCorpus, build_corpus, generate_walk, transition_weights

__all__ = [
    "__version__",
    "Hin",
    "NodeType",
    "RelationType",
    "load_edges",
    "save_edges",
    "LabeledDataset",
    "SynthConfig",
    "load_dataset",
    "synth_hin",
    "with_holdout",
    "MetaPath",
    "MetaPathSet",
    "default_groups",
    "parse_metapath_groups",
    "WalkConfig",
    "WalkCorpus",
    "transition_weights",
    "generate_walk",
    "build_corpus",
    "SkipGramConfig",
    "EmbeddingTable",
    "build_vocab_and_tree",
    "hs_probability",
    "NeighborBudget",
    "k_order_neighbors",
    "build_repr_matrix",
    "local_avg",
    "Metrics",
    "evaluate",
    "PipelineConfig",
    "PipelineArtifacts",
    "fit",
    "predict",
    "load_artifacts",
]
