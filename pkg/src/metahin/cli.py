"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error. Every randomized
subcommand requires an explicit --seed; component seeds are derived from it
at fixed offsets (split +0, walks +1, embedding +2, classifier +3). The fully
resolved configuration is logged as JSON to stderr before work starts.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .datasets import (
    LabeledDataset,
    SynthConfig,
    load_dataset,
    synth_hin,
    synth_manifest,
    with_holdout,
    write_labels,
)
from .graph import GraphError, Hin, NodeType, load_edges, save_edges
from .metapaths import MetaPathError, default_groups, load_metapath_groups
from .metrics import evaluate
from .nn import DnnConfig, DnnModel
from .pipeline import (
    PipelineArtifacts,
    PipelineConfig,
    fit,
    load_artifacts,
    predict,
    predict_many,
)
from .reprmatrix import (
    NeighborBudget,
    build_repr_matrix,
    matrix_to_json,
    write_matrix,
)
from .skipgram import (
    EmbeddingTable,
    SkipGramConfig,
    VocabError,
    load_embeddings,
    save_embeddings,
    train as train_skipgram,
)
from .walks import WalkConfig, build_grouped_corpus, write_corpus

DATA_ERRORS = (
    GraphError,
    MetaPathError,
    VocabError,
    ValueError,
    KeyError,
    OSError,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # usage errors exit 1, not 2
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _log_config(name: str, config: dict) -> None:
    print(json.dumps({"command": name, "config": config}, sort_keys=True, default=str),
          file=sys.stderr)


def _groups(args) -> list:
    if getattr(args, "meta_paths", None):
        return load_metapath_groups(args.meta_paths)
    return default_groups()


def _pipeline_config(args) -> PipelineConfig:
    seed = args.seed
    return PipelineConfig(
        groups=tuple(_groups(args)),
        walk=WalkConfig(args.walks_per_node, args.walk_length, seed=seed + 1),
        skipgram=SkipGramConfig(
            dimension=args.dimension,
            window=args.window,
            epochs=args.sg_epochs,
            seed=seed + 2,
            workers=args.threads,
        ),
        dnn=DnnConfig(
            input_rows=NeighborBudget.square(args.dimension).rows,
            input_cols=args.dimension,
            epochs=args.dnn_epochs,
            batch_size=args.batch_size,
            learning_rate=args.learning_rate,
            seed=seed + 3,
        ),
        holdout_fraction=args.holdout,
        split_seed=seed,
    ).resolved()


# -- subcommands ---------------------------------------------------------------


def cmd_synth(args) -> int:
    cfg = SynthConfig(
        n_apps_per_class=args.apps_per_class,
        n_api=args.api,
        n_imei=args.imei,
        n_sig=args.sig,
        n_aff=args.aff,
        p_intra=args.p_intra,
        p_inter=args.p_inter,
        mean_degree=args.mean_degree,
        seed=args.seed,
    )
    _log_config("synth", vars(args))
    ds = synth_hin(cfg)
    os.makedirs(args.out, exist_ok=True)
    save_edges(ds.hin, os.path.join(args.out, "edges.tsv"))
    write_labels(ds, os.path.join(args.out, "labels.tsv"))
    with open(os.path.join(args.out, "manifest.json"), "w", encoding="utf-8") as fobj:
        fobj.write(synth_manifest(cfg))
    print(f"wrote {ds.hin.num_nodes} nodes, {ds.hin.num_edges} edges to {args.out}")
    return 0


def cmd_walk(args) -> int:
    _log_config("walk", vars(args))
    hin = load_edges(args.edges)
    groups = _groups(args)
    cfg = WalkConfig(args.walks_per_node, args.walk_length, seed=args.seed)
    corpus = build_grouped_corpus(hin, cfg, groups, hin.nodes_of_type(NodeType.APP))
    write_corpus(corpus, hin, args.out)
    print(f"wrote {len(corpus)} walks to {args.out}")
    return 0


def cmd_embed(args) -> int:
    _log_config("embed", vars(args))
    hin = load_edges(args.edges)
    from .walks import read_corpus

    corpus = read_corpus(args.corpus, hin)
    cfg = SkipGramConfig(
        dimension=args.dimension,
        window=args.window,
        epochs=args.sg_epochs,
        initial_lr=args.learning_rate,
        min_lr=args.learning_rate * 1e-4,
        seed=args.seed,
        workers=args.threads,
    )
    table = train_skipgram(corpus, cfg)
    save_embeddings(table, hin, args.out)
    print(f"wrote {len(table)} embeddings to {args.out}")
    return 0


def cmd_img(args) -> int:
    _log_config("img", vars(args))
    hin = load_edges(args.edges)
    table = load_embeddings(args.embeddings, hin)
    budget = (
        NeighborBudget(tuple(int(t) for t in args.budget.split(",")))
        if args.budget
        else NeighborBudget.square(table.dimension)
    )
    type_name, _, key = args.node.partition(":")
    node = hin.id_of(NodeType[type_name], key)
    matrix = build_repr_matrix(hin, table, node, budget)
    if args.json:
        with open(args.out, "w", encoding="utf-8") as fobj:
            fobj.write(matrix_to_json(matrix) + "\n")
    else:
        write_matrix(matrix, args.out)
    print(f"wrote {matrix.shape[0]}x{matrix.shape[1]} matrix to {args.out}")
    return 0


def cmd_fit(args) -> int:
    cfg = _pipeline_config(args)
    _log_config("fit", json.loads(cfg.to_json()))
    dataset = load_dataset(args.edges, args.labels, args.holdout, cfg.split_seed)
    artifacts = fit(dataset, cfg)
    artifacts.save(args.out)
    print(
        f"fit complete: {len(dataset.in_sample)} in-sample apps, "
        f"final loss {artifacts.loss_curve[-1]:.4f}, artifacts in {args.out}"
    )
    return 0


def cmd_predict(args) -> int:
    _log_config("predict", vars(args))
    hin = load_edges(args.edges)
    artifacts = load_artifacts(args.artifacts, hin)
    if args.apps:
        with open(args.apps, "r", encoding="utf-8") as fobj:
            keys = [line.strip() for line in fobj if line.strip()]
    else:
        keys = [hin.node_key(v) for v in hin.nodes_of_type(NodeType.APP)]
    nodes = [hin.id_of(NodeType.APP, k) for k in keys]
    preds = predict_many(artifacts, hin, nodes)
    with open(args.out, "w", encoding="utf-8") as fobj:
        fobj.write("app_key,score,label\n")
        for key, p in zip(keys, preds):
            fobj.write(f"{key},{p.score:.17g},{p.label}\n")
    print(f"wrote {len(preds)} predictions to {args.out}")
    return 0


def cmd_eval(args) -> int:
    _log_config("eval", vars(args))
    preds: dict[str, tuple[float, int]] = {}
    with open(args.pred, "r", encoding="utf-8") as fobj:
        header = fobj.readline()
        if header.strip() != "app_key,score,label":
            raise ValueError(f"{args.pred}: expected header app_key,score,label")
        for line in fobj:
            if not line.strip():
                continue
            key, score, label = line.strip().split(",")
            preds[key] = (float(score), int(label))
    truth: dict[str, int] = {}
    with open(args.truth, "r", encoding="utf-8") as fobj:
        for line in fobj:
            if not line.strip() or line.startswith("#"):
                continue
            key, label = line.rstrip("\n").split("\t")
            truth[key] = int(label)
    if set(preds) != set(truth):
        raise ValueError(
            f"prediction/truth key sets differ "
            f"({len(preds)} predictions vs {len(truth)} truths)"
        )
    keys = sorted(truth)
    metrics = evaluate(
        [preds[k][1] for k in keys],
        [truth[k] for k in keys],
        scores=[preds[k][0] for k in keys],
    )
    os.makedirs(args.out_dir, exist_ok=True)
    with open(os.path.join(args.out_dir, "metrics.json"), "w", encoding="utf-8") as fobj:
        fobj.write(metrics.to_json())
    with open(os.path.join(args.out_dir, "roc.csv"), "w", encoding="utf-8") as fobj:
        fobj.write(metrics.roc_csv())
    print(metrics.to_json(), end="")
    return 0


def _bench_dataset(scale: int, seed: int) -> LabeledDataset:
    cfg = SynthConfig(
        n_apps_per_class=330 * scale,
        n_api=100 * scale,
        n_imei=80 * scale,
        n_sig=50 * scale,
        n_aff=50 * scale,
        mean_degree=4.0,
        seed=seed,
    )
    return with_holdout(synth_hin(cfg), 0.1, seed)


def _bench_predict_latency(ds: LabeledDataset, seed: int, probes: int) -> float:
    """Median per-node predict latency with a stand-in table and model; the
    lookup and matrix-assembly path is what depends on graph size."""
    config = PipelineConfig().resolved()
    sub = ds.hin.canonical_subgraph(exclude=ds.out_of_sample)
    rng = np.random.default_rng(seed)
    ids = np.arange(sub.num_nodes, dtype=np.int64)
    table = EmbeddingTable(64, ids, rng.standard_normal((sub.num_nodes, 64)) * 0.01)
    artifacts = PipelineArtifacts(config, sub, table, DnnModel(config.dnn))
    targets = sorted(ds.out_of_sample)[:probes]
    latencies = []
    for v in targets:
        start = time.perf_counter()
        predict(artifacts, ds.hin, v)
        latencies.append(time.perf_counter() - start)
    return float(np.median(latencies))


def cmd_bench_oos(args) -> int:
    _log_config("bench-oos", vars(args))
    small = _bench_dataset(1, args.seed)
    large = _bench_dataset(10, args.seed + 1)
    # warm-up so one-time allocation costs don't land on the first probe
    _bench_predict_latency(small, args.seed, probes=5)
    t_small = _bench_predict_latency(small, args.seed, args.probes)
    t_large = _bench_predict_latency(large, args.seed, args.probes)
    report = {
        "small_nodes": small.hin.num_nodes,
        "large_nodes": large.hin.num_nodes,
        "small_ms_per_node": t_small * 1e3,
        "large_ms_per_node": t_large * 1e3,
        "ratio": t_large / t_small,
    }
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


# -- argument wiring -----------------------------------------------------------


def _add_fit_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dimension", type=int, default=64)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--walks-per-node", type=int, default=20)
    p.add_argument("--walk-length", type=int, default=50)
    p.add_argument("--sg-epochs", type=int, default=3)
    p.add_argument("--dnn-epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--learning-rate", type=float, default=0.01)
    p.add_argument("--meta-paths", help="meta-path spec file")
    p.add_argument("--threads", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="metahin", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic labeled dataset")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--apps-per-class", type=int, default=500)
    p.add_argument("--api", type=int, default=200)
    p.add_argument("--imei", type=int, default=150)
    p.add_argument("--sig", type=int, default=100)
    p.add_argument("--aff", type=int, default=100)
    p.add_argument("--p-intra", type=float, default=0.9)
    p.add_argument("--p-inter", type=float, default=0.1)
    p.add_argument("--mean-degree", type=float, default=5.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("walk", help="sample a walk corpus")
    p.add_argument("--edges", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--walks-per-node", type=int, default=20)
    p.add_argument("--walk-length", type=int, default=50)
    p.add_argument("--meta-paths")
    p.set_defaults(func=cmd_walk)

    p = sub.add_parser("embed", help="train embeddings from a walk corpus")
    p.add_argument("--edges", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--dimension", type=int, default=64)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--sg-epochs", type=int, default=3)
    p.add_argument("--learning-rate", type=float, default=0.025)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("img", help="dump one node's representation matrix")
    p.add_argument("--edges", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--node", required=True, help="TYPE:key")
    p.add_argument("--out", required=True)
    p.add_argument("--budget", help="comma-separated per-order rows, e.g. 21,42")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_img)

    p = sub.add_parser("fit", help="train end-to-end artifacts")
    p.add_argument("--edges", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--holdout", type=float, default=0.2)
    _add_fit_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="score apps against saved artifacts")
    p.add_argument("--artifacts", required=True)
    p.add_argument("--edges", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--apps", help="file with one app key per line (default: all)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="metrics from prediction and truth files")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench-oos", help="per-node predict latency vs graph size")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--probes", type=int, default=100)
    p.set_defaults(func=cmd_bench_oos)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DATA_ERRORS as exc:
        print(f"metahin {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
