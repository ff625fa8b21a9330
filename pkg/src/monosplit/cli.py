"""Command line interface.

Subcommands mirror the pipeline stages so each intermediate artifact
can be produced, inspected, and replayed on its own: ingest, features,
nocd, decompose, sweep, score, run, serve.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .decompose import (
    Decomposition,
    SweepError,
    SweepGrid,
    budget_cluster_counts,
    default_grid,
    fuse,
    run_sweep,
    threshold_assign,
    train_memberships,
)
from .ingest import (
    IngestError,
    embedding_request_records,
    load_project_graph,
    parse_java_project,
    project_graph_to_dict,
)
from .javasrc import JavaSyntaxError
from .metrics import MetricError, score_decomposition
from .nocd import TrainConfig, TrainingError, train_nocd
from .pipeline import (
    ConfigError,
    PipelineConfig,
    PipelineError,
    load_bundle,
    read_json,
    run_pipeline,
    write_json,
)
from .semantic import FeatureError, FeatureMatrix, fetch_embeddings, load_embeddings, tfidf_features
from .server import serve_api
from .structural import adjacency, call_counts, structural_from_dict, structural_matrix, structural_to_dict

log = logging.getLogger(__name__)

_ERRORS = (
    IngestError,
    JavaSyntaxError,
    FeatureError,
    TrainingError,
    SweepError,
    MetricError,
    ConfigError,
    PipelineError,
    ValueError,
    OSError,
)


def _load_feature_file(path: str) -> FeatureMatrix:
    """Accept either a feature-matrix document or a structural-matrix
    document (whose dense matrix doubles as structural features)."""
    data = read_json(Path(path))
    if "rows" in data:
        return FeatureMatrix.from_dict(data)
    if "matrix" in data:
        s = structural_from_dict(data)
        return FeatureMatrix(rows=s.values.copy(), kind="structural-as-features")
    raise FeatureError(f"{path}: not a feature or structural matrix document")


def _structural_inputs(project_path: str):
    project = load_project_graph(project_path)
    s = structural_matrix(call_counts(project))
    return project, s, adjacency(s)


def cmd_ingest(args) -> int:
    project, diagnostics = parse_java_project(args.root)
    write_json(Path(args.out), project_graph_to_dict(project))
    print(f"wrote {args.out}: {project.n_classes} classes, "
          f"{len(project.inter_edges)} inter-class edges")
    if args.diagnostics:
        write_json(Path(args.diagnostics), diagnostics.to_dict())
        print(f"wrote {args.diagnostics}")
    return 0


def cmd_features_structural(args) -> int:
    _, s, _ = _structural_inputs(args.project)
    write_json(Path(args.out), structural_to_dict(s))
    print(f"wrote {args.out}: {s.n_classes}x{s.n_classes} structural matrix")
    return 0


def cmd_features_semantic(args) -> int:
    project = load_project_graph(args.project)
    if args.tfidf:
        feats = tfidf_features(project)
    elif args.embeddings:
        feats = load_embeddings(args.embeddings, project.n_classes)
    else:
        feats = fetch_embeddings(args.endpoint, embedding_request_records(project))
    write_json(Path(args.out), feats.to_dict())
    print(f"wrote {args.out}: {feats.n_classes}x{feats.d} {feats.kind} features")
    return 0


def cmd_nocd(args) -> int:
    feats = _load_feature_file(args.features)
    s = structural_from_dict(read_json(Path(args.adjacency)))
    a = adjacency(s)
    cfg = TrainConfig(seed=args.seed)
    result = train_nocd(feats, a, args.clusters, cfg, hidden=args.hidden)
    payload = {
        "values": [[float(v) for v in row] for row in result.membership.values],
        "kind": result.membership.kind,
        "n_clusters": args.clusters,
        "seed": args.seed,
        "epochs_ran": result.epochs_ran,
        "best_val_loss": result.best_val_loss,
        "normalized": False,
    }
    write_json(Path(args.out), payload)
    print(f"wrote {args.out}: {result.membership.kind} memberships, "
          f"{result.epochs_ran} epochs, best val loss {result.best_val_loss:.4f}")
    return 0


def cmd_decompose(args) -> int:
    project, s, a = _structural_inputs(args.project)
    feats_sem = _load_feature_file(args.sem)
    feats_str = FeatureMatrix(rows=s.values.copy(), kind="structural-as-features")
    cfg = TrainConfig(seed=args.seed)
    m_sem, _ = train_memberships(feats_sem, a, args.clusters, cfg)
    m_str, _ = train_memberships(feats_str, a, args.clusters, cfg)
    fused = fuse(m_sem, m_str, args.alpha)
    d = threshold_assign(
        fused,
        args.tau,
        alpha=args.alpha,
        provenance={"n_clusters": args.clusters, "seed": args.seed},
    )
    write_json(Path(args.out), d.to_dict())
    print(f"wrote {args.out}: {len(d.services)} services, {len(d.outliers)} outliers")
    return 0


def cmd_sweep(args) -> int:
    project, s, _ = _structural_inputs(args.project)
    feats_sem = _load_feature_file(args.sem)
    feats_str = FeatureMatrix(rows=s.values.copy(), kind="structural-as-features")
    if args.grid:
        grid = SweepGrid.from_dict(read_json(Path(args.grid)))
    else:
        grid = default_grid(project.n_classes, seeds=[args.seed])
        if args.budget:
            grid.cluster_counts = budget_cluster_counts(project.n_classes, args.budget)
    result = run_sweep(project, feats_sem, feats_str, grid, TrainConfig(seed=args.seed))
    write_json(Path(args.out), result.to_dict())
    best = result.best
    print(f"wrote {args.out}: {len(result.cells)} cells")
    print(f"best cell: N={best.n_clusters} seed={best.seed} "
          f"alpha={best.alpha} tau={best.tau} qscore={best.report.qscore:.4f}")
    return 0


def cmd_score(args) -> int:
    project = load_project_graph(args.project)
    d = Decomposition.from_dict(read_json(Path(args.decomposition)))
    report = score_decomposition(d, project)
    write_json(Path(args.out), report.to_dict())
    print(f"wrote {args.out}: sm={report.sm:.4f} icp={report.icp:.4f} "
          f"ifn={report.ifn:.4f} ned={report.ned:.4f}")
    return 0


def cmd_run(args) -> int:
    cfg = PipelineConfig.from_dict(read_json(Path(args.config)))
    bundle = run_pipeline(cfg)
    best = bundle.sweep.best
    print(f"pipeline complete: {bundle.out_dir}")
    print(f"selected: N={best.n_clusters} seed={best.seed} "
          f"alpha={best.alpha} tau={best.tau} qscore={best.report.qscore:.4f}")
    return 0


def cmd_serve(args) -> int:
    bundle = load_bundle(args.bundle)
    host, _, port_text = args.bind.rpartition(":")
    if not host or not port_text.isdigit():
        raise ConfigError(f"bind address must be host:port, got {args.bind!r}")
    serve_api(bundle, host=host, port=int(port_text), static_dir=args.static)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="monosplit",
        description="Decompose a monolithic Java codebase into overlapping "
                    "microservice candidates.",
    )
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse Java sources into a project graph")
    p.add_argument("--root", required=True, help="root directory of the Java project")
    p.add_argument("--out", required=True, help="output project file")
    p.add_argument("--diagnostics", help="optional diagnostics output file")
    p.set_defaults(fn=cmd_ingest)

    feat = sub.add_parser("features", help="derive feature matrices")
    feat_sub = feat.add_subparsers(dest="features_command", required=True)

    p = feat_sub.add_parser("structural", help="pairwise structural dependency matrix")
    p.add_argument("--project", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_features_structural)

    p = feat_sub.add_parser("semantic", help="semantic feature matrix")
    p.add_argument("--project", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--embeddings", help="precomputed embedding file")
    src.add_argument("--endpoint", help="embedding service URL")
    src.add_argument("--tfidf", action="store_true", help="self-contained tf-idf features")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_features_semantic)

    p = sub.add_parser("nocd", help="train one soft-clustering instance")
    p.add_argument("--features", required=True)
    p.add_argument("--adjacency", required=True, help="structural matrix file")
    p.add_argument("--clusters", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hidden", type=int, default=128)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_nocd)

    p = sub.add_parser("decompose", help="train, fuse, and threshold one configuration")
    p.add_argument("--project", required=True)
    p.add_argument("--sem", required=True, help="semantic feature file")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--clusters", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_decompose)

    p = sub.add_parser("sweep", help="scan an alpha/tau/N grid and pick the best cell")
    p.add_argument("--project", required=True)
    p.add_argument("--sem", required=True)
    p.add_argument("--grid", help="grid file; omitted means the full default grid")
    p.add_argument("--budget", choices=["low", "medium", "high"],
                   help="restrict default cluster counts to a budget band")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("score", help="score a decomposition against the project")
    p.add_argument("--project", required=True)
    p.add_argument("--decomposition", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_score)

    p = sub.add_parser("run", help="full pipeline from a config file")
    p.add_argument("--config", required=True)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("serve", help="serve a finished bundle over HTTP")
    p.add_argument("--bundle", required=True, help="bundle directory")
    p.add_argument("--bind", default="127.0.0.1:8000")
    p.add_argument("--static", help="directory of frontend assets to mount at /")
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.fn(args)
    except _ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
