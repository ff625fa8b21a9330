"""End-to-end orchestration and artifact persistence.

run_pipeline drives ingest, structural and semantic feature extraction,
training, the sweep, and scoring, writing every intermediate as a JSON
document under the output directory. The resulting RunBundle can be
reloaded later and served over HTTP without retraining anything.

All files are written with sorted keys and fixed indentation so reruns
with identical configuration produce bit-identical bytes.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .decompose import (
    Decomposition,
    SweepGrid,
    SweepResult,
    default_grid,
    run_sweep,
)
from .ingest import (
    ProjectGraph,
    embedding_request_records,
    load_project_graph,
    parse_java_project,
    project_graph_to_dict,
)
from .metrics import MetricReport, metric_icp
from .nocd import MembershipMatrix, TrainConfig
from .semantic import (
    FeatureMatrix,
    fetch_embeddings,
    load_embeddings,
    tfidf_features,
)
from .structural import (
    DependencyMatrix,
    call_counts,
    structural_from_dict,
    structural_matrix,
    structural_to_dict,
)

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


class ConfigError(Exception):
    """Raised for an invalid pipeline configuration."""


class PipelineError(Exception):
    """Raised when a pipeline stage fails; message names the stage."""


@dataclass
class PipelineConfig:
    output_dir: str
    project_root: str | None = None
    project_file: str | None = None
    embeddings_file: str | None = None
    embedding_endpoint: str | None = None
    use_tfidf: bool = False
    grid: SweepGrid | None = None
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self) -> None:
        n_project = (self.project_root is not None) + (self.project_file is not None)
        if n_project != 1:
            raise ConfigError(
                "exactly one project source required: project_root or project_file"
            )
        n_semantic = (
            (self.embeddings_file is not None)
            + (self.embedding_endpoint is not None)
            + bool(self.use_tfidf)
        )
        if n_semantic != 1:
            raise ConfigError(
                "exactly one semantic source required: "
                "embeddings_file, embedding_endpoint, or use_tfidf"
            )

    def to_dict(self) -> dict:
        return {
            "output_dir": self.output_dir,
            "project_root": self.project_root,
            "project_file": self.project_file,
            "embeddings_file": self.embeddings_file,
            "embedding_endpoint": self.embedding_endpoint,
            "use_tfidf": self.use_tfidf,
            "grid": self.grid.to_dict() if self.grid else None,
            "train": self.train.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        grid = data.get("grid")
        train = data.get("train")
        return cls(
            output_dir=data["output_dir"],
            project_root=data.get("project_root"),
            project_file=data.get("project_file"),
            embeddings_file=data.get("embeddings_file"),
            embedding_endpoint=data.get("embedding_endpoint"),
            use_tfidf=bool(data.get("use_tfidf", False)),
            grid=SweepGrid.from_dict(grid) if grid else None,
            train=TrainConfig.from_dict(train) if train else TrainConfig(),
        )


@dataclass
class RunBundle:
    out_dir: Path
    project: ProjectGraph
    s_str: DependencyMatrix
    features_sem: FeatureMatrix
    features_str: FeatureMatrix
    # (n_clusters, seed) -> (semantic, structural), both row-normalized
    memberships: dict
    sweep: SweepResult | None = None
    selected: Decomposition | None = None
    selected_report: MetricReport | None = None

    @property
    def runs(self) -> list[tuple[int, int]]:
        return sorted(self.memberships)


def write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path: Path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def membership_to_dict(m: MembershipMatrix, meta: dict) -> dict:
    out = {
        "values": [[float(v) for v in row] for row in m.values],
        "kind": m.kind,
        "normalized": True,
    }
    out.update(meta)
    return out


def membership_from_dict(data: dict) -> MembershipMatrix:
    return MembershipMatrix(
        values=np.asarray(data["values"], dtype=np.float64),
        kind=data["kind"],
    )


def _stage(name: str):
    def wrap(fn):
        def inner(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except (PipelineError, ConfigError):
                raise
            except Exception as exc:
                raise PipelineError(f"stage {name!r} failed: {exc}") from exc
        return inner
    return wrap


@_stage("ingest")
def _load_project(cfg: PipelineConfig, out: Path) -> ProjectGraph:
    if cfg.project_root is not None:
        project, diagnostics = parse_java_project(cfg.project_root)
        write_json(out / "diagnostics.json", diagnostics.to_dict())
    else:
        project = load_project_graph(cfg.project_file)
    write_json(out / "project.json", project_graph_to_dict(project))
    return project


@_stage("semantic")
def _semantic_features(cfg: PipelineConfig, project: ProjectGraph, out: Path) -> FeatureMatrix:
    if cfg.use_tfidf:
        feats = tfidf_features(project)
    elif cfg.embeddings_file is not None:
        feats = load_embeddings(cfg.embeddings_file, project.n_classes)
    else:
        records = embedding_request_records(project)
        feats = fetch_embeddings(cfg.embedding_endpoint, records)
    write_json(out / "features_semantic.json", feats.to_dict())
    return feats


def run_pipeline(cfg: PipelineConfig) -> RunBundle:
    """Execute every stage, persisting intermediates as it goes."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "config.json", cfg.to_dict())

    project = _load_project(cfg, out)

    @_stage("structural")
    def _structural():
        counts = call_counts(project)
        s = structural_matrix(counts)
        write_json(out / "structural.json", structural_to_dict(s))
        feats = FeatureMatrix(rows=s.values.copy(), kind="structural-as-features")
        return s, feats

    s_str, features_str = _structural()
    features_sem = _semantic_features(cfg, project, out)

    grid = cfg.grid or default_grid(project.n_classes, seeds=[cfg.train.seed])

    @_stage("sweep")
    def _sweep() -> SweepResult:
        result = run_sweep(project, features_sem, features_str, grid, cfg.train)
        write_json(out / "sweep.json", result.to_dict())
        for (n, seed), (m_sem, m_str) in sorted(result.memberships.items()):
            for kind, m in (("semantic", m_sem), ("structural", m_str)):
                meta = dict(result.train_meta.get((kind, n, seed), {}))
                meta.update({"n_clusters": n, "seed": seed})
                write_json(
                    out / "memberships" / f"{kind}_n{n}_s{seed}.json",
                    membership_to_dict(m, meta),
                )
        return result

    sweep = _sweep()

    @_stage("select")
    def _select():
        best = sweep.best
        d = best.decomposition
        d.provenance.update(
            {
                "semantic_kind": features_sem.kind,
                "train": cfg.train.to_dict(),
            }
        )
        write_json(out / "decomposition.json", d.to_dict())
        write_json(out / "report.json", best.report.to_dict())
        write_json(out / "graph.json", graph_document(project, d))
        return d, best.report

    selected, selected_report = _select()

    bundle = RunBundle(
        out_dir=out,
        project=project,
        s_str=s_str,
        features_sem=features_sem,
        features_str=features_str,
        memberships=sweep.memberships,
        sweep=sweep,
        selected=selected,
        selected_report=selected_report,
    )
    _write_manifest(bundle, cfg)
    return bundle


def _write_manifest(bundle: RunBundle, cfg: PipelineConfig) -> None:
    manifest = {
        "format": "monosplit-bundle-v1",
        "n_classes": bundle.project.n_classes,
        "runs": [[n, seed] for n, seed in bundle.runs],
        "artifacts": {
            "project": "project.json",
            "structural": "structural.json",
            "features_semantic": "features_semantic.json",
            "sweep": "sweep.json",
            "decomposition": "decomposition.json",
            "report": "report.json",
            "graph": "graph.json",
        },
        "memberships": {
            f"{n},{seed}": {
                kind: f"memberships/{kind}_n{n}_s{seed}.json"
                for kind in ("semantic", "structural")
            }
            for n, seed in bundle.runs
        },
        "config": cfg.to_dict(),
    }
    write_json(bundle.out_dir / MANIFEST_NAME, manifest)


def load_bundle(bundle_dir: str | Path) -> RunBundle:
    """Reload a persisted run for serving. Raises PipelineError if the
    directory is not a bundle or referenced artifacts are missing."""
    out = Path(bundle_dir)
    manifest_path = out / MANIFEST_NAME
    if not manifest_path.exists():
        raise PipelineError(f"no {MANIFEST_NAME} in {out}")
    manifest = read_json(manifest_path)
    try:
        project = load_project_graph(out / manifest["artifacts"]["project"])
        s_str = structural_from_dict(read_json(out / manifest["artifacts"]["structural"]))
        features_sem = FeatureMatrix.from_dict(
            read_json(out / manifest["artifacts"]["features_semantic"])
        )
        memberships = {}
        for key, paths in manifest["memberships"].items():
            n_text, seed_text = key.split(",")
            m_sem = membership_from_dict(read_json(out / paths["semantic"]))
            m_str = membership_from_dict(read_json(out / paths["structural"]))
            memberships[(int(n_text), int(seed_text))] = (m_sem, m_str)
        selected = Decomposition.from_dict(
            read_json(out / manifest["artifacts"]["decomposition"])
        )
        report = MetricReport.from_dict(read_json(out / manifest["artifacts"]["report"]))
    except FileNotFoundError as exc:
        raise PipelineError(f"bundle artifact missing: {exc}") from exc
    features_str = FeatureMatrix(rows=s_str.values.copy(), kind="structural-as-features")
    return RunBundle(
        out_dir=out,
        project=project,
        s_str=s_str,
        features_sem=features_sem,
        features_str=features_str,
        memberships=memberships,
        selected=selected,
        selected_report=report,
    )


def graph_document(project: ProjectGraph, d: Decomposition) -> dict:
    """Visualization payload: class nodes with service memberships and
    call edges labeled intra when the endpoints share a service."""
    member: dict[int, list[int]] = {}
    for idx, svc in enumerate(d.services):
        for c in svc:
            member.setdefault(c, []).append(idx)
    nodes = []
    for cls in project.classes:
        services = member.get(cls.class_id, [])
        nodes.append(
            {
                "id": cls.class_id,
                "name": cls.qualified_name,
                "services": services,
                "outlier": not services,
                "overlap": len(services) > 1,
            }
        )
    edges = []
    for (caller, callee), count in sorted(project.class_pair_calls().items()):
        shared = set(member.get(caller, [])) & set(member.get(callee, []))
        edges.append(
            {
                "source": caller,
                "target": callee,
                "count": count,
                "intra": bool(shared),
            }
        )
    services = [
        {"index": idx, "size": len(svc), "classes": list(svc)}
        for idx, svc in enumerate(d.services)
    ]
    return {
        "nodes": nodes,
        "edges": edges,
        "services": services,
        "outliers": list(d.outliers),
    }


def graph_document_icp(doc: dict) -> float:
    """Call-weighted inter fraction of a graph document; mirrors
    metric_icp so exports can be cross-checked."""
    total = sum(e["count"] for e in doc["edges"])
    if total == 0:
        return 0.0
    inter = sum(e["count"] for e in doc["edges"] if not e["intra"])
    return inter / total


def export_visualization(bundle: RunBundle, which: str = "selected") -> dict:
    """Graph document plus a DOT rendering for the named decomposition.
    Only the selected decomposition is addressable by name."""
    if which != "selected" or bundle.selected is None:
        known = ["selected"] if bundle.selected is not None else []
        raise KeyError(f"unknown decomposition {which!r}; known: {known}")
    doc = graph_document(bundle.project, bundle.selected)
    doc["dot"] = to_dot(doc)
    return doc


def to_dot(doc: dict) -> str:
    """DOT text for offline rendering. Each node is drawn inside its
    first service cluster; overlapping classes get doubled borders and
    an all-services label since DOT clusters cannot share nodes."""
    lines = ["digraph decomposition {", "  node [shape=box];"]
    by_first: dict[int, list[dict]] = {}
    loose = []
    for node in doc["nodes"]:
        if node["services"]:
            by_first.setdefault(node["services"][0], []).append(node)
        else:
            loose.append(node)
    for idx in sorted(by_first):
        lines.append(f"  subgraph cluster_{idx} {{")
        lines.append(f'    label="service {idx}";')
        for node in by_first[idx]:
            attrs = [f'label="{node["name"]}"']
            if node["overlap"]:
                svc_text = ",".join(str(s) for s in node["services"])
                attrs = [f'label="{node["name"]}\\n[{svc_text}]"', "peripheries=2"]
            lines.append(f'    c{node["id"]} [{", ".join(attrs)}];')
        lines.append("  }")
    for node in loose:
        lines.append(f'  c{node["id"]} [label="{node["name"]}", style=dashed];')
    for edge in doc["edges"]:
        color = "green" if edge["intra"] else "red"
        lines.append(
            f'  c{edge["source"]} -> c{edge["target"]} '
            f'[color={color}, label="{edge["count"]}"];'
        )
    lines.append("}")
    return "\n".join(lines)


def consistency_check(project: ProjectGraph, d: Decomposition) -> bool:
    """The graph document's inter-labeled call fraction must equal the
    ICP metric for the same decomposition."""
    doc = graph_document(project, d)
    return abs(graph_document_icp(doc) - metric_icp(d, project)) < 1e-12
