"""HTTP API over a finished run bundle.

Every endpoint is read-only and deterministic. Decompositions, metric
reports, heatmaps, and graph documents are recomputed per request by
fusing and thresholding the cached membership matrices; nothing ever
retrains. Unknown cluster counts give a 404 carrying the available
(n, seed) pairs, malformed or out-of-range alpha and tau give a 400.
"""

from __future__ import annotations

import logging
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.staticfiles import StaticFiles

from .decompose import Decomposition, fuse, normalize_memberships, threshold_assign
from .metrics import MetricError, metric_qscore, score_decomposition
from .pipeline import RunBundle, graph_document

log = logging.getLogger(__name__)


def _parse_fraction(text: str, name: str, inclusive: bool) -> float:
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise HTTPException(status_code=400, detail=f"malformed {name}: {text!r}")
    if inclusive:
        ok = 0.0 <= value <= 1.0
        bounds = "[0, 1]"
    else:
        ok = 0.0 < value < 1.0
        bounds = "(0, 1)"
    if not ok:
        raise HTTPException(status_code=400, detail=f"{name} must be in {bounds}: {value}")
    return value


def _parse_fraction_list(text: str, name: str, inclusive: bool) -> list[float]:
    parts = [p for p in text.split(",") if p.strip()]
    if not parts:
        raise HTTPException(status_code=400, detail=f"empty {name} list")
    return [_parse_fraction(p.strip(), name, inclusive) for p in parts]


def create_app(bundle: RunBundle, static_dir: str | Path | None = None) -> FastAPI:
    if not bundle.memberships:
        raise ValueError("bundle has no cached membership matrices; nothing to serve")

    # normalize once up front; idempotent for already-normalized files
    runs = {
        key: (normalize_memberships(m_sem), normalize_memberships(m_str))
        for key, (m_sem, m_str) in bundle.memberships.items()
    }
    project = bundle.project

    app = FastAPI(title="monosplit explorer API")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["GET"], allow_headers=["*"]
    )

    def resolve_run(n: int, seed: int | None) -> tuple[int, int]:
        if seed is None:
            seeds = sorted(s for (nn, s) in runs if nn == n)
            if seeds:
                return (n, seeds[0])
        elif (n, seed) in runs:
            return (n, seed)
        raise HTTPException(
            status_code=404,
            detail={
                "message": f"no cached run for n={n}"
                + (f", seed={seed}" if seed is not None else ""),
                "available": [[nn, ss] for nn, ss in sorted(runs)],
            },
        )

    def build_decomposition(n: int, seed: int | None, alpha: str, tau: str) -> Decomposition:
        a = _parse_fraction(alpha, "alpha", inclusive=True)
        t = _parse_fraction(tau, "tau", inclusive=False)
        key = resolve_run(n, seed)
        m_sem, m_str = runs[key]
        fused = fuse(m_sem, m_str, a)
        return threshold_assign(
            fused, t, alpha=a, provenance={"n_clusters": key[0], "seed": key[1]}
        )

    @app.get("/project")
    def get_project() -> dict:
        pair_calls = project.class_pair_calls()
        return {
            "n_classes": project.n_classes,
            "classes": [
                {
                    "id": c.class_id,
                    "name": c.qualified_name,
                    "n_methods": len(c.methods),
                }
                for c in project.classes
            ],
            "n_intra_edges": sum(len(edges) for edges in project.intra_edges),
            "n_inter_edges": len(project.inter_edges),
            "n_class_pairs": len(pair_calls),
            "total_calls": sum(pair_calls.values()),
        }

    @app.get("/runs")
    def get_runs() -> dict:
        return {"runs": [{"n": n, "seed": s} for n, s in sorted(runs)]}

    @app.get("/decomposition")
    def get_decomposition(n: int, alpha: str, tau: str, seed: int | None = None) -> dict:
        return build_decomposition(n, seed, alpha, tau).to_dict()

    @app.get("/metrics")
    def get_metrics(n: int, alpha: str, tau: str, seed: int | None = None) -> dict:
        d = build_decomposition(n, seed, alpha, tau)
        try:
            return score_decomposition(d, project).to_dict()
        except MetricError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.get("/heatmap")
    def get_heatmap(n: int, alphas: str, taus: str, seed: int | None = None) -> dict:
        alpha_values = _parse_fraction_list(alphas, "alpha", inclusive=True)
        tau_values = _parse_fraction_list(taus, "tau", inclusive=False)
        key = resolve_run(n, seed)
        m_sem, m_str = runs[key]
        reports: list[list] = []
        flat = []
        for a in alpha_values:
            row = []
            fused = fuse(m_sem, m_str, a)
            for t in tau_values:
                d = threshold_assign(fused, t)
                try:
                    report = score_decomposition(d, project)
                    flat.append(report)
                    row.append(report)
                except MetricError:
                    row.append(None)
            reports.append(row)
        qscores = metric_qscore(flat) if flat else []
        it = iter(qscores)
        qgrid = [
            [next(it) if r is not None else None for r in row] for row in reports
        ]
        return {
            "n": key[0],
            "seed": key[1],
            "alphas": alpha_values,
            "taus": tau_values,
            "qscore": qgrid,
            "reports": [
                [r.to_dict() if r is not None else None for r in row] for row in reports
            ],
        }

    @app.get("/graph")
    def get_graph(n: int, alpha: str, tau: str, seed: int | None = None) -> dict:
        d = build_decomposition(n, seed, alpha, tau)
        return graph_document(project, d)

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app


def serve_api(
    bundle: RunBundle,
    host: str = "127.0.0.1",
    port: int = 8000,
    static_dir: str | Path | None = None,
) -> None:
    """Run the API until interrupted."""
    import uvicorn

    app = create_app(bundle, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")
