"""Decomposition quality metrics.

Four individual metrics (structural modularity, inter-call percentage,
interface number, non-extreme distribution) plus a composite score that
min-max normalizes each metric across a batch of candidate
decompositions and rewards cohesion while penalizing coupling,
interface surface, and degenerate service sizes.

Overlap semantics used throughout: a call between two classes is
intra-service iff the classes share at least one service. Outlier
classes belong to no service, so their calls always count as
cross-service traffic, and they contribute nothing to cohesion.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING

from .ingest import ProjectGraph

if TYPE_CHECKING:
    from .decompose import Decomposition

log = logging.getLogger(__name__)

# service sizes outside this band are considered extreme
NON_EXTREME_MIN = 5
NON_EXTREME_MAX = 20


class MetricError(Exception):
    """Raised when a decomposition cannot be scored."""


@dataclass
class MetricReport:
    sm: float
    icp: float
    ifn: float
    ned: float
    qscore: float | None = None

    def to_dict(self) -> dict:
        out = {"sm": self.sm, "icp": self.icp, "ifn": self.ifn, "ned": self.ned}
        if self.qscore is not None:
            out["qscore"] = self.qscore
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "MetricReport":
        return cls(
            sm=float(data["sm"]),
            icp=float(data["icp"]),
            ifn=float(data["ifn"]),
            ned=float(data["ned"]),
            qscore=float(data["qscore"]) if "qscore" in data else None,
        )


def _service_sets(d: "Decomposition") -> list[set[int]]:
    services = [set(s) for s in d.services]
    if not services:
        raise MetricError("decomposition has no services")
    if any(not s for s in services):
        raise MetricError("decomposition contains an empty service")
    return services


def _membership_map(services: list[set[int]]) -> dict[int, set[int]]:
    member: dict[int, set[int]] = {}
    for idx, svc in enumerate(services):
        for c in svc:
            member.setdefault(c, set()).add(idx)
    return member


def _class_links(g: ProjectGraph) -> set[tuple[int, int]]:
    """Unordered class pairs with at least one call between them."""
    return {(min(u, v), max(u, v)) for u, v in g.class_pair_calls()}


def metric_sm(d: "Decomposition", g: ProjectGraph) -> float:
    """Structural modularity: mean within-service link density minus mean
    cross-service link density over service pairs. Pairs of classes that
    share any service never count as coupling."""
    services = _service_sets(d)
    member = _membership_map(services)
    links = _class_links(g)
    n = len(services)

    cohesion = 0.0
    for svc in services:
        mu = sum(1 for u, v in links if u in svc and v in svc)
        cohesion += mu / (len(svc) ** 2)
    cohesion /= n

    if n == 1:
        return cohesion

    coupling = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            sigma = 0
            for u, v in links:
                if member.get(u, set()) & member.get(v, set()):
                    continue
                if (u in services[i] and v in services[j]) or (
                    u in services[j] and v in services[i]
                ):
                    sigma += 1
            coupling += sigma / (2 * len(services[i]) * len(services[j]))
    coupling /= n * (n - 1) / 2
    return cohesion - coupling


def metric_icp(d: "Decomposition", g: ProjectGraph) -> float:
    """Call-weighted fraction of inter-class calls whose endpoints share
    no service."""
    services = _service_sets(d)
    member = _membership_map(services)
    total = 0
    cross = 0
    for (u, v), count in g.class_pair_calls().items():
        total += count
        if not (member.get(u, set()) & member.get(v, set())):
            cross += count
    if total == 0:
        log.warning("project has no inter-class calls; ICP reported as 0")
        return 0.0
    return cross / total


def metric_ifn(d: "Decomposition", g: ProjectGraph) -> float:
    """Mean number of interface classes per service, where an interface
    class is one called by at least one class outside its service."""
    services = _service_sets(d)
    pairs = g.class_pair_calls()
    ifn_total = 0
    for svc in services:
        interfaces = {
            callee for caller, callee in pairs if callee in svc and caller not in svc
        }
        ifn_total += len(interfaces)
    return ifn_total / len(services)


def metric_ned(d: "Decomposition") -> float:
    """Share of membership mass in services of extreme size. Sizes count
    overlapping memberships, so a class in k services contributes k."""
    services = _service_sets(d)
    sizes = [len(s) for s in services]
    total = sum(sizes)
    non_extreme = sum(s for s in sizes if NON_EXTREME_MIN <= s <= NON_EXTREME_MAX)
    return 1.0 - non_extreme / total


def score_decomposition(d: "Decomposition", g: ProjectGraph) -> MetricReport:
    return MetricReport(
        sm=metric_sm(d, g),
        icp=metric_icp(d, g),
        ifn=metric_ifn(d, g),
        ned=metric_ned(d),
    )


def _minmax(values: list[float]) -> list[float]:
    lo = min(values)
    hi = max(values)
    if hi == lo:
        return [0.0] * len(values)
    return [(v - lo) / (hi - lo) for v in values]


def metric_qscore(reports: list[MetricReport]) -> list[float]:
    """Composite score per report: normalized SM minus normalized ICP,
    IFN, and NED, each min-max scaled across the report list. A
    degenerate metric (max equals min) contributes 0 for every report."""
    if not reports:
        raise MetricError("qscore requires at least one report")
    sm = _minmax([r.sm for r in reports])
    icp = _minmax([r.icp for r in reports])
    ifn = _minmax([r.ifn for r in reports])
    ned = _minmax([r.ned for r in reports])
    return [s - c - f - n for s, c, f, n in zip(sm, icp, ifn, ned)]
