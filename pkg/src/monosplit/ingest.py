"""Project ingestion: source tree -> class/method call graph.

A parsed project is a :class:`ProjectGraph`: one :class:`ClassArtifact`
per top-level class/interface/enum (token stream, comments, flattened
syntax tree, methods) plus intra-class call edges and an inter-class
call multigraph with per-site multiplicities.

Call resolution is static and heuristic: receiver-typed lookups through
field/parameter/local declared types, bare calls against the enclosing
class and then its superclass chain, and object creations against the
target class's constructor. Calls that cannot be resolved to a project
class (library calls, chained expressions) are dropped and tallied in
the diagnostics, never guessed.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from . import javasrc
from .javasrc import CONSTRUCTOR_NAME, CallEvent, LocalVar, NewEvent, ParsedType
from .syntax import AstNode, flatten_ast

log = logging.getLogger(__name__)

_SKIP_DIRS = {".git", "target", "build", "out", "node_modules", ".gradle", ".idea"}


class IngestError(Exception):
    """Raised for unusable inputs (empty project, malformed project file)."""


@dataclass
class MethodDecl:
    method_id: int
    owner_class_id: int
    simple_name: str
    arity: int
    declared_param_type_names: list[str] = field(default_factory=list)


@dataclass
class ClassArtifact:
    class_id: int
    qualified_name: str
    tokens: list[str]
    comments: list[str]
    flat_ast: list[str]
    methods: list[MethodDecl]


@dataclass
class ProjectGraph:
    classes: list[ClassArtifact]
    # per class: deduplicated (caller method_id, callee method_id), both in that class
    intra_edges: list[list[tuple[int, int]]]
    # (caller method_id, callee method_id, call_count) with distinct owner classes
    inter_edges: list[tuple[int, int, int]]

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def method_owner(self) -> dict[int, int]:
        return {m.method_id: c.class_id for c in self.classes for m in c.methods}

    def class_pair_calls(self) -> dict[tuple[int, int], int]:
        """Aggregate inter_edges to (caller class, callee class) -> call count."""
        owner = self.method_owner()
        pairs: dict[tuple[int, int], int] = {}
        for caller, callee, count in self.inter_edges:
            key = (owner[caller], owner[callee])
            pairs[key] = pairs.get(key, 0) + count
        return pairs

    def validate(self) -> None:
        ids = [c.class_id for c in self.classes]
        if ids != list(range(len(self.classes))):
            raise IngestError("class ids must be contiguous and ordered")
        owner = {}
        for c in self.classes:
            for m in c.methods:
                if m.method_id in owner:
                    raise IngestError(f"duplicate method id {m.method_id}")
                if m.owner_class_id != c.class_id:
                    raise IngestError(
                        f"method {m.method_id} owner mismatch: "
                        f"{m.owner_class_id} != {c.class_id}"
                    )
                owner[m.method_id] = c.class_id
        if len(self.intra_edges) != len(self.classes):
            raise IngestError("intra_edges must have one list per class")
        for cid, edges in enumerate(self.intra_edges):
            for caller, callee in edges:
                if caller not in owner or callee not in owner:
                    raise IngestError(f"intra edge ({caller}, {callee}) references unknown method")
                if owner[caller] != cid or owner[callee] != cid:
                    raise IngestError(f"intra edge ({caller}, {callee}) crosses class {cid}")
        for caller, callee, count in self.inter_edges:
            if caller not in owner or callee not in owner:
                raise IngestError(f"inter edge ({caller}, {callee}) references unknown method")
            if owner[caller] == owner[callee]:
                raise IngestError(
                    f"inter edge ({caller}, {callee}) has both endpoints in class {owner[caller]}"
                )
            if count < 1:
                raise IngestError(f"inter edge ({caller}, {callee}) has call_count {count} < 1")


@dataclass
class ParseOptions:
    extensions: tuple[str, ...] = (".java",)


@dataclass
class Diagnostics:
    files_parsed: int = 0
    failed_files: list[dict] = field(default_factory=list)
    unresolved_calls: int = 0
    resolved_intra_calls: int = 0
    resolved_inter_calls: int = 0
    duplicate_simple_names: list[str] = field(default_factory=list)
    class_census: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "files_parsed": self.files_parsed,
            "failed_files": self.failed_files,
            "unresolved_calls": self.unresolved_calls,
            "resolved_intra_calls": self.resolved_intra_calls,
            "resolved_inter_calls": self.resolved_inter_calls,
            "duplicate_simple_names": self.duplicate_simple_names,
            "class_census": self.class_census,
        }


def parse_java_project(
    root: str | Path,
    options: ParseOptions | None = None,
) -> tuple[ProjectGraph, Diagnostics]:
    """Parse a Java source tree under `root` into a ProjectGraph.

    Files that fail to parse are skipped with a warning and recorded in
    the diagnostics; an I/O failure on a readable-looking tree or a tree
    with zero parseable classes is an error.
    """
    options = options or ParseOptions()
    root = Path(root)
    if not root.exists():
        raise IngestError(f"source root does not exist: {root}")
    diagnostics = Diagnostics()
    parsed: list[ParsedType] = []
    for path in sorted(_iter_source_files(root, options.extensions)):
        source = path.read_text(encoding="utf-8")
        try:
            types = javasrc.parse_source(source)
        except javasrc.JavaSyntaxError as exc:
            log.warning("skipping %s: %s", path, exc)
            diagnostics.failed_files.append({"path": str(path), "error": str(exc)})
            continue
        diagnostics.files_parsed += 1
        parsed.extend(types)
    if not parsed:
        raise IngestError("empty project: no parseable classes found")
    graph = _assemble(parsed, diagnostics)
    graph.validate()
    return graph, diagnostics


def _iter_source_files(root: Path, extensions: tuple[str, ...]):
    for path in root.rglob("*"):
        if not path.is_file() or path.suffix not in extensions:
            continue
        if any(part in _SKIP_DIRS for part in path.parts):
            continue
        yield path


# --------------------------------------------------------------------------
# assembly & resolution

class _ResolvedClass:
    """Resolution-time view of one parsed type."""

    def __init__(self, class_id: int, decl: ParsedType):
        self.class_id = class_id
        self.decl = decl
        self.fields = {name: type_name for type_name, name in decl.fields}
        self.methods_by_key: dict[tuple[str, int], int] = {}
        self.init_method_ids: list[int] = []
        self.superclass: "_ResolvedClass | None" = None


def _assemble(parsed: list[ParsedType], diagnostics: Diagnostics) -> ProjectGraph:
    parsed = sorted(parsed, key=lambda t: t.qualified_name)
    by_simple_name: dict[str, _ResolvedClass] = {}
    resolved: list[_ResolvedClass] = []
    for class_id, decl in enumerate(parsed):
        rc = _ResolvedClass(class_id, decl)
        resolved.append(rc)
        if decl.name in by_simple_name:
            diagnostics.duplicate_simple_names.append(decl.name)
        else:
            by_simple_name[decl.name] = rc

    # every class gets at least one constructor entry so creations resolve
    for rc in resolved:
        if not any(m.is_constructor for m in rc.decl.methods):
            rc.decl.methods.append(javasrc.ParsedMethod(
                name=CONSTRUCTOR_NAME, return_type=None, params=[], is_constructor=True,
            ))

    classes: list[ClassArtifact] = []
    next_method_id = 0
    method_decls: dict[int, list[MethodDecl]] = {}
    for rc in resolved:
        decls: list[MethodDecl] = []
        for pm in rc.decl.methods:
            md = MethodDecl(
                method_id=next_method_id,
                owner_class_id=rc.class_id,
                simple_name=pm.name,
                arity=pm.arity,
                declared_param_type_names=[t for t, _ in pm.params],
            )
            decls.append(md)
            key = (pm.name, pm.arity)
            if key not in rc.methods_by_key:
                rc.methods_by_key[key] = md.method_id
            if pm.is_constructor:
                rc.init_method_ids.append(md.method_id)
            next_method_id += 1
        method_decls[rc.class_id] = decls
        assert rc.decl.ast is not None
        classes.append(ClassArtifact(
            class_id=rc.class_id,
            qualified_name=rc.decl.qualified_name,
            tokens=list(rc.decl.tokens),
            comments=list(rc.decl.comments),
            flat_ast=flatten_ast(rc.decl.ast),
            methods=decls,
        ))

    for rc in resolved:
        for sup in rc.decl.extends:
            if sup in by_simple_name and by_simple_name[sup] is not rc:
                rc.superclass = by_simple_name[sup]
                break

    intra: list[set[tuple[int, int]]] = [set() for _ in resolved]
    inter: dict[tuple[int, int], int] = {}

    def record(caller_id: int, caller_class: int, callee_id: int, callee_class: int) -> None:
        if caller_class == callee_class:
            intra[caller_class].add((caller_id, callee_id))
            diagnostics.resolved_intra_calls += 1
        else:
            key = (caller_id, callee_id)
            inter[key] = inter.get(key, 0) + 1
            diagnostics.resolved_inter_calls += 1

    for rc in resolved:
        decls = method_decls[rc.class_id]
        for pm, md in zip(rc.decl.methods, decls):
            scope = {name: type_name for type_name, name in pm.params}
            _resolve_events_for_method(
                pm.events, rc, scope, by_simple_name, record, diagnostics, md,
            )
        # field initializers and init blocks attach to the first constructor
        if rc.decl.initializer_events:
            init_id = rc.init_method_ids[0]
            init_md = next(m for m in decls if m.method_id == init_id)
            _resolve_events_for_method(
                rc.decl.initializer_events, rc, {}, by_simple_name, record,
                diagnostics, init_md,
            )

    inter_edges = sorted((c, e, n) for (c, e), n in inter.items())
    intra_edges = [sorted(s) for s in intra]
    graph = ProjectGraph(classes=classes, intra_edges=intra_edges, inter_edges=inter_edges)
    diagnostics.class_census = {
        "classes": sum(1 for t in parsed if t.kind == "class"),
        "interfaces": sum(1 for t in parsed if t.kind == "interface"),
        "enums": sum(1 for t in parsed if t.kind == "enum"),
        "annotations": sum(1 for t in parsed if t.kind == "annotation"),
        "total": len(parsed),
        "methods": next_method_id,
    }
    return graph


def _resolve_events_for_method(
    events, rc, scope, by_simple_name, record, diagnostics, caller_md: MethodDecl,
) -> None:
    """Resolve one method's body events; `scope` starts as the parameter
    map and accumulates local declarations in order."""
    scope = dict(scope)
    for ev in events:
        if isinstance(ev, LocalVar):
            scope[ev.name] = ev.type_name
            continue
        target = _resolve_one(ev, rc, scope, by_simple_name)
        if target is None:
            diagnostics.unresolved_calls += 1
            continue
        callee_class, callee_id = target
        record(caller_md.method_id, rc.class_id, callee_id, callee_class)


def _lookup_method(rc: _ResolvedClass, name: str, argc: int) -> tuple[int, int] | None:
    """Find (owner class_id, method_id) for name/arity in rc or its
    project superclass chain."""
    cur: _ResolvedClass | None = rc
    seen = set()
    while cur is not None and cur.class_id not in seen:
        seen.add(cur.class_id)
        mid = cur.methods_by_key.get((name, argc))
        if mid is not None:
            return cur.class_id, mid
        cur = cur.superclass
    return None


def _lookup_field_type(rc: _ResolvedClass, name: str) -> str | None:
    cur: _ResolvedClass | None = rc
    seen = set()
    while cur is not None and cur.class_id not in seen:
        seen.add(cur.class_id)
        if name in cur.fields:
            return cur.fields[name]
        cur = cur.superclass
    return None


def _resolve_one(
    ev, rc: _ResolvedClass, scope: dict[str, str],
    by_simple_name: dict[str, _ResolvedClass],
) -> tuple[int, int] | None:
    if isinstance(ev, NewEvent):
        target = by_simple_name.get(ev.type_name)
        if target is None:
            return None
        mid = target.methods_by_key.get((CONSTRUCTOR_NAME, ev.argc))
        if mid is None:
            mid = target.init_method_ids[0] if target.init_method_ids else None
        if mid is None:
            return None
        return target.class_id, mid
    assert isinstance(ev, CallEvent)
    if ev.receiver is None:
        return _lookup_method(rc, ev.name, ev.argc)
    if ev.receiver == "super":
        if rc.superclass is None:
            return None
        return _lookup_method(rc.superclass, ev.name, ev.argc)
    if ev.receiver == "<expr>":
        return None
    type_name = scope.get(ev.receiver)
    if type_name is None:
        type_name = _lookup_field_type(rc, ev.receiver)
    if type_name is None and ev.receiver in by_simple_name:
        type_name = ev.receiver  # static call through the class name
    if type_name is None:
        return None
    target = by_simple_name.get(type_name)
    if target is None:
        return None
    return _lookup_method(target, ev.name, ev.argc)


# --------------------------------------------------------------------------
# interchange format

def save_project_graph(graph: ProjectGraph, path: str | Path) -> None:
    Path(path).write_text(json.dumps(project_graph_to_dict(graph), indent=1), encoding="utf-8")


def project_graph_to_dict(graph: ProjectGraph) -> dict:
    return {
        "classes": [
            {
                "id": c.class_id,
                "name": c.qualified_name,
                "tokens": c.tokens,
                "comments": c.comments,
                "flat_ast": c.flat_ast,
                "methods": [
                    {"id": m.method_id, "name": m.simple_name, "arity": m.arity}
                    for m in c.methods
                ],
            }
            for c in graph.classes
        ],
        "intra_edges": [
            [caller, callee]
            for edges in graph.intra_edges
            for caller, callee in edges
        ],
        "inter_edges": [[c, e, n] for c, e, n in graph.inter_edges],
    }


def load_project_graph(path: str | Path) -> ProjectGraph:
    """Load a project interchange file, validating the schema and all
    graph invariants (dangling method references, same-class inter
    edges, non-positive counts)."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise IngestError(f"not valid JSON: {exc}") from exc
    return project_graph_from_dict(data)


def project_graph_from_dict(data: dict) -> ProjectGraph:
    if not isinstance(data, dict):
        raise IngestError("project document must be an object")
    for key in ("classes", "intra_edges", "inter_edges"):
        if key not in data:
            raise IngestError(f"missing field {key!r}")
    classes: list[ClassArtifact] = []
    owner: dict[int, int] = {}
    for record in data["classes"]:
        for key in ("id", "name", "tokens", "comments", "flat_ast", "methods"):
            if key not in record:
                raise IngestError(f"class record missing field {key!r}")
        methods = []
        for m in record["methods"]:
            for key in ("id", "name", "arity"):
                if key not in m:
                    raise IngestError(f"method record missing field {key!r}")
            methods.append(MethodDecl(
                method_id=int(m["id"]),
                owner_class_id=int(record["id"]),
                simple_name=str(m["name"]),
                arity=int(m["arity"]),
            ))
            owner[int(m["id"])] = int(record["id"])
        classes.append(ClassArtifact(
            class_id=int(record["id"]),
            qualified_name=str(record["name"]),
            tokens=[str(t) for t in record["tokens"]],
            comments=[str(c) for c in record["comments"]],
            flat_ast=[str(t) for t in record["flat_ast"]],
            methods=methods,
        ))
    classes.sort(key=lambda c: c.class_id)
    intra: list[list[tuple[int, int]]] = [[] for _ in classes]
    for edge in data["intra_edges"]:
        caller, callee = int(edge[0]), int(edge[1])
        if caller not in owner or callee not in owner:
            raise IngestError(f"intra edge [{caller}, {callee}] references unknown method")
        cid = owner[caller]
        intra[cid].append((caller, callee))
    inter = []
    for edge in data["inter_edges"]:
        if len(edge) != 3:
            raise IngestError(f"inter edge {edge!r} must be [caller, callee, count]")
        inter.append((int(edge[0]), int(edge[1]), int(edge[2])))
    graph = ProjectGraph(
        classes=classes,
        intra_edges=[sorted(set(e)) for e in intra],
        inter_edges=sorted(inter),
    )
    graph.validate()
    return graph


def export_semantic_inputs(graph: ProjectGraph, path: str | Path) -> None:
    """Write the embedding-provider request document: one record per
    class, in class_id order, with tokens/comments/flat_ast always
    present (empty lists, never omitted)."""
    Path(path).write_text(
        json.dumps(embedding_request_records(graph), indent=1), encoding="utf-8"
    )


def embedding_request_records(graph: ProjectGraph) -> list[dict]:
    return [
        {
            "class_id": c.class_id,
            "name": c.qualified_name,
            "tokens": c.tokens,
            "comments": c.comments,
            "flat_ast": c.flat_ast,
        }
        for c in graph.classes
    ]
