"""Syntax trees and their linearization.

A class is represented as an ordered tree of named nodes: non-terminals
carry their declaration kind ("ClassDeclaration", "MethodDeclaration", ...)
and terminals carry the source lexeme. The tree is linearized into a flat
token sequence with ``::left`` / ``::right`` boundary markers so that the
nesting structure survives flattening and the tree can be reconstructed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

LEFT_MARK = "::left"
RIGHT_MARK = "::right"


@dataclass
class AstNode:
    """A finite ordered tree node; leaves have no children."""

    name: str
    children: list["AstNode"] = field(default_factory=list)

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"name": self.name}
        return {"name": self.name, "children": [c.to_dict() for c in self.children]}

    @classmethod
    def from_dict(cls, data: dict) -> "AstNode":
        children = [cls.from_dict(c) for c in data.get("children", [])]
        return cls(name=data["name"], children=children)


def flatten_ast(node: AstNode) -> list[str]:
    """Linearize a tree into a flat token list.

    A leaf contributes its name. An internal node contributes
    ``name::left``, the flattenings of its children in order, then
    ``name::right``. Output length is therefore
    ``#leaves + 2 * #internal_nodes``.
    """
    out: list[str] = []
    _flatten_into(node, out)
    return out


def _flatten_into(node: AstNode, out: list[str]) -> None:
    if node.is_leaf:
        out.append(node.name)
        return
    out.append(node.name + LEFT_MARK)
    for child in node.children:
        _flatten_into(child, out)
    out.append(node.name + RIGHT_MARK)


def unflatten_ast(tokens: list[str]) -> AstNode:
    """Reconstruct a tree from its flattened form.

    Inverse of :func:`flatten_ast` for trees whose node names do not
    themselves end in the boundary markers. Raises ``ValueError`` on
    malformed sequences (unbalanced or misnested markers).
    """
    if not tokens:
        raise ValueError("empty token sequence")
    root, pos = _parse_node(tokens, 0)
    if pos != len(tokens):
        raise ValueError(f"trailing tokens after position {pos}")
    return root


def _parse_node(tokens: list[str], pos: int) -> tuple[AstNode, int]:
    tok = tokens[pos]
    if tok.endswith(RIGHT_MARK):
        raise ValueError(f"unexpected closing marker {tok!r} at position {pos}")
    if not tok.endswith(LEFT_MARK):
        return AstNode(tok), pos + 1
    name = tok[: -len(LEFT_MARK)]
    closing = name + RIGHT_MARK
    pos += 1
    children: list[AstNode] = []
    while True:
        if pos >= len(tokens):
            raise ValueError(f"missing closing marker for {name!r}")
        if tokens[pos] == closing:
            return AstNode(name, children), pos + 1
        child, pos = _parse_node(tokens, pos)
        children.append(child)


def leaf_sequence(node: AstNode) -> list[str]:
    """Left-to-right sequence of leaf names."""
    if node.is_leaf:
        return [node.name]
    out: list[str] = []
    stack = [node]
    # iterative preorder; children pushed in reverse to preserve order
    while stack:
        n = stack.pop()
        if n.is_leaf:
            out.append(n.name)
        else:
            stack.extend(reversed(n.children))
    return out


def count_nodes(node: AstNode) -> tuple[int, int]:
    """Return (leaf_count, internal_count)."""
    leaves = 0
    internal = 0
    stack = [node]
    while stack:
        n = stack.pop()
        if n.is_leaf:
            leaves += 1
        else:
            internal += 1
            stack.extend(n.children)
    return leaves, internal
