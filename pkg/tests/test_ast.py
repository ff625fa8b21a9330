"""Tree flattening and reconstruction."""

import pytest
from hypothesis import given, strategies as st

from monosplit.syntax import (
    AstNode,
    count_nodes,
    flatten_ast,
    leaf_sequence,
    unflatten_ast,
)


def test_flatten_single_leaf():
    assert flatten_ast(AstNode("x")) == ["x"]


def test_flatten_one_level():
    tree = AstNode("M", [AstNode("a"), AstNode("b")])
    assert flatten_ast(tree) == ["M::left", "a", "b", "M::right"]


def test_flatten_nested():
    tree = AstNode("C", [AstNode("f"), AstNode("M", [AstNode("a")])])
    assert flatten_ast(tree) == ["C::left", "f", "M::left", "a", "M::right", "C::right"]


def test_flatten_method_shape():
    tree = AstNode(
        "MethodDeclaration",
        [
            AstNode("int"),
            AstNode("count"),
            AstNode("Parameter", [AstNode("Item"), AstNode("item")]),
        ],
    )
    assert flatten_ast(tree) == [
        "MethodDeclaration::left",
        "int",
        "count",
        "Parameter::left",
        "Item",
        "item",
        "Parameter::right",
        "MethodDeclaration::right",
    ]


def test_flatten_deep_chain():
    tree = AstNode("A", [AstNode("B", [AstNode("C", [AstNode("d")])])])
    assert flatten_ast(tree) == [
        "A::left", "B::left", "C::left", "d", "C::right", "B::right", "A::right",
    ]


def test_flatten_length_law():
    tree = AstNode(
        "ClassDeclaration",
        [
            AstNode("Shop"),
            AstNode("MethodDeclaration", [AstNode("void"), AstNode("run")]),
            AstNode("FieldDeclaration", [AstNode("int"), AstNode("size")]),
        ],
    )
    leaves, internal = count_nodes(tree)
    assert len(flatten_ast(tree)) == leaves + 2 * internal


def test_unflatten_inverts_flatten():
    tree = AstNode("C", [AstNode("f"), AstNode("M", [AstNode("a"), AstNode("b")])])
    assert unflatten_ast(flatten_ast(tree)) == tree


def test_unflatten_rejects_malformed():
    with pytest.raises(ValueError):
        unflatten_ast([])
    with pytest.raises(ValueError):
        unflatten_ast(["A::left", "x"])
    with pytest.raises(ValueError):
        unflatten_ast(["A::right"])
    with pytest.raises(ValueError):
        unflatten_ast(["A::left", "x", "A::right", "extra"])
    with pytest.raises(ValueError):
        unflatten_ast(["A::left", "B::left", "A::right", "B::right"])


def _names():
    # names that cannot collide with the boundary markers
    return st.text(
        alphabet="abcdefgMNPQ", min_size=1, max_size=4
    ).filter(lambda s: not s.endswith(("::left", "::right")))


def _trees(max_nodes: int = 50):
    return st.recursive(
        _names().map(AstNode),
        lambda kids: st.builds(
            AstNode, _names(), st.lists(kids, min_size=1, max_size=4)
        ),
        max_leaves=max_nodes // 2,
    )


@given(_trees())
def test_parse_back_roundtrip(tree):
    assert unflatten_ast(flatten_ast(tree)) == tree


@given(_trees())
def test_leaf_filter_property(tree):
    flat = flatten_ast(tree)
    non_markers = [t for t in flat if not t.endswith(("::left", "::right"))]
    assert non_markers == leaf_sequence(tree)


@given(_trees())
def test_length_law_property(tree):
    leaves, internal = count_nodes(tree)
    assert len(flatten_ast(tree)) == leaves + 2 * internal


def test_ast_dict_roundtrip():
    tree = AstNode("C", [AstNode("x"), AstNode("M", [AstNode("y")])])
    assert AstNode.from_dict(tree.to_dict()) == tree
