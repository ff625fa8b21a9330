"""Java source scanning: lexer and declaration-level parser.

The grammar coverage is deliberately narrow: package/import headers,
class/interface/enum declarations, field and method declarations with
their parameter types, method-invocation and object-creation expressions,
and line/block comments. Statement and expression semantics beyond that
are not modeled; method bodies are scanned at the token level for call
sites and local variable declarations, which is all the downstream
call-graph construction needs.

Nested types are folded into their top-level enclosing type: their fields
and methods join the enclosing type's member lists (in source order) and
their declaration subtree stays embedded in the enclosing syntax tree.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .syntax import AstNode

KEYWORDS = frozenset(
    """abstract assert boolean break byte case catch char class const continue
    default do double else enum extends final finally float for goto if
    implements import instanceof int interface long native new package private
    protected public return short static strictfp super switch synchronized
    this throw throws transient try void volatile while true false null
    """.split()
)

PRIMITIVE_TYPES = frozenset(
    "boolean byte char short int long float double void".split()
)

MODIFIERS = frozenset(
    "public protected private static final abstract strictfp native synchronized transient volatile default".split()
)

# token kinds
KEYWORD = "keyword"
IDENT = "ident"
NUMBER = "number"
STRING = "string"
CHAR = "char"
OP = "op"

# kinds that survive into the per-class token stream (punctuation excluded)
_ARTIFACT_KINDS = frozenset({KEYWORD, IDENT, NUMBER, STRING, CHAR})

# '>' is always lexed as a lone token so nested generic closers ('>>') do
# not fuse into shift operators; operators never reach artifact token
# streams, so the difference is invisible downstream.
_MULTI_OPS = (
    "<<=", "->", "::", "==", "!=", "<=", "&&", "||", "++", "--",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<",
)

CONSTRUCTOR_NAME = "<init>"


class JavaSyntaxError(Exception):
    """Raised when a file cannot be scanned into declarations."""


@dataclass
class Token:
    kind: str
    text: str
    line: int


@dataclass
class Comment:
    line: int
    text: str


def lex(source: str) -> tuple[list[Token], list[Comment]]:
    """Split Java source into tokens and comments."""
    tokens: list[Token] = []
    comments: list[Comment] = []
    i = 0
    line = 1
    n = len(source)
    while i < n:
        c = source[i]
        if c == "\n":
            line += 1
            i += 1
            continue
        if c.isspace():
            i += 1
            continue
        if c == "/" and i + 1 < n:
            nxt = source[i + 1]
            if nxt == "/":
                end = source.find("\n", i)
                end = n if end == -1 else end
                text = source[i + 2 : end].strip()
                if text:
                    comments.append(Comment(line, text))
                i = end
                continue
            if nxt == "*":
                end = source.find("*/", i + 2)
                if end == -1:
                    raise JavaSyntaxError(f"unterminated block comment at line {line}")
                text = _clean_block_comment(source[i + 2 : end])
                if text:
                    comments.append(Comment(line, text))
                line += source.count("\n", i, end + 2)
                i = end + 2
                continue
        if c == '"':
            if source.startswith('"""', i):
                end = source.find('"""', i + 3)
                if end == -1:
                    raise JavaSyntaxError(f"unterminated text block at line {line}")
                text = source[i : end + 3]
                tokens.append(Token(STRING, text, line))
                line += text.count("\n")
                i = end + 3
                continue
            j = i + 1
            while j < n:
                if source[j] == "\\":
                    j += 2
                    continue
                if source[j] == '"' or source[j] == "\n":
                    break
                j += 1
            if j >= n or source[j] != '"':
                raise JavaSyntaxError(f"unterminated string literal at line {line}")
            tokens.append(Token(STRING, source[i : j + 1], line))
            i = j + 1
            continue
        if c == "'":
            j = i + 1
            while j < n:
                if source[j] == "\\":
                    j += 2
                    continue
                if source[j] == "'" or source[j] == "\n":
                    break
                j += 1
            if j >= n or source[j] != "'":
                raise JavaSyntaxError(f"unterminated char literal at line {line}")
            tokens.append(Token(CHAR, source[i : j + 1], line))
            i = j + 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i
            while j < n:
                ch = source[j]
                if ch.isalnum() or ch in "._":
                    if ch in "eEpP" and j + 1 < n and source[j + 1] in "+-" and j > i:
                        j += 2
                        continue
                    j += 1
                    continue
                break
            tokens.append(Token(NUMBER, source[i:j], line))
            i = j
            continue
        if c.isalpha() or c in "_$":
            j = i + 1
            while j < n and (source[j].isalnum() or source[j] in "_$"):
                j += 1
            word = source[i:j]
            kind = KEYWORD if word in KEYWORDS else IDENT
            tokens.append(Token(kind, word, line))
            i = j
            continue
        matched = False
        if c != ">":
            for op in _MULTI_OPS:
                if source.startswith(op, i):
                    tokens.append(Token(OP, op, line))
                    i += len(op)
                    matched = True
                    break
        if not matched:
            tokens.append(Token(OP, c, line))
            i += 1
    return tokens, comments


def _clean_block_comment(raw: str) -> str:
    lines = [ln.strip().lstrip("*").strip() for ln in raw.split("\n")]
    return " ".join(ln for ln in lines if ln)


# --------------------------------------------------------------------------
# body-scan events

@dataclass
class CallEvent:
    """A method invocation site. receiver is None for bare/this calls,
    "super" for super calls, a simple name for single-identifier (or
    ``this.x``) receivers, and "<expr>" for anything more complex."""

    receiver: str | None
    name: str
    argc: int


@dataclass
class NewEvent:
    type_name: str
    argc: int


@dataclass
class LocalVar:
    type_name: str
    name: str


BodyEvent = CallEvent | NewEvent | LocalVar


@dataclass
class ParsedMethod:
    name: str
    return_type: str | None
    params: list[tuple[str, str]]  # (type simple name, parameter name)
    is_constructor: bool
    events: list[BodyEvent] = field(default_factory=list)
    ast: AstNode | None = None

    @property
    def arity(self) -> int:
        return len(self.params)


@dataclass
class ParsedType:
    kind: str  # "class" | "interface" | "enum" | "annotation"
    package: str
    name: str
    extends: list[str] = field(default_factory=list)
    implements: list[str] = field(default_factory=list)
    fields: list[tuple[str, str]] = field(default_factory=list)  # (type, name)
    methods: list[ParsedMethod] = field(default_factory=list)
    enum_constants: list[str] = field(default_factory=list)
    initializer_events: list[BodyEvent] = field(default_factory=list)
    member_nodes: list[AstNode] = field(default_factory=list)
    ast: AstNode | None = None
    tokens: list[str] = field(default_factory=list)  # idents/keywords/literals in order
    comments: list[str] = field(default_factory=list)
    start_line: int = 0
    end_line: int = 0

    @property
    def qualified_name(self) -> str:
        return f"{self.package}.{self.name}" if self.package else self.name


def parse_source(source: str) -> list[ParsedType]:
    """Parse one compilation unit into its top-level types.

    Comments are attached to the type whose declaration span contains
    them; comments between declarations attach to the following type and
    trailing comments to the last one.
    """
    tokens, comments = lex(source)
    parser = _Parser(tokens)
    types = parser.parse_compilation_unit()
    _attach_comments(types, comments)
    return types


def _attach_comments(types: list[ParsedType], comments: list[Comment]) -> None:
    if not types:
        return
    for comment in comments:
        target = None
        for t in types:
            if t.start_line <= comment.line <= t.end_line or comment.line < t.start_line:
                target = t
                break
        if target is None:
            target = types[-1]
        target.comments.append(comment.text)


class _Parser:
    """Declaration-level recursive scan over the token stream."""

    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0

    # -- token helpers

    def peek(self, offset: int = 0) -> Token | None:
        j = self.i + offset
        return self.toks[j] if j < len(self.toks) else None

    def at(self, text: str, offset: int = 0) -> bool:
        t = self.peek(offset)
        return t is not None and t.text == text

    def advance(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        t = self.peek()
        if t is None or t.text != text:
            got = t.text if t else "<eof>"
            line = t.line if t else -1
            raise JavaSyntaxError(f"expected {text!r}, got {got!r} at line {line}")
        return self.advance()

    def skip_balanced(self, open_text: str, close_text: str) -> None:
        self.expect(open_text)
        depth = 1
        while self.i < len(self.toks):
            t = self.advance()
            if t.text == open_text:
                depth += 1
            elif t.text == close_text:
                depth -= 1
                if depth == 0:
                    return
        raise JavaSyntaxError(f"unbalanced {open_text!r}")

    def skip_annotation(self) -> None:
        self.expect("@")
        self.advance()  # name
        while self.at(".") :
            self.advance()
            self.advance()
        if self.at("("):
            self.skip_balanced("(", ")")

    def skip_modifiers_and_annotations(self) -> None:
        while True:
            t = self.peek()
            if t is None:
                return
            if t.text == "@" and not self.at("interface", 1):
                self.skip_annotation()
                continue
            if t.text in MODIFIERS:
                self.advance()
                continue
            if t.text == "<":  # generic method type parameters
                self._skip_generics()
                continue
            return

    def _skip_generics(self) -> None:
        self.expect("<")
        depth = 1
        while self.i < len(self.toks):
            t = self.advance()
            if t.text == "<":
                depth += 1
            elif t.text == ">":
                depth -= 1
                if depth == 0:
                    return
        raise JavaSyntaxError("unbalanced generic brackets")

    def parse_type_name(self) -> str | None:
        """Parse a type reference, returning its simple name (last dotted
        segment; generics and array brackets dropped). Returns None if the
        cursor is not at a plausible type."""
        t = self.peek()
        if t is None:
            return None
        if t.text in PRIMITIVE_TYPES:
            self.advance()
            simple = t.text
        elif t.kind == IDENT:
            self.advance()
            simple = t.text
            while self.at(".") and (nxt := self.peek(1)) is not None and nxt.kind == IDENT:
                self.advance()
                simple = self.advance().text
        else:
            return None
        if self.at("<"):
            self._skip_generics()
        while self.at("[") and self.at("]", 1):
            self.advance()
            self.advance()
        if self.at(".") and self.at(".", 1) and self.at(".", 2):  # varargs
            self.advance()
            self.advance()
            self.advance()
        return simple

    # -- compilation unit

    def parse_compilation_unit(self) -> list[ParsedType]:
        package = ""
        types: list[ParsedType] = []
        while self.i < len(self.toks):
            t = self.peek()
            assert t is not None
            if t.text == "package":
                self.advance()
                parts = []
                while not self.at(";"):
                    tok = self.advance()
                    if tok.kind == IDENT:
                        parts.append(tok.text)
                self.expect(";")
                package = ".".join(parts)
                continue
            if t.text == "import":
                while not self.at(";"):
                    self.advance()
                self.expect(";")
                continue
            if t.text == ";":
                self.advance()
                continue
            start_idx = self.i
            self.skip_modifiers_and_annotations()
            head = self.peek()
            if head is None:
                break
            if head.text in ("class", "interface", "enum") or (
                head.text == "@" and self.at("interface", 1)
            ):
                types.append(self.parse_type_declaration(package, start_idx))
            else:
                self.advance()  # tolerate stray tokens between declarations
        return types

    # -- type declarations

    def parse_type_declaration(self, package: str, start_idx: int) -> ParsedType:
        if self.at("@"):
            self.advance()
            self.expect("interface")
            kind = "annotation"
        else:
            kind = self.advance().text  # class | interface | enum
        name_tok = self.advance()
        decl = ParsedType(kind=kind, package=package, name=name_tok.text)
        decl.start_line = self.toks[start_idx].line
        if self.at("<"):
            self._skip_generics()
        while self.peek() is not None and not self.at("{"):
            t = self.peek()
            assert t is not None
            if t.text == "extends":
                self.advance()
                decl.extends = self._parse_type_list()
            elif t.text == "implements":
                self.advance()
                decl.implements = self._parse_type_list()
            else:
                self.advance()  # permits lists, stray annotations
        self.expect("{")
        self._parse_type_body(decl)
        decl.end_line = self.toks[self.i - 1].line if self.i > 0 else decl.start_line
        decl.tokens = [
            t.text for t in self.toks[start_idx : self.i] if t.kind in _ARTIFACT_KINDS
        ]
        decl.ast = self._build_type_ast(decl)
        return decl

    def _parse_type_list(self) -> list[str]:
        names = []
        while True:
            simple = self.parse_type_name()
            if simple is None:
                break
            names.append(simple)
            if self.at(","):
                self.advance()
                continue
            break
        return names

    def _parse_type_body(self, decl: ParsedType) -> None:
        """Parse members between '{' (already consumed) and the matching
        '}'."""
        if decl.kind == "enum":
            self._parse_enum_constants(decl)
        while self.i < len(self.toks):
            if self.at("}"):
                self.advance()
                return
            if self.at(";") or self.at(","):
                self.advance()
                continue
            member_start = self.i
            self.skip_modifiers_and_annotations()
            t = self.peek()
            if t is None:
                break
            if t.text in ("class", "interface", "enum") or (
                t.text == "@" and self.at("interface", 1)
            ):
                nested = self.parse_type_declaration(decl.package, member_start)
                decl.fields.extend(nested.fields)
                decl.methods.extend(nested.methods)
                decl.initializer_events.extend(nested.initializer_events)
                assert nested.ast is not None
                decl.member_nodes.append(nested.ast)
                continue
            if t.text == "{":  # instance/static initializer block
                decl.initializer_events.extend(self._scan_block_events())
                continue
            if t.kind == IDENT and t.text == decl.name and self.at("(", 1):
                self.advance()
                decl.methods.append(self._parse_method_rest(
                    name=CONSTRUCTOR_NAME, return_type=None, is_constructor=True,
                    declared_name=t.text, decl=decl,
                ))
                continue
            rtype = self.parse_type_name()
            if rtype is None:
                self.advance()
                continue
            name_tok = self.peek()
            if name_tok is None:
                break
            if name_tok.kind == IDENT and self.at("(", 1):
                self.advance()
                decl.methods.append(self._parse_method_rest(
                    name=name_tok.text, return_type=rtype, is_constructor=False,
                    declared_name=name_tok.text, decl=decl,
                ))
                continue
            if name_tok.kind == IDENT:
                self._parse_field_declarators(rtype, decl)
                continue
            self.advance()
        raise JavaSyntaxError(f"unterminated type body for {decl.name!r}")

    def _parse_enum_constants(self, decl: ParsedType) -> None:
        while self.i < len(self.toks):
            if self.at(";"):
                self.advance()
                return
            if self.at("}"):
                return
            t = self.peek()
            assert t is not None
            if t.text == "@":
                self.skip_annotation()
                continue
            if t.kind != IDENT:
                self.advance()
                continue
            decl.enum_constants.append(self.advance().text)
            if self.at("("):
                self.skip_balanced("(", ")")
            if self.at("{"):
                self.skip_balanced("{", "}")
            if self.at(","):
                self.advance()

    def _parse_field_declarators(self, type_name: str, decl: ParsedType) -> None:
        while True:
            name_tok = self.peek()
            if name_tok is None or name_tok.kind != IDENT:
                break
            self.advance()
            while self.at("[") and self.at("]", 1):
                self.advance()
                self.advance()
            decl.fields.append((type_name, name_tok.text))
            decl.member_nodes.append(
                AstNode("FieldDeclaration", [AstNode(type_name), AstNode(name_tok.text)])
            )
            if self.at("="):
                self.advance()
                init_start = self.i
                depth = 0
                while self.i < len(self.toks):
                    txt = self.toks[self.i].text
                    if depth == 0 and txt in (",", ";"):
                        break
                    if txt in ("(", "[", "{"):
                        depth += 1
                    elif txt in (")", "]", "}"):
                        depth -= 1
                    self.i += 1
                decl.initializer_events.extend(
                    _scan_events(self.toks, init_start, self.i)
                )
            if self.at(","):
                self.advance()
                continue
            if self.at(";"):
                self.advance()
            break

    def _parse_method_rest(
        self,
        name: str,
        return_type: str | None,
        is_constructor: bool,
        declared_name: str,
        decl: ParsedType,
    ) -> ParsedMethod:
        params: list[tuple[str, str]] = []
        self.expect("(")
        while not self.at(")"):
            self.skip_modifiers_and_annotations()
            ptype = self.parse_type_name()
            if ptype is None:
                self.advance()
                continue
            ptok = self.peek()
            if ptok is not None and ptok.kind == IDENT:
                self.advance()
                while self.at("[") and self.at("]", 1):
                    self.advance()
                    self.advance()
                params.append((ptype, ptok.text))
            if self.at(","):
                self.advance()
        self.expect(")")
        while self.peek() is not None and not self.at("{") and not self.at(";"):
            self.advance()  # throws clause, annotation-member defaults
        method = ParsedMethod(
            name=name, return_type=return_type, params=params,
            is_constructor=is_constructor,
        )
        if self.at("{"):
            method.events = self._scan_block_events()
        elif self.at(";"):
            self.advance()
        method.ast = self._build_method_ast(method, declared_name)
        decl.member_nodes.append(method.ast)
        return method

    def _scan_block_events(self) -> list[BodyEvent]:
        start = self.i
        self.skip_balanced("{", "}")
        return _scan_events(self.toks, start + 1, self.i - 1)

    # -- syntax tree assembly

    def _build_method_ast(self, method: ParsedMethod, declared_name: str) -> AstNode:
        kind = "ConstructorDeclaration" if method.is_constructor else "MethodDeclaration"
        children: list[AstNode] = []
        if method.return_type is not None:
            children.append(AstNode(method.return_type))
        children.append(AstNode(declared_name))
        for ptype, pname in method.params:
            children.append(AstNode("Parameter", [AstNode(ptype), AstNode(pname)]))
        body_children = []
        for ev in method.events:
            if isinstance(ev, CallEvent):
                kids = [AstNode(ev.receiver)] if ev.receiver else []
                kids.append(AstNode(ev.name))
                body_children.append(AstNode("MethodInvocation", kids))
            elif isinstance(ev, NewEvent):
                body_children.append(AstNode("ObjectCreation", [AstNode(ev.type_name)]))
        if body_children:
            children.append(AstNode("Body", body_children))
        return AstNode(kind, children)

    def _build_type_ast(self, decl: ParsedType) -> AstNode:
        kind_names = {
            "class": "ClassDeclaration",
            "interface": "InterfaceDeclaration",
            "enum": "EnumDeclaration",
            "annotation": "AnnotationDeclaration",
        }
        children: list[AstNode] = [AstNode(decl.name)]
        if decl.extends:
            children.append(AstNode("Extends", [AstNode(n) for n in decl.extends]))
        if decl.implements:
            children.append(AstNode("Implements", [AstNode(n) for n in decl.implements]))
        for const in decl.enum_constants:
            children.append(AstNode("EnumConstant", [AstNode(const)]))
        children.extend(decl.member_nodes)
        return AstNode(kind_names[decl.kind], children)


# --------------------------------------------------------------------------
# token-level body scanning

def _scan_events(toks: list[Token], start: int, end: int) -> list[BodyEvent]:
    """Scan a body span for invocations, object creations, and local
    variable declarations, in source order."""
    events: list[BodyEvent] = []
    i = start
    while i < end:
        t = toks[i]
        if t.text == "new":
            simple, j = _speculative_type(toks, i + 1, end)
            if simple is not None and j < end and toks[j].text == "(":
                events.append(NewEvent(simple, _count_args(toks, j, end)))
                i = j + 1
                continue
            i += 1
            continue
        if t.text in ("this", "super") and i + 1 < end and toks[i + 1].text == "(":
            # constructor delegation
            receiver = "super" if t.text == "super" else None
            events.append(CallEvent(receiver, CONSTRUCTOR_NAME, _count_args(toks, i + 1, end)))
            i += 2
            continue
        if t.kind == IDENT and i + 1 < end and toks[i + 1].text == "(":
            if _is_declaration_header(toks, i, end):
                i = _match_paren(toks, i + 1, end) + 1
                continue
            receiver = _receiver_of(toks, i, start)
            events.append(CallEvent(receiver, t.text, _count_args(toks, i + 1, end)))
            i += 2
            continue
        if t.kind == IDENT or t.text in PRIMITIVE_TYPES:
            simple, j = _speculative_type(toks, i, end)
            if (
                simple is not None
                and j > i
                and j < end
                and toks[j].kind == IDENT
                and j + 1 < end
                and toks[j + 1].text in ("=", ";", ",", ":")
            ):
                events.append(LocalVar(simple, toks[j].text))
                i = j + 1
                continue
            i += 1
            continue
        i += 1
    return events


def _speculative_type(toks: list[Token], i: int, end: int) -> tuple[str | None, int]:
    """Try to read a type reference starting at i; returns (simple name,
    index after the type) or (None, i). Bails out of implausible generic
    spans so comparison chains are not swallowed."""
    if i >= end:
        return None, i
    t = toks[i]
    if t.text in PRIMITIVE_TYPES:
        simple = t.text
        j = i + 1
    elif t.kind == IDENT:
        simple = t.text
        j = i + 1
        while j + 1 < end and toks[j].text == "." and toks[j + 1].kind == IDENT:
            simple = toks[j + 1].text
            j += 2
    else:
        return None, i
    if j < end and toks[j].text == "<":
        k = j + 1
        depth = 1
        closed = False
        while k < end:
            txt = toks[k].text
            if txt in (";", "{", "}", "=") or toks[k].kind in (STRING, CHAR):
                break  # not generics; '<' was a comparison
            if txt == "<":
                depth += 1
            elif txt == ">":
                depth -= 1
                if depth == 0:
                    j = k + 1
                    closed = True
                    break
            k += 1
        if not closed:
            return simple, j
    while j + 1 < end and toks[j].text == "[" and toks[j + 1].text == "]":
        j += 2
    return simple, j


def _match_paren(toks: list[Token], i: int, end: int) -> int:
    """Index of the ')' matching the '(' at i (bounded by end)."""
    depth = 0
    j = i
    while j < end:
        txt = toks[j].text
        if txt == "(":
            depth += 1
        elif txt == ")":
            depth -= 1
            if depth == 0:
                return j
        j += 1
    return end - 1


def _is_declaration_header(toks: list[Token], i: int, end: int) -> bool:
    """True when ident '(' ... ')' '{' preceded by a type-ish token is a
    method declaration header (anonymous class bodies)."""
    close = _match_paren(toks, i + 1, end)
    if close + 1 >= end or toks[close + 1].text != "{":
        return False
    if i == 0:
        return False
    prev = toks[i - 1]
    return prev.kind == IDENT or prev.text in PRIMITIVE_TYPES or prev.text in (">", "]")


def _count_args(toks: list[Token], open_idx: int, end: int) -> int:
    depth = 0
    commas = 0
    any_tokens = False
    j = open_idx
    while j < end:
        txt = toks[j].text
        if txt in ("(", "[", "{"):
            depth += 1
        elif txt in (")", "]", "}"):
            depth -= 1
            if depth == 0:
                break
        elif depth == 1:
            any_tokens = True
            if txt == ",":
                commas += 1
        j += 1
    if not any_tokens:
        return 0
    return commas + 1


def _receiver_of(toks: list[Token], call_idx: int, start: int) -> str | None:
    """Classify the receiver of the invocation whose name sits at call_idx."""
    if call_idx == start or toks[call_idx - 1].text != ".":
        return None  # bare call
    chain: list[str] = []
    k = call_idx - 1
    while k > start and toks[k].text == ".":
        prev = toks[k - 1]
        if prev.kind == IDENT or prev.text in ("this", "super"):
            chain.append(prev.text)
            k -= 2
        else:
            return "<expr>"  # chained off a call/array/literal result
    chain.reverse()
    if not chain:
        return "<expr>"
    if chain == ["this"]:
        return None
    if chain == ["super"]:
        return "super"
    if len(chain) == 2 and chain[0] == "this":
        return chain[1]
    if len(chain) == 1:
        return chain[0]
    return "<expr>"
