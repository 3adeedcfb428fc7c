"""Abstract syntax and parser for the past-time MTL property language.

Grammar (loosest binding first)::

    prop    := 'forall' '[' name (',' name)* ']' '.' prop | implies
    implies := or ('->' implies)?
    or      := and ('or' and)*
    and     := unary ('and' unary)*
    unary   := 'not' unary | 'once' bounds? unary | primary
    bounds  := '[' int? ':' int? ']'
    primary := atom | '(' prop ')'
    atom    := '{' (key ':' value (',' key ':' value)*)? '}'
    value   := string | number | True | False | '*' name

``forall`` may only appear as a prefix of the whole property (possibly
parenthesised); nested quantifiers are flattened into one variable tuple.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Union

from ..events import Scalar


@dataclass(frozen=True)
class Var:
    name: str


Value = Union[Scalar, Var]


@dataclass(frozen=True)
class Atom:
    constraints: tuple[tuple[str, Value], ...]

    @property
    def variables(self) -> frozenset[str]:
        return frozenset(v.name for _, v in self.constraints if isinstance(v, Var))


@dataclass(frozen=True)
class Not:
    child: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Implies:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Once:
    child: "Formula"
    lower: int = 0
    upper: int | None = None


@dataclass(frozen=True)
class Forall:
    variables: tuple[str, ...]
    child: "Formula"


Formula = Union[Atom, Not, And, Or, Implies, Once, Forall]


class PropertySyntaxError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<arrow>->)
  | (?P<string>"[^"]*"|'[^']*'|``[^']*'')
  | (?P<number>-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[{}()\[\]:,.*])
    """,
    re.VERBOSE,
)

_KEYWORDS = {"forall", "not", "and", "or", "once", "True", "False", "true", "false"}


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> Iterator[_Tok]:
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise PropertySyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tok_text = m.group()
            if kind == "name" and tok_text in _KEYWORDS:
                kind = "kw"
            elif kind in ("arrow", "punct"):
                kind = tok_text
            yield _Tok(kind, tok_text, pos)
        pos = m.end()
    yield _Tok("eof", "", len(text))


class _Parser:
    def __init__(self, text: str):
        self.toks = list(_tokenize(text))
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def at(self, kind: str, text: str | None = None) -> bool:
        t = self.tok
        return t.kind == kind and (text is None or t.text == text)

    def take(self, kind: str, text: str | None = None) -> _Tok:
        if not self.at(kind, text):
            want = text or kind
            got = self.tok.text or "end of input"
            raise PropertySyntaxError(f"expected {want!r}, found {got!r}", self.tok.pos)
        tok = self.tok
        self.i += 1
        return tok

    def parse(self) -> Formula:
        node = self.prop()
        if not self.at("eof"):
            raise PropertySyntaxError(f"unexpected {self.tok.text!r}", self.tok.pos)
        return node

    def prop(self) -> Formula:
        if self.at("kw", "forall"):
            self.i += 1
            self.take("[")
            names = [self.take("name").text]
            while self.at(","):
                self.i += 1
                names.append(self.take("name").text)
            self.take("]")
            self.take(".")
            return Forall(tuple(names), self.prop())
        return self.implies()

    def implies(self) -> Formula:
        left = self.disj()
        if self.at("->"):
            self.i += 1
            return Implies(left, self.implies())
        return left

    def disj(self) -> Formula:
        node = self.conj()
        while self.at("kw", "or"):
            self.i += 1
            node = Or(node, self.conj())
        return node

    def conj(self) -> Formula:
        node = self.unary()
        while self.at("kw", "and"):
            self.i += 1
            node = And(node, self.unary())
        return node

    def unary(self) -> Formula:
        if self.at("kw", "not"):
            self.i += 1
            return Not(self.unary())
        if self.at("kw", "once"):
            self.i += 1
            lower, upper = 0, None
            if self.at("["):
                lower, upper = self.bounds()
            return Once(self.unary(), lower, upper)
        return self.primary()

    def bounds(self) -> tuple[int, int | None]:
        start = self.take("[").pos
        lower, upper = 0, None
        if self.at("number"):
            lower = self.step_count()
        self.take(":")
        if self.at("number"):
            upper = self.step_count()
        self.take("]")
        if upper is not None and lower > upper:
            raise PropertySyntaxError(f"malformed bound: lower {lower} exceeds upper {upper}", start)
        return lower, upper

    def step_count(self) -> int:
        tok = self.take("number")
        if not re.fullmatch(r"\d+", tok.text):
            raise PropertySyntaxError(f"malformed bound {tok.text!r}", tok.pos)
        return int(tok.text)

    def primary(self) -> Formula:
        if self.at("("):
            self.i += 1
            node = self.prop()
            self.take(")")
            return node
        if self.at("{"):
            return self.atom()
        got = self.tok.text or "end of input"
        raise PropertySyntaxError(f"expected a formula, found {got!r}", self.tok.pos)

    def atom(self) -> Atom:
        self.take("{")
        constraints: list[tuple[str, Value]] = []
        seen: set[str] = set()
        while not self.at("}"):
            if constraints:
                self.take(",")
            key_tok = self.tok
            if key_tok.kind in ("name", "kw"):
                key = key_tok.text
            elif key_tok.kind == "string":
                key = _unquote(key_tok.text)
            else:
                raise PropertySyntaxError(f"expected a key, found {key_tok.text!r}", key_tok.pos)
            self.i += 1
            if key in seen:
                raise PropertySyntaxError(f"duplicate key {key!r}", key_tok.pos)
            seen.add(key)
            self.take(":")
            constraints.append((key, self.value()))
        self.take("}")
        return Atom(tuple(constraints))

    def value(self) -> Value:
        tok = self.tok
        self.i += 1
        if tok.kind == "*":
            return Var(self.take("name").text)
        if tok.kind == "string":
            return _unquote(tok.text)
        if tok.kind == "number":
            return float(tok.text) if re.search(r"[.eE]", tok.text) else int(tok.text)
        if tok.kind == "kw" and tok.text in ("True", "true"):
            return True
        if tok.kind == "kw" and tok.text in ("False", "false"):
            return False
        raise PropertySyntaxError(f"expected a value, found {tok.text or 'end of input'!r}", tok.pos)


def _unquote(text: str) -> str:
    if text.startswith("``"):
        return text[2:-2]
    return text[1:-1]


@dataclass(frozen=True)
class Property:
    """A parsed property: quantified variables plus a quantifier-free body."""

    variables: tuple[str, ...]
    body: Formula

    @property
    def ast(self) -> Formula:
        return Forall(self.variables, self.body) if self.variables else self.body

    @cached_property
    def unique_atoms(self) -> tuple["Atom", ...]:
        return tuple(dict.fromkeys(atoms(self.body)))


def parse_property(text: str) -> Property:
    ast = _Parser(text).parse()
    variables: list[str] = []
    while isinstance(ast, Forall):
        for name in ast.variables:
            if name in variables:
                raise PropertySyntaxError(f"variable {name!r} bound twice", 0)
            variables.append(name)
        ast = ast.child
    _check_body(ast, frozenset(variables), text)
    return Property(tuple(variables), ast)


def _check_body(node: Formula, bound: frozenset[str], text: str) -> None:
    if isinstance(node, Forall):
        raise PropertySyntaxError("forall is only allowed as a prefix of the property", 0)
    if isinstance(node, Atom):
        free = node.variables - bound
        if free:
            name = sorted(free)[0]
            pos = text.find("*" + name)
            raise PropertySyntaxError(f"unbound variable {name!r}", max(pos, 0))
        return
    for child in children(node):
        _check_body(child, bound, text)


def children(node: Formula) -> tuple[Formula, ...]:
    if isinstance(node, (Not, Once, Forall)):
        return (node.child,)
    if isinstance(node, (And, Or, Implies)):
        return (node.left, node.right)
    return ()


def atoms(node: Formula) -> list[Atom]:
    if isinstance(node, Atom):
        return [node]
    out: list[Atom] = []
    for child in children(node):
        out.extend(atoms(child))
    return out


def render(node: Formula) -> str:
    """Fully parenthesised source text that parses back to ``node``."""
    if isinstance(node, Atom):
        parts = []
        for key, value in node.constraints:
            parts.append(f"{key}: {_render_value(value)}")
        return "{" + ", ".join(parts) + "}"
    if isinstance(node, Not):
        return f"not ({render(node.child)})"
    if isinstance(node, And):
        return f"({render(node.left)}) and ({render(node.right)})"
    if isinstance(node, Or):
        return f"({render(node.left)}) or ({render(node.right)})"
    if isinstance(node, Implies):
        return f"({render(node.left)}) -> ({render(node.right)})"
    if isinstance(node, Once):
        if node.lower == 0 and node.upper is None:
            return f"once({render(node.child)})"
        upper = "" if node.upper is None else str(node.upper)
        return f"once[{node.lower}:{upper}]({render(node.child)})"
    if isinstance(node, Forall):
        return f"forall[{', '.join(node.variables)}]. ({render(node.child)})"
    raise TypeError(node)


def _render_value(value: Value) -> str:
    if isinstance(value, Var):
        return "*" + value.name
    if isinstance(value, bool):
        return "True" if value else "False"
    if isinstance(value, str):
        return '"' + value + '"'
    return repr(value)
