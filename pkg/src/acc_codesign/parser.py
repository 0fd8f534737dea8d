"""Tokenizer, recursive-descent parser and pretty-printer for ``.adl`` files.

The accepted language is a small subset of the AADL textual syntax::

    model      = { type_decl | impl_decl } ;
    type_decl  = category IDENT [ "features" { feature } ] "end" IDENT ";" ;
    impl_decl  = category "implementation" IDENT "." IDENT
                 [ "subcomponents" { sub } ] [ "connections" { conn } ]
                 [ "properties" { prop } ] "end" IDENT "." IDENT ";" ;
    feature    = IDENT ":" ("in"|"out"|"in" "out") ("data"|"event") "port" [ IDENT ] ";" ;
    sub        = IDENT ":" category IDENT [ "." IDENT ] ";" ;
    conn       = IDENT ":" "port" path "->" path ";" ;
    prop       = IDENT "=>" value [ "applies" "to" path ] ";" ;
    value      = duration | duration ".." duration | INTEGER | IDENT
               | "(" "reference" "(" path ")" ")" ;

Keywords are case-insensitive, identifiers keep their case, ``--`` starts a
comment running to end of line.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

from .model import (
    CATEGORIES,
    ArchModel,
    Category,
    ComponentImpl,
    ComponentType,
    Connection,
    Diagnostic,
    Duration,
    DurationRange,
    ModelError,
    Port,
    PropertyAssoc,
    Reference,
    Subcomponent,
)

KEYWORDS = CATEGORIES | {
    "features", "end", "implementation", "subcomponents", "connections",
    "properties", "in", "out", "event", "port", "applies", "to", "reference",
}
UNITS = {"us": 1, "ms": 1000, "s": 1_000_000}
# AADL constructs outside the subset; reported explicitly instead of as
# generic syntax errors.
UNSUPPORTED = {
    "package", "public", "private", "with", "annex", "property", "modes", "flows",
    "subprogram", "thread_group", "group", "extends", "prototypes", "requires",
    "provides", "access", "calls", "virtual", "abstract", "feature",
}
SYMBOLS = ("=>", "->", "..", ":", ";", ".", "(", ")")


@dataclass(frozen=True)
class Token:
    kind: str  # ident | keyword | integer | symbol | unit | eof
    text: str
    line: int
    column: int

    @property
    def value(self) -> str:
        return self.text.lower() if self.kind in ("keyword", "unit") else self.text

    @property
    def end_column(self) -> int:
        return self.column + max(len(self.text), 1)

    def __repr__(self) -> str:
        return f"{self.kind}({self.value})"


class ADLSyntaxError(ModelError):
    """Lexical or syntactic error with a 1-based (line, column) location."""

    def __init__(self, message: str, line: int, column: int, expected=()):
        self.line = line
        self.column = column
        self.expected = tuple(expected)
        super().__init__(Diagnostic("error", message, (line, column)))

    def __str__(self) -> str:
        return f"{self.line}:{self.column}: {self.diagnostics[0].message}"


def tokenize(source: str) -> list[Token]:
    """Split ``source`` into tokens, dropping whitespace and comments."""
    tokens: list[Token] = []
    i = 0
    n = len(source)
    line, col = 1, 1
    while i < n:
        ch = source[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r\f\v":
            i += 1
            col += 1
            continue
        if source.startswith("--", i):
            while i < n and source[i] != "\n":
                i += 1
            continue
        start = i
        if ch.isascii() and (ch.isalpha() or ch == "_"):
            while i < n and source[i].isascii() and (source[i].isalnum() or source[i] == "_"):
                i += 1
            text = source[start:i]
            low = text.lower()
            if low in UNITS and tokens and tokens[-1].kind == "integer":
                kind = "unit"
            elif low in KEYWORDS:
                kind = "keyword"
            else:
                kind = "ident"
            tokens.append(Token(kind, text, line, col))
        elif ch.isascii() and ch.isdigit():
            while i < n and source[i].isascii() and source[i].isdigit():
                i += 1
            tokens.append(Token("integer", source[start:i], line, col))
        else:
            for sym in SYMBOLS:
                if source.startswith(sym, i):
                    i += len(sym)
                    tokens.append(Token("symbol", sym, line, col))
                    break
            else:
                raise ADLSyntaxError(f"illegal character {ch!r} at {line}:{col}", line, col)
        col += i - start
    tokens.append(Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token]):
        if not tokens or tokens[-1].kind != "eof":
            last = tokens[-1] if tokens else None
            tokens = list(tokens) + [Token("eof", "", last.line if last else 1,
                                           last.end_column if last else 1)]
        self.tokens = tokens
        self.pos = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def error(self, expected: Iterable[str], tok: Optional[Token] = None):
        tok = tok or self.tok
        expected = sorted(set(expected))
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        if tok.kind == "ident" and tok.text.lower() in UNSUPPORTED:
            msg = f"unsupported construct '{tok.text}'"
        else:
            msg = f"expected {' or '.join(expected)} but found {found}"
        raise ADLSyntaxError(f"{msg} at {tok.line}:{tok.column}", tok.line, tok.column, expected)

    def at_kw(self, *words: str) -> bool:
        return self.tok.kind == "keyword" and self.tok.value in words

    def at_sym(self, sym: str) -> bool:
        return self.tok.kind == "symbol" and self.tok.text == sym

    def kw(self, *words: str) -> Token:
        if not self.at_kw(*words):
            self.error([f"'{w}'" for w in words])
        return self.advance()

    def sym(self, sym: str) -> Token:
        if not self.at_sym(sym):
            self.error([f"'{sym}'"])
        return self.advance()

    def ident(self) -> Token:
        if self.tok.kind != "ident":
            self.error(["identifier"])
        return self.advance()

    def category(self) -> Category:
        if not self.at_kw(*CATEGORIES):
            self.error(["category"])
        return Category(self.advance().value)

    def path(self) -> tuple[str, ...]:
        parts = [self.ident().text]
        while self.at_sym("."):
            self.advance()
            parts.append(self.ident().text)
        return tuple(parts)

    # -- grammar ---------------------------------------------------------

    def model(self) -> ArchModel:
        decls = []
        while self.tok.kind != "eof":
            decls.append(self.declaration())
        return ArchModel(tuple(decls))

    def declaration(self):
        start = self.tok
        cat = self.category()
        if self.at_kw("implementation"):
            self.advance()
            return self.impl_decl(cat, start)
        return self.type_decl(cat, start)

    def type_decl(self, cat: Category, start: Token) -> ComponentType:
        name = self.ident()
        features = []
        if self.at_kw("features"):
            self.advance()
            seen = set()
            while self.tok.kind == "ident":
                port = self.feature()
                if port.name in seen:
                    raise ADLSyntaxError(f"duplicate feature '{port.name}' at "
                                         f"{port.loc[0]}:{port.loc[1]}", *port.loc)
                seen.add(port.name)
                features.append(port)
        if self.tok.kind == "ident" and self.tok.text.lower() in UNSUPPORTED:
            self.error(["'end'"])
        self.kw("end")
        end_name = self.tok
        self.ident()
        if end_name.text != name.text:
            raise ADLSyntaxError(
                f"end name '{end_name.text}' does not match '{name.text}' at "
                f"{end_name.line}:{end_name.column}", end_name.line, end_name.column)
        self.sym(";")
        return ComponentType(cat, name.text, tuple(features), loc=(start.line, start.column))

    def feature(self) -> Port:
        name = self.ident()
        self.sym(":")
        if self.at_kw("in"):
            self.advance()
            if self.at_kw("out"):
                self.advance()
                direction = "in_out"
            else:
                direction = "in"
        elif self.at_kw("out"):
            self.advance()
            direction = "out"
        else:
            self.error(["'in'", "'out'"])
        kind = self.kw("data", "event").value
        self.kw("port")
        data_ref = None
        if self.tok.kind == "ident":
            data_ref = self.advance().text
        self.sym(";")
        return Port(name.text, direction, kind, data_ref, loc=(name.line, name.column))

    def impl_decl(self, cat: Category, start: Token) -> ComponentImpl:
        type_name = self.ident().text
        self.sym(".")
        impl_name = self.ident().text
        subs, conns, props = [], [], []
        if self.at_kw("subcomponents"):
            self.advance()
            while self.tok.kind == "ident":
                subs.append(self.subcomponent())
        if self.at_kw("connections"):
            self.advance()
            while self.tok.kind == "ident":
                conns.append(self.connection())
        if self.at_kw("properties"):
            self.advance()
            while self.tok.kind == "ident":
                props.append(self.prop())
        if self.tok.kind == "ident" and self.tok.text.lower() in UNSUPPORTED:
            self.error(["'end'"])
        if not self.at_kw("end"):
            expected = ["'end'"]
            if not props:
                expected.append("'properties'")
                if not conns:
                    expected.append("'connections'")
                    if not subs:
                        expected.append("'subcomponents'")
            self.error(expected)
        self.advance()
        end_tok = self.tok
        end_type = self.ident().text
        self.sym(".")
        end_impl = self.ident().text
        if (end_type, end_impl) != (type_name, impl_name):
            raise ADLSyntaxError(
                f"end name '{end_type}.{end_impl}' does not match "
                f"'{type_name}.{impl_name}' at {end_tok.line}:{end_tok.column}",
                end_tok.line, end_tok.column)
        self.sym(";")
        return ComponentImpl(cat, type_name, impl_name, tuple(subs), tuple(conns),
                             tuple(props), loc=(start.line, start.column))

    def subcomponent(self) -> Subcomponent:
        name = self.ident()
        self.sym(":")
        cat = self.category()
        classifier = self.ident().text
        if self.at_sym("."):
            self.advance()
            classifier += "." + self.ident().text
        self.sym(";")
        return Subcomponent(name.text, cat, classifier, loc=(name.line, name.column))

    def connection(self) -> Connection:
        name = self.ident()
        self.sym(":")
        self.kw("port")
        src = self.path()
        self.sym("->")
        dst = self.path()
        self.sym(";")
        return Connection(name.text, src, dst, loc=(name.line, name.column))

    def prop(self) -> PropertyAssoc:
        name = self.ident()
        self.sym("=>")
        value = self.value()
        applies = None
        if self.at_kw("applies"):
            self.advance()
            self.kw("to")
            applies = self.path()
        self.sym(";")
        return PropertyAssoc(name.text, value, applies, loc=(name.line, name.column))

    def duration_after(self, number: Token) -> Duration:
        if self.tok.kind != "unit":
            self.error(["unit"])
        return Duration(int(number.text) * UNITS[self.advance().value])

    def value(self):
        tok = self.tok
        if tok.kind == "integer":
            self.advance()
            if self.tok.kind != "unit":
                return int(tok.text)
            low = self.duration_after(tok)
            if self.at_sym(".."):
                self.advance()
                if self.tok.kind != "integer":
                    self.error(["integer"])
                high = self.duration_after(self.advance())
                if high.us < low.us:
                    raise ADLSyntaxError(f"empty range at {tok.line}:{tok.column}",
                                         tok.line, tok.column)
                return DurationRange(low, high)
            return low
        if tok.kind == "ident":
            return self.advance().text
        if self.at_sym("("):
            self.advance()
            self.kw("reference")
            self.sym("(")
            path = self.path()
            self.sym(")")
            self.sym(")")
            return Reference(path)
        self.error(["integer", "identifier", "'('"])


def parse(tokens) -> ArchModel:
    """Parse a token list (or raw source text) into an ArchModel."""
    if isinstance(tokens, str):
        tokens = tokenize(tokens)
    return _Parser(list(tokens)).model()


def parse_file(path) -> ArchModel:
    with open(path, encoding="utf-8") as fh:
        return parse(tokenize(fh.read()))


# -- pretty printer ----------------------------------------------------------

def format_duration(d: Duration) -> str:
    for unit in ("s", "ms"):
        scale = UNITS[unit]
        if d.us and d.us % scale == 0:
            return f"{d.us // scale} {unit}"
    return f"{d.us} us"


def format_value(value) -> str:
    if isinstance(value, DurationRange):
        return f"{format_duration(value.low)} .. {format_duration(value.high)}"
    if isinstance(value, Duration):
        return format_duration(value)
    if isinstance(value, Reference):
        return f"(reference ({'.'.join(value.path)}))"
    return str(value)


_DIRECTIONS = {"in": "in", "out": "out", "in_out": "in out"}


def _format_decl(decl) -> list[str]:
    ind = "  "
    if isinstance(decl, ComponentType):
        lines = [f"{decl.category.value} {decl.name}"]
        if decl.features:
            lines.append("features")
            for p in decl.features:
                ref = f" {p.data_ref}" if p.data_ref else ""
                lines.append(f"{ind}{p.name} : {_DIRECTIONS[p.direction]} {p.kind} port{ref};")
        lines.append(f"end {decl.name};")
        return lines
    lines = [f"{decl.category.value} implementation {decl.qualified_name}"]
    if decl.subcomponents:
        lines.append("subcomponents")
        lines += [f"{ind}{s.name} : {s.category.value} {s.classifier};" for s in decl.subcomponents]
    if decl.connections:
        lines.append("connections")
        lines += [f"{ind}{c.name} : port {'.'.join(c.source)} -> {'.'.join(c.dest)};"
                  for c in decl.connections]
    if decl.properties:
        lines.append("properties")
        for p in decl.properties:
            tail = f" applies to {'.'.join(p.applies_to)}" if p.applies_to else ""
            lines.append(f"{ind}{p.name} => {format_value(p.value)}{tail};")
    lines.append(f"end {decl.qualified_name};")
    return lines


def pretty_print(model: ArchModel) -> str:
    """Canonical text for ``model``; ``parse`` of the result equals ``model``."""
    blocks = ["\n".join(_format_decl(d)) for d in model.declarations]
    return "\n\n".join(blocks) + ("\n" if blocks else "")
