"""Streaming N-Triples parser and serializer.

Handles the line-oriented N-Triples subset used by the DBpedia dump files:
one statement per line terminated by ".", whole-line comments starting with
"#", IRIs in angle brackets, blank node labels, and literals with optional
language tag or datatype IRI. String and IRI escapes (\\t \\b \\n \\r \\f
\\" \\' \\\\ and \\uXXXX / \\UXXXXXXXX) are decoded on parse and re-encoded
on serialization.

Blank node labels are restricted to [A-Za-z0-9_] first characters followed
by [A-Za-z0-9_.-]*, with no trailing dot.
"""

from __future__ import annotations

import gzip
import logging
from dataclasses import dataclass
from typing import Iterable, Iterator, Union

logger = logging.getLogger(__name__)

_IRI_FORBIDDEN = set('<>"{}|^`\\')
_ECHAR_DECODE = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f",
                 '"': '"', "'": "'", "\\": "\\"}
_ECHAR_ENCODE = {"\t": "\\t", "\b": "\\b", "\n": "\\n", "\r": "\\r",
                 "\f": "\\f", '"': '\\"', "\\": "\\\\"}
_BNODE_FIRST = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_")
_BNODE_REST = _BNODE_FIRST | set(".-")


class ParseError(ValueError):
    """Raised in strict mode for a malformed statement line."""

    def __init__(self, message: str, line_no: int):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no
        self.reason = message


@dataclass(frozen=True)
class Diagnostic:
    line_no: int
    reason: str
    line: str


@dataclass(frozen=True)
class Literal:
    lexical: str
    lang: str | None = None
    datatype: str | None = None


Term = Union[str, Literal]


def is_blank(term: Term) -> bool:
    return isinstance(term, str) and term.startswith("_:")


def is_iri(term: Term) -> bool:
    return isinstance(term, str) and not term.startswith("_:")


@dataclass(frozen=True)
class Triple:
    subject: str
    predicate: str
    obj: Term

    def to_ntriples(self) -> str:
        """Serialize back to one N-Triples statement line."""
        return f"{_term_nt(self.subject)} {_term_nt(self.predicate)} {_term_nt(self.obj)} ."


def _escape_string(s: str) -> str:
    out = []
    for ch in s:
        if ch in _ECHAR_ENCODE:
            out.append(_ECHAR_ENCODE[ch])
        elif ord(ch) < 0x20:
            out.append("\\u%04X" % ord(ch))
        else:
            out.append(ch)
    return "".join(out)


def _escape_iri(s: str) -> str:
    out = []
    for ch in s:
        if ch in _IRI_FORBIDDEN or ord(ch) <= 0x20:
            cp = ord(ch)
            out.append("\\u%04X" % cp if cp <= 0xFFFF else "\\U%08X" % cp)
        else:
            out.append(ch)
    return "".join(out)


def _term_nt(term: Term) -> str:
    if isinstance(term, Literal):
        body = f'"{_escape_string(term.lexical)}"'
        if term.lang is not None:
            return f"{body}@{term.lang}"
        if term.datatype is not None:
            return f"{body}^^<{_escape_iri(term.datatype)}>"
        return body
    if term.startswith("_:"):
        return term
    return f"<{_escape_iri(term)}>"


class _Scanner:
    """Character scanner over one statement line."""

    def __init__(self, line: str):
        self.line = line
        self.pos = 0

    def eof(self) -> bool:
        return self.pos >= len(self.line)

    def peek(self) -> str:
        return self.line[self.pos] if self.pos < len(self.line) else ""

    def skip_ws(self) -> None:
        while self.pos < len(self.line) and self.line[self.pos] in " \t":
            self.pos += 1

    def fail(self, msg: str) -> None:
        raise ValueError(f"{msg} at column {self.pos + 1}")

    def _uchar(self) -> str:
        # positioned after the backslash
        kind = self.line[self.pos] if self.pos < len(self.line) else ""
        if kind == "u":
            digits, width = 4, 4
        elif kind == "U":
            digits, width = 8, 8
        else:
            self.fail("invalid escape sequence")
        hexs = self.line[self.pos + 1:self.pos + 1 + digits]
        if len(hexs) < width or any(c not in "0123456789abcdefABCDEF" for c in hexs):
            self.fail("invalid \\%s escape" % kind)
        cp = int(hexs, 16)
        if cp > 0x10FFFF or 0xD800 <= cp <= 0xDFFF:
            self.fail("escape outside Unicode range")
        self.pos += 1 + digits
        return chr(cp)

    def iriref(self) -> str:
        if self.peek() != "<":
            self.fail("expected '<'")
        self.pos += 1
        out = []
        while True:
            if self.eof():
                self.fail("unterminated IRI")
            ch = self.line[self.pos]
            if ch == ">":
                self.pos += 1
                break
            if ch == "\\":
                self.pos += 1
                out.append(self._uchar())
                continue
            if ch in _IRI_FORBIDDEN or ord(ch) <= 0x20:
                self.fail("illegal character in IRI")
            out.append(ch)
            self.pos += 1
        iri = "".join(out)
        if not iri:
            self.fail("empty IRI")
        return iri

    def bnode(self) -> str:
        if not self.line.startswith("_:", self.pos):
            self.fail("expected blank node")
        self.pos += 2
        start = self.pos
        if self.eof() or self.line[self.pos] not in _BNODE_FIRST:
            self.fail("invalid blank node label")
        self.pos += 1
        while not self.eof() and self.line[self.pos] in _BNODE_REST:
            self.pos += 1
        label = self.line[start:self.pos]
        if label.endswith("."):
            # the final dot belongs to the statement terminator
            self.pos -= 1
            label = label[:-1]
        return "_:" + label

    def literal(self) -> Literal:
        if self.peek() != '"':
            self.fail("expected '\"'")
        self.pos += 1
        out = []
        while True:
            if self.eof():
                self.fail("unterminated string literal")
            ch = self.line[self.pos]
            if ch == '"':
                self.pos += 1
                break
            if ch == "\\":
                self.pos += 1
                nxt = self.peek()
                if nxt in _ECHAR_DECODE:
                    out.append(_ECHAR_DECODE[nxt])
                    self.pos += 1
                else:
                    out.append(self._uchar())
                continue
            if ch in "\n\r":
                self.fail("raw newline in literal")
            out.append(ch)
            self.pos += 1
        lexical = "".join(out)
        if self.peek() == "@":
            self.pos += 1
            start = self.pos
            while not self.eof() and (self.line[self.pos].isascii()
                                      and (self.line[self.pos].isalnum() or self.line[self.pos] == "-")):
                self.pos += 1
            tag = self.line[start:self.pos]
            if not _valid_langtag(tag):
                self.fail("invalid language tag")
            return Literal(lexical, lang=tag)
        if self.line.startswith("^^", self.pos):
            self.pos += 2
            return Literal(lexical, datatype=self.iriref())
        return Literal(lexical)

    def subject_term(self) -> str:
        return self.bnode() if self.peek() == "_" else self.iriref()

    def object_term(self) -> Term:
        ch = self.peek()
        if ch == '"':
            return self.literal()
        if ch == "_":
            return self.bnode()
        return self.iriref()


def _valid_langtag(tag: str) -> bool:
    if not tag:
        return False
    parts = tag.split("-")
    if not parts[0].isalpha():
        return False
    return all(p.isalnum() and p != "" for p in parts[1:])


def parse_statement(line: str) -> Triple:
    """Parse a single statement line (no comment/blank handling).

    Raises ValueError on malformed input.
    """
    sc = _Scanner(line)
    sc.skip_ws()
    subject = sc.subject_term()
    sc.skip_ws()
    predicate = sc.iriref()
    sc.skip_ws()
    obj = sc.object_term()
    sc.skip_ws()
    if sc.peek() != ".":
        sc.fail("expected '.' terminator")
    sc.pos += 1
    sc.skip_ws()
    if not sc.eof():
        sc.fail("trailing content after '.'")
    return Triple(subject, predicate, obj)


def parse_ntriples(
    source: Iterable[Union[str, bytes]],
    strict: bool = False,
    diagnostics: list[Diagnostic] | None = None,
) -> Iterator[Triple]:
    """Yield one Triple per valid statement line, in order.

    `source` is any iterable of lines (str or UTF-8 bytes), e.g. an open
    file. Malformed lines are skipped with a logged diagnostic (appended to
    `diagnostics` when given); in strict mode they raise ParseError instead.
    Empty lines and whole-line comments starting with "#" are skipped
    silently.
    """
    for line_no, raw in enumerate(source, start=1):
        if isinstance(raw, bytes):
            try:
                raw = raw.decode("utf-8")
            except UnicodeDecodeError:
                _report(line_no, "invalid UTF-8", "<binary>", strict, diagnostics)
                continue
        line = raw.rstrip("\r\n")
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            yield parse_statement(line)
        except ValueError as exc:
            _report(line_no, str(exc), line, strict, diagnostics)


def _report(line_no: int, reason: str, line: str, strict: bool,
            diagnostics: list[Diagnostic] | None) -> None:
    if strict:
        raise ParseError(reason, line_no)
    logger.warning("skipping malformed line %d: %s", line_no, reason)
    if diagnostics is not None:
        diagnostics.append(Diagnostic(line_no, reason, line))


def open_dump(path) -> Iterable[bytes]:
    """Open an N-Triples file for streaming, transparently handling .gz."""
    path = str(path)
    if path.endswith(".gz"):
        return gzip.open(path, "rb")
    return open(path, "rb")
