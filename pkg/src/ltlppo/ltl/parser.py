"""Recursive-descent parser for the canonical formula grammar.

Precedence, loosest first::

    ->  <->        right associative, desugared at parse time
    |              left associative
    &              left associative
    U  R           right associative
    !  X  F  G     prefix
"""
from __future__ import annotations

import re
from typing import Iterable, List, Optional, Tuple

from .formula import (
    FALSE,
    MAX_ALPHABET,
    TRUE,
    Always,
    And,
    Atom,
    Eventually,
    Formula,
    Next,
    Not,
    Or,
    Release,
    Until,
)

NAME_RE = re.compile(r"[a-z][a-z0-9_]*\Z")

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<op><->|->|[!&|()])
  | (?P<temporal>[XFGUR])(?![A-Za-z0-9_])
  | (?P<name>[a-z][a-z0-9_]*)
    """,
    re.VERBOSE,
)


class LTLError(ValueError):
    pass


class LTLSyntaxError(LTLError):
    def __init__(self, message: str, offset: int, text: str = ""):
        super().__init__(f"{message} at byte {offset}")
        self.offset = offset
        self.text = text


class UnknownProposition(LTLError):
    def __init__(self, name: str, offset: int = -1):
        super().__init__(f"unknown proposition {name!r}")
        self.name = name
        self.offset = offset


def validate_alphabet(alphabet: Iterable[str]) -> Tuple[str, ...]:
    names = tuple(alphabet)
    if len(set(names)) != len(names):
        raise LTLError("duplicate proposition in alphabet")
    if len(names) > MAX_ALPHABET:
        raise LTLError(f"alphabet has {len(names)} propositions; at most {MAX_ALPHABET} supported")
    for n in names:
        if not NAME_RE.match(n) or n in ("true", "false"):
            raise LTLError(f"invalid proposition name {n!r}")
    return names


def _tokenize(text: str) -> List[Tuple[str, str, int]]:
    raw = text.encode("utf-8")
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            offset = len(text[:pos].encode("utf-8"))
            raise LTLSyntaxError(f"unexpected character {text[pos]!r}", offset, text)
        kind = m.lastgroup
        if kind != "ws":
            offset = len(text[:pos].encode("utf-8"))
            tokens.append((kind, m.group(), offset))
        pos = m.end()
    tokens.append(("eof", "", len(raw)))
    return tokens


class _Parser:
    def __init__(self, text: str, alphabet: Optional[frozenset]):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.alphabet = alphabet

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        tok = self.take()
        if tok[1] != value:
            found = tok[1] or "end of input"
            raise LTLSyntaxError(f"expected {value!r}, found {found!r}", tok[2], self.text)

    def parse(self) -> Formula:
        f = self.implication()
        tok = self.peek()
        if tok[0] != "eof":
            raise LTLSyntaxError(f"unexpected token {tok[1]!r}", tok[2], self.text)
        return f

    def implication(self) -> Formula:
        left = self.disjunction()
        tok = self.peek()
        if tok[1] == "->":
            self.take()
            right = self.implication()
            return Or(Not(left), right)
        if tok[1] == "<->":
            self.take()
            right = self.implication()
            return Or(And(left, right), And(Not(left), Not(right)))
        return left

    def disjunction(self) -> Formula:
        f = self.conjunction()
        while self.peek()[1] == "|":
            self.take()
            f = Or(f, self.conjunction())
        return f

    def conjunction(self) -> Formula:
        f = self.binary_temporal()
        while self.peek()[1] == "&":
            self.take()
            f = And(f, self.binary_temporal())
        return f

    def binary_temporal(self) -> Formula:
        left = self.unary()
        tok = self.peek()
        if tok[1] in ("U", "R"):
            self.take()
            right = self.binary_temporal()
            return Until(left, right) if tok[1] == "U" else Release(left, right)
        return left

    def unary(self) -> Formula:
        tok = self.peek()
        if tok[1] == "!":
            self.take()
            return Not(self.unary())
        if tok[1] in ("X", "F", "G"):
            self.take()
            child = self.unary()
            return {"X": Next, "F": Eventually, "G": Always}[tok[1]](child)
        return self.primary()

    def primary(self) -> Formula:
        kind, value, offset = self.take()
        if value == "(":
            f = self.implication()
            self.expect(")")
            return f
        if kind == "name":
            if value == "true":
                return TRUE
            if value == "false":
                return FALSE
            if self.alphabet is not None and value not in self.alphabet:
                raise UnknownProposition(value, offset)
            return Atom(value)
        found = value or "end of input"
        raise LTLSyntaxError(f"unexpected token {found!r}", offset, self.text)


def parse(text: str, alphabet: Optional[Iterable[str]] = None) -> Formula:
    """Parse ``text`` into a Formula.

    If ``alphabet`` is given, every atom must be one of its propositions.
    """
    names = None if alphabet is None else frozenset(validate_alphabet(alphabet))
    return _Parser(text, names).parse()
