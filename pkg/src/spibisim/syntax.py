"""Lexer and recursive-descent parsers for messages, processes and derivations.

Comments start with ``#`` when the next character cannot begin an
identifier (so ``# note`` is a comment while ``#a`` is a rigid name) and run
to the end of the line.
"""
from __future__ import annotations

import re

from .process import Case, Input, Let, Match, Nil, Output, Par, Restrict, Bang
from .terms import Enc, Name, Pair, Rigid

KEYWORDS = frozenset({"out", "in", "nu", "let", "case", "of", "pr", "enc"})

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#(?![A-Za-z])[^\n]*)
  | (?P<rigid>\#[A-Za-z][A-Za-z0-9_]*)
  | (?P<ident>[A-Za-z][A-Za-z0-9_]*)
  | (?P<num>[0-9]+)
  | (?P<sym><->|\|-|[(),.|!\[\]={};:<>])
""", re.VERBOSE)


class SpiSyntaxError(ValueError):
    """A syntax error with a 1-based line and column."""

    def __init__(self, msg, line=1, col=1):
        super().__init__(f"line {line}, column {col}: {msg}")
        self.msg = msg
        self.line = line
        self.col = col


class Token:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind, self.text, self.line, self.col = kind, text, line, col

    def __repr__(self):
        return f"Token({self.kind}, {self.text!r}, {self.line}:{self.col})"


def tokenize(text: str, line: int = 1, col: int = 1) -> list:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise SpiSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        s = m.group()
        if kind not in ("ws", "comment"):
            out.append(Token(kind, s, line, col))
        nl = s.count("\n")
        if nl:
            line += nl
            col = len(s) - s.rfind("\n")
        else:
            col += len(s)
        pos = m.end()
    out.append(Token("eof", "", line, col))
    return out


class Parser:
    def __init__(self, text: str, line: int = 1, col: int = 1):
        self.toks = tokenize(text, line, col)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k=1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg, tok=None):
        tok = tok or self.tok
        return SpiSyntaxError(msg, tok.line, tok.col)

    def at(self, text) -> bool:
        t = self.tok
        return t.kind in ("sym", "ident", "num") and t.text == text

    def expect(self, text) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        t = self.tok
        self.i += 1
        return t

    def accept(self, text) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def end(self):
        if self.tok.kind != "eof":
            raise self.error(f"unexpected {self.tok.text!r}")

    # -- messages

    def name(self) -> str:
        t = self.tok
        if t.kind == "rigid":
            raise self.error("binders must be names, not rigid names")
        if t.kind != "ident" or t.text in KEYWORDS:
            raise self.error(f"expected a name, found {t.text or 'end of input'!r}")
        self.i += 1
        return t.text

    def message(self):
        t = self.tok
        if t.kind == "rigid":
            self.i += 1
            return Rigid(t.text[1:])
        if t.kind == "ident" and t.text in ("pr", "enc") and self.peek().text == "(":
            self.i += 2
            left = self.message()
            self.expect(",")
            right = self.message()
            self.expect(")")
            return (Pair if t.text == "pr" else Enc)(left, right)
        if t.kind == "ident":
            return Name(self.name())
        raise self.error(f"expected a message, found {t.text or 'end of input'!r}")

    # -- processes

    def process(self):
        p = self.prefixed()
        while self.accept("|"):
            p = Par(p, self.prefixed())
        return p

    def prefixed(self):
        t = self.tok
        if t.kind == "num":
            if t.text != "0":
                raise self.error("the only numeral allowed is 0")
            self.i += 1
            return Nil()
        if self.accept("("):
            p = self.process()
            self.expect(")")
            return p
        if self.accept("!"):
            return Bang(self.prefixed())
        if self.accept("["):
            m1 = self.message()
            self.expect("=")
            m2 = self.message()
            self.expect("]")
            return Match(m1, m2, self.prefixed())
        if t.kind == "ident" and t.text == "out":
            self.i += 1
            self.expect("(")
            chan = self.message()
            self.expect(",")
            msg = self.message()
            self.expect(")")
            self.expect(".")
            return Output(chan, msg, self.prefixed())
        if t.kind == "ident" and t.text == "in":
            self.i += 1
            self.expect("(")
            chan = self.message()
            self.expect(",")
            x = self.name()
            self.expect(")")
            self.expect(".")
            return Input(chan, x, self.prefixed())
        if t.kind == "ident" and t.text == "nu":
            self.i += 1
            x = self.name()
            self.expect(".")
            return Restrict(x, self.prefixed())
        if t.kind == "ident" and t.text == "let":
            self.i += 1
            self.expect("(")
            x = self.name()
            self.expect(",")
            y = self.name()
            self.expect(")")
            self.expect("=")
            src = self.message()
            self.expect("in")
            return Let(x, y, src, self.prefixed())
        if t.kind == "ident" and t.text == "case":
            self.i += 1
            src = self.message()
            self.expect("of")
            self.expect("{")
            x = self.name()
            self.expect("}")
            key = self.message()
            self.expect("in")
            return Case(src, x, key, self.prefixed())
        raise self.error(f"expected a process, found {t.text or 'end of input'!r}")

    # -- derivations

    def derivation(self):
        from .theory import Derivation

        rule = self.tok.text
        if self.tok.kind != "ident":
            raise self.error("expected a rule name")
        self.i += 1
        self.expect("(")
        ctx, goal = self.sequent()
        premises = []
        if self.accept(";"):
            premises.append(self.derivation())
            while self.accept(","):
                premises.append(self.derivation())
        self.expect(")")
        return Derivation(rule, ctx, goal, tuple(premises))

    def sequent(self):
        self.expect("{")
        items = []
        if not self.at("}"):
            items.append(self.item())
            while self.accept(","):
                items.append(self.item())
        self.expect("}")
        self.expect("|-")
        goal = self.item()
        kinds = {isinstance(x, tuple) for x in items} | {isinstance(goal, tuple)}
        if len(kinds) > 1:
            raise self.error("mixed pair and message sequent")
        if isinstance(goal, tuple):
            return frozenset(items), goal
        return frozenset(items), (goal,)

    def item(self):
        m = self.message()
        if self.accept("<->"):
            return (m, self.message())
        return m


def parse_message(text: str, line: int = 1, col: int = 1):
    p = Parser(text, line, col)
    m = p.message()
    p.end()
    return m


def parse_process(text: str, line: int = 1, col: int = 1):
    p = Parser(text, line, col)
    proc = p.process()
    p.end()
    return proc


def parse_derivation(text: str):
    p = Parser(text)
    d = p.derivation()
    p.end()
    return d


def parse_pair(text: str, line: int = 1, col: int = 1):
    """``M <-> N``."""
    p = Parser(text, line, col)
    m = p.message()
    p.expect("<->")
    n = p.message()
    p.end()
    return m, n


def strip_comment(line: str) -> str:
    """Drop a trailing comment from a single line."""
    m = re.search(r"#(?![A-Za-z])", line)
    return line if m is None else line[:m.start()]
