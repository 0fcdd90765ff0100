"""Readers and writers for the text formats: theories, message sets, bi-traces,
relations and processes.  Parse errors carry 1-based line and column."""
from __future__ import annotations

import re
from pathlib import Path

from .bitrace import BiTrace, BiTraceError, IOPair
from .process import print_process
from .syntax import SpiSyntaxError, parse_message, parse_pair, parse_process, strip_comment
from .theory import theory


def _lines(text: str):
    for no, raw in enumerate(text.splitlines(), 1):
        body = strip_comment(raw)
        if body.strip():
            yield no, body


def _col(line: str) -> int:
    return len(line) - len(line.lstrip()) + 1


def read_theory(text: str):
    pairs = []
    for no, line in _lines(text):
        pairs.append(parse_pair(line.strip(), no, _col(line)))
    return theory(pairs)


def read_messages(text: str):
    return frozenset(parse_message(line.strip(), no, _col(line)) for no, line in _lines(text))


_ENTRY = re.compile(r"\s*([io])\s*:(.*)$")


def _entry(no: int, line: str) -> IOPair:
    m = _ENTRY.match(line)
    if m is None:
        raise SpiSyntaxError("expected 'i: M <-> N' or 'o: M <-> N'", no, _col(line))
    left, right = parse_pair(m.group(2), no, m.start(2) + 1)
    return IOPair(left, right, m.group(1))


def _bitrace(entries, lines) -> BiTrace:
    try:
        return BiTrace(entries)
    except BiTraceError as e:
        no = lines[e.position] if e.position is not None and e.position < len(lines) else 1
        raise SpiSyntaxError(str(e), no, 1) from None


def read_bitrace(text: str) -> BiTrace:
    entries, where = [], []
    for no, line in _lines(text):
        entries.append(_entry(no, line))
        where.append(no)
    return _bitrace(entries, where)


def read_process(text: str):
    return parse_process(text)


_FIELD = re.compile(r"\s*(pair|bitrace|left|right)\s*:?(.*)$")


def read_relation(text: str):
    """Parse ``pair`` blocks into a TracedRelation."""
    from .bisim import TracedRelation, TracedTriple

    blocks = []
    cur = None
    field = None
    for no, line in _lines(text):
        m = _FIELD.match(line)
        if m and not _ENTRY.match(line):
            key, rest = m.group(1), m.group(2)
            if key == "pair":
                if rest.strip():
                    raise SpiSyntaxError("unexpected text after 'pair'", no, m.start(2) + 1)
                cur = {"line": no, "bitrace": [], "left": None, "right": None}
                blocks.append(cur)
                field = None
                continue
            if cur is None:
                raise SpiSyntaxError("field outside a 'pair' block", no, _col(line))
            if key == "bitrace":
                if rest.strip():
                    raise SpiSyntaxError("bi-trace entries go on the following lines", no, m.start(2) + 1)
                field = "bitrace"
                continue
            if cur[key] is not None:
                raise SpiSyntaxError(f"duplicate '{key}' field", no, _col(line))
            cur[key] = [(no, m.start(2) + 1, rest)]
            field = key
            continue
        if cur is None or field is None:
            raise SpiSyntaxError("expected 'pair'", no, _col(line))
        if field == "bitrace":
            cur["bitrace"].append((no, _entry(no, line)))
        else:
            cur[field].append((no, 1, line))
    triples = []
    for b in blocks:
        for key in ("left", "right"):
            if b[key] is None:
                raise SpiSyntaxError(f"pair block is missing '{key}'", b["line"], 1)
        trace = _bitrace([e for _, e in b["bitrace"]], [n for n, _ in b["bitrace"]])
        procs = []
        for key in ("left", "right"):
            (no, col, first), *rest = b[key]
            src = "\n".join([first] + [t for _, _, t in rest])
            procs.append(parse_process(src, no, col))
        triples.append(TracedTriple(trace, procs[0], procs[1]))
    return TracedRelation(triples)


def load(path, reader):
    """Read ``path`` and parse it; OSError propagates unchanged."""
    return reader(Path(path).read_text())


# -- writers

def _pair_sort(pairs):
    return sorted(pairs, key=lambda p: (p[0].key, p[1].key))


def write_theory(gamma) -> str:
    return "".join(f"{m} <-> {n}\n" for m, n in _pair_sort(gamma))


def write_bitrace(h, indent: str = "") -> str:
    return "".join(f"{indent}{e.mark}: {e.left} <-> {e.right}\n" for e in h)


def write_relation(r) -> str:
    out = []
    for t in r:
        out.append("pair\n  bitrace:\n")
        out.append(write_bitrace(t.trace, "    "))
        out.append(f"  left: {print_process(t.left)}\n  right: {print_process(t.right)}\n")
    return "".join(out)
