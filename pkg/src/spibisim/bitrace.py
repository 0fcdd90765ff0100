"""Bi-traces: validation, projections, respectful substitutions, consistency."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import NamedTuple, Optional

from .terms import (
    Message, Name, Rigid, Substitution, SubstitutionPair, apply_subst,
)
from .theory import (
    Consistency, derivable, equivalents, is_consistent, synthesis_closure,
    synthesizable, theory,
)

INPUT, OUTPUT = "i", "o"


class IOPair(NamedTuple):
    left: Message
    right: Message
    mark: str

    def __str__(self):
        return f"{self.mark}: {self.left} <-> {self.right}"

    @property
    def names(self) -> frozenset:
        return self.left._names | self.right._names

    @property
    def rigids(self) -> frozenset:
        return self.left._rigids | self.right._rigids


class BiTraceError(ValueError):
    def __init__(self, position, msg):
        super().__init__(f"entry {position}: {msg}")
        self.position = position


class BiTrace:
    """An immutable sequence of input/output marked message pairs."""

    __slots__ = ("entries", "_hash")

    def __init__(self, entries=(), check: bool = True):
        entries = tuple(e if isinstance(e, IOPair) else IOPair(*e) for e in entries)
        for k, e in enumerate(entries):
            if e.mark not in (INPUT, OUTPUT):
                raise BiTraceError(k, f"bad mark {e.mark!r}")
        self.entries = entries
        self._hash = hash(entries)
        if check:
            _check_scoping(entries)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, k):
        if isinstance(k, slice):
            return BiTrace(self.entries[k], check=False)
        return self.entries[k]

    def __eq__(self, other):
        return isinstance(other, BiTrace) and other.entries == self.entries

    def __hash__(self):
        return self._hash

    def __str__(self):
        return "\n".join(str(e) for e in self.entries)

    def __repr__(self):
        return "BiTrace(" + ". ".join(f"({e.left},{e.right})^{e.mark}" for e in self.entries) + ")"

    def extend(self, *entries) -> "BiTrace":
        return BiTrace(self.entries + tuple(IOPair(*e) for e in entries), check=False)

    def free_names(self):
        names, rigids = set(), set()
        for e in self.entries:
            names |= e.names
            rigids |= e.rigids
        return frozenset(names), frozenset(rigids)

    def theory(self) -> frozenset:
        return underlying_theory(self)

    def inverse(self) -> "BiTrace":
        return inverse_bitrace(self)

    def apply(self, sp) -> "BiTrace":
        return apply_pair(self, sp)

    def is_reflexive(self) -> bool:
        return all(e.left == e.right for e in self.entries)


def _check_scoping(entries):
    seen = set()
    for k, e in enumerate(entries):
        if e.mark == OUTPUT and not e.names <= seen:
            missing = ", ".join(sorted(e.names - seen))
            raise BiTraceError(k, f"output mentions names not introduced earlier: {missing}")
        seen |= e.names


def validate_bitrace(entries) -> BiTrace:
    """Build a bi-trace, raising :class:`BiTraceError` on a scoping violation."""
    return BiTrace(entries, check=True)


def underlying_theory(h: BiTrace) -> frozenset:
    return theory((e.left, e.right) for e in h)


def inverse_bitrace(h: BiTrace) -> BiTrace:
    return BiTrace((IOPair(e.right, e.left, e.mark) for e in h), check=False)


def project(h: BiTrace, side: int) -> list:
    if side not in (1, 2):
        raise ValueError("side must be 1 or 2")
    return [(e.left if side == 1 else e.right, e.mark) for e in h]


def apply_pair(h: BiTrace, sp) -> BiTrace:
    t1, t2 = sp
    return BiTrace((IOPair(apply_subst(e.left, t1), apply_subst(e.right, t2), e.mark)
                    for e in h), check=False)


def compose_bitraces(h1: BiTrace, h2: BiTrace) -> Optional[BiTrace]:
    if len(h1) != len(h2):
        return None
    out = []
    for a, b in zip(h1, h2):
        if a.mark != b.mark or a.right != b.left:
            return None
        out.append(IOPair(a.left, b.right, a.mark))
    return BiTrace(out, check=False)


# -- respectful substitutions -------------------------------------------------------

@dataclass(frozen=True)
class Respect:
    ok: bool
    position: Optional[int] = None
    name: Optional[str] = None

    def __bool__(self):
        return self.ok


def respects(sp, h: BiTrace) -> Respect:
    """Check that ``sp`` respects ``h``; report the first failing input."""
    t1, t2 = sp
    for k, e in enumerate(h):
        if e.mark != INPUT:
            continue
        gamma = underlying_theory(apply_pair(h[:k], sp))
        for x in sorted(e.names):
            if not derivable(gamma, t1.image(x), t2.image(x)):
                return Respect(False, k, x)
    return Respect(True)


def _recency_order(prefix: BiTrace, side_msgs):
    """Rank of each subterm by its last occurrence in the prefix, latest first."""
    rank = {}
    for k, m in enumerate(side_msgs):
        for s in m.subterms():
            rank[s] = k
    return rank


def _candidates(prefix: BiTrace, depth: int, pool_names) -> list:
    """Candidate value pairs for a name introduced after ``prefix``."""
    gamma = underlying_theory(prefix)
    left = [e.left for e in prefix]
    known = frozenset(left)
    rank = _recency_order(prefix, left)
    subs = [s for s in rank if synthesizable(known, s)]
    subs.sort(key=lambda s: (-rank[s], s.key))
    names = sorted({Name(x) for x in pool_names}, key=lambda m: m.key)
    base = []
    for m in names + subs:
        if m not in base:
            base.append(m)
    ordered = list(base)
    seen = set(base)
    for m in synthesis_closure(base, depth):
        if m not in seen:
            seen.add(m)
            ordered.append(m)
    out = []
    for m in ordered:
        for n in sorted(equivalents(gamma, m), key=lambda t: t.key):
            out.append((m, n))
    return out


@lru_cache(maxsize=1 << 12)
def _enumerate(h: BiTrace, depth: int, extra: frozenset) -> tuple:
    results = []
    entries = h.entries

    def rec(k, t1, t2, introduced):
        if k == len(entries):
            results.append(SubstitutionPair(Substitution(t1), Substitution(t2)))
            return
        e = entries[k]
        new = sorted(e.names - introduced)
        if e.mark != INPUT or not new:
            rec(k + 1, t1, t2, introduced | e.names)
            return
        sp = (Substitution(t1), Substitution(t2))
        prefix = apply_pair(h[:k], sp)
        pool = set(prefix.free_names()[0]) | set(extra) | set(new)
        cands = _candidates(prefix, depth, pool)
        for choice in product(cands, repeat=len(new)):
            n1, n2 = dict(t1), dict(t2)
            for x, (m, n) in zip(new, choice):
                n1[x] = m
                n2[x] = n
            rec(k + 1, n1, n2, introduced | e.names)

    rec(0, {}, {}, frozenset())
    # identical substitution pairs can arise from different choices
    out, seen = [], set()
    for sp in results:
        if sp not in seen:
            seen.add(sp)
            out.append(sp)
    return tuple(out)


def enumerate_respectful(h: BiTrace, depth: int = 1, extra_names=()):
    """Yield a bounded, deterministic family of ``h``-respectful pairs."""
    if depth < 0:
        raise ValueError("depth must be non-negative")
    extra = frozenset(x.ident if isinstance(x, Name) else x for x in extra_names)
    yield from _enumerate(h, depth, extra)


# -- consistency ----------------------------------------------------------------------

@dataclass(frozen=True)
class BiTraceVerdict:
    """``consistent`` means consistent up to the enumeration depth."""

    consistent: bool
    depth: int
    position: Optional[int] = None
    subst: Optional[SubstitutionPair] = None
    certificate: Optional[Consistency] = None
    reason: str = ""

    def __bool__(self):
        return self.consistent

    def describe(self) -> str:
        if self.consistent:
            return f"consistent up to depth {self.depth}"
        text = f"inconsistent at entry {self.position}: {self.reason}"
        if self.subst is not None:
            text += f"; witness {self.subst}"
        if self.certificate is not None:
            text += f"; {self.certificate.describe()}"
        return text


@lru_cache(maxsize=1 << 14)
def bitrace_consistent_bounded(h: BiTrace, depth: int = 1) -> BiTraceVerdict:
    """Inductive consistency check with clause (3) over a bounded enumeration.

    Prefixes already judged consistent are not re-checked under the
    substitution: respectful instances of consistent traces are consistent.
    """
    if len(h) == 0:
        return BiTraceVerdict(True, depth)
    prefix = h[:-1]
    earlier = bitrace_consistent_bounded(prefix, depth)
    if not earlier:
        return earlier
    e = h[len(h) - 1]
    k = len(h) - 1
    if e.mark == INPUT:
        if not derivable(underlying_theory(prefix), e.left, e.right):
            return BiTraceVerdict(False, depth, k, reason="input pair not derivable from the prefix")
        return BiTraceVerdict(True, depth)
    if prefix.is_reflexive() and e.left == e.right:
        return BiTraceVerdict(True, depth)
    for sp in enumerate_respectful(prefix, depth):
        inst = underlying_theory(apply_pair(h, sp))
        cert = is_consistent(inst)
        if not cert:
            return BiTraceVerdict(False, depth, k, sp, cert,
                                  "instantiated theory is inconsistent")
    return BiTraceVerdict(True, depth)


# -- orders on bi-traces -------------------------------------------------------------------

@dataclass(frozen=True)
class OrderJustification:
    kind: str
    steps: tuple
    theta: Substitution = Substitution()


def _names_before(h: BiTrace, k: int) -> frozenset:
    out = set()
    for e in h.entries[:k]:
        out |= e.names
    return frozenset(out)


def weakening_removals(h: BiTrace):
    """Traces ``g`` with ``g <_w h`` (one pair of ``h`` removed)."""
    for k, e in enumerate(h):
        if e.names <= _names_before(h, k):
            yield k, BiTrace(h.entries[:k] + h.entries[k + 1:], check=False)


def contraction_removals(h: BiTrace):
    """Traces ``g`` with ``h <_c g`` (a redundant pair of ``h`` removed)."""
    for k, e in enumerate(h):
        if derivable(underlying_theory(h[:k]), e.left, e.right):
            yield k, BiTrace(h.entries[:k] + h.entries[k + 1:], check=False)


def _search(start: BiTrace, goal: BiTrace, moves, budget: int):
    queue = deque([(start, ())])
    seen = {start}
    while queue:
        cur, path = queue.popleft()
        if cur == goal:
            return path
        if len(path) >= budget or len(cur) <= len(goal):
            continue
        for k, nxt in moves(cur):
            if nxt not in seen:
                seen.add(nxt)
                queue.append((nxt, path + (k,)))
    return None


def flexrigid_theta(h: BiTrace, hp: BiTrace) -> Optional[Substitution]:
    """``theta_{h,hp}`` when ``h`` is a flex-rigid instance of ``hp``."""
    if len(h) != len(hp):
        return None
    theta, flipped = {}, set()
    for k, (a, b) in enumerate(zip(h, hp)):
        if (a.mark, b.mark) == (OUTPUT, INPUT) and type(a.left) is Rigid \
                and a.left == a.right and type(b.left) is Name and b.left == b.right:
            x = b.left.ident
            if x in theta or a.left in theta.values() or x in _names_before(hp, k):
                return None
            theta[x] = a.left
            flipped.add(k)
    if {c.ident for c in theta.values()} & hp.free_names()[1]:
        return None
    s = Substitution(theta)
    for k, (a, b) in enumerate(zip(h, hp)):
        if k in flipped:
            continue
        if a != IOPair(apply_subst(b.left, s), apply_subst(b.right, s), b.mark):
            return None
    return s


def bitrace_order(h: BiTrace, hp: BiTrace, kind: str, budget: Optional[int] = None):
    """Decide ``h`` below ``hp`` in the reflexive-transitive closure of an order.

    ``kind`` is "weakening", "contraction" or "flexrigid".  Returns an
    :class:`OrderJustification` or ``None``.
    """
    if budget is None:
        budget = 2 * max(len(h), len(hp))
    if kind == "weakening":
        path = _search(hp, h, weakening_removals, budget)
        return None if path is None else OrderJustification(kind, path)
    if kind == "contraction":
        path = _search(h, hp, contraction_removals, budget)
        return None if path is None else OrderJustification(kind, path)
    if kind == "flexrigid":
        theta = flexrigid_theta(h, hp)
        if theta is None:
            return None
        return OrderJustification(kind, tuple(sorted(theta)), theta)
    raise ValueError(f"unknown order {kind!r}")
