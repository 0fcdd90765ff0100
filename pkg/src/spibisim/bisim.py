"""Checking candidate open bisimulations, up-to techniques, and a bounded refuter.

A relation is a finite list of traced process pairs ``(h, P, Q)``; the checker
works on its symmetric closure.  Continuations produced by the transition
clauses must be justified: either they are members (modulo α), or they are
reached from a member by a short chain of the enabled up-to rules.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

from .bitrace import (
    INPUT, OUTPUT, BiTrace, BiTraceError, IOPair, _check_scoping, apply_pair,
    bitrace_consistent_bounded, contraction_removals, enumerate_respectful,
    respects, underlying_theory, bitrace_order,
)
from .process import (
    Concr, In, Input, Nil, Output, OutBar, Par, Process, Restrict, Tau,
    alpha_key, canonical_key, has_bang, proc_names, step,
    subst_proc, struct_equiv, _prenex, _wrap, Bang, Match, Let, Case,
)
from .terms import (
    Message, Name, Rigid, Substitution, SubstitutionPair,
    apply_subst, fresh_ident, is_pure,
)
from .theory import derivable, is_consistent, synthesizable

RULE_NAMES = {
    "eq": "structural", "w": "weakening", "c": "contraction", "s": "substitution",
    "i": "injective-renaming", "f": "flex-rigid", "r": "restriction", "p": "parallel",
}
_LONG = {v: k for k, v in RULE_NAMES.items()}


def parse_rules(spec) -> frozenset:
    """Turn ``"c,s"`` (or long rule names) into a set of short rule tags."""
    if isinstance(spec, str):
        spec = [s for s in spec.replace(" ", "").split(",") if s]
    out = set()
    for s in spec:
        s = _LONG.get(s, s)
        if s not in RULE_NAMES:
            raise ValueError(f"unknown up-to rule {s!r}; expected one of {', '.join(RULE_NAMES)}")
        out.add(s)
    return frozenset(out)


# -- data --------------------------------------------------------------------------

@dataclass(frozen=True)
class TracedTriple:
    trace: BiTrace
    left: Process
    right: Process

    def inverse(self) -> "TracedTriple":
        return TracedTriple(self.trace.inverse(), self.right, self.left)

    def free_names(self):
        n0, r0 = self.trace.free_names()
        n1, r1 = proc_names(self.left)
        n2, r2 = proc_names(self.right)
        return n0 | n1 | n2, r0 | r1 | r2

    @property
    def key(self):
        return (self.trace, alpha_key(self.left), alpha_key(self.right))

    def __str__(self):
        tr = ". ".join(f"({e.left},{e.right})^{e.mark}" for e in self.trace) or "(empty)"
        return f"{tr} |- {self.left}  ~  {self.right}"


class TracedRelation:
    """An ordered, duplicate-free list of traced triples."""

    def __init__(self, triples: Sequence[TracedTriple] = ()):
        seen, out = set(), []
        for t in triples:
            if t.key not in seen:
                seen.add(t.key)
                out.append(t)
        self.triples = tuple(out)

    def __iter__(self):
        return iter(self.triples)

    def __len__(self):
        return len(self.triples)

    def symmetric(self) -> list:
        """File order, then the inverses, without duplicates."""
        seen, out = set(), []
        for t in list(self.triples) + [t.inverse() for t in self.triples]:
            if t.key not in seen:
                seen.add(t.key)
                out.append(t)
        return out

    def inverse(self) -> "TracedRelation":
        return TracedRelation([t.inverse() for t in self.triples])


@dataclass(frozen=True)
class CheckConfig:
    subst_depth: int = 1
    up_to_rules: frozenset = frozenset()
    closure_budget: int = 3
    parallel_contexts: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "up_to_rules", parse_rules(self.up_to_rules))
        object.__setattr__(self, "parallel_contexts", tuple(
            (r, tuple(dom)) for r, dom in self.parallel_contexts))
        if self.subst_depth < 0:
            raise ValueError("subst_depth must be non-negative")
        if self.closure_budget < 1:
            raise ValueError("closure_budget must be at least 1")
        for r, _ in self.parallel_contexts:
            if not is_pure(r):
                raise ValueError("parallel context templates must be pure")


@dataclass(frozen=True)
class VerifiedUpToBound:
    depth: int
    obligations_checked: int
    holds = True

    def describe(self) -> str:
        return (f"VerifiedUpToBound (subst-depth {self.depth}, "
                f"{self.obligations_checked} obligations)")


@dataclass(frozen=True)
class Counterexample:
    triple: TracedTriple
    subst: SubstitutionPair
    action: object
    reason: str
    holds = False

    def describe(self) -> str:
        return (f"Counterexample\n  triple: {self.triple}\n  substitution: {self.subst}\n"
                f"  action: {self.action}\n  reason: {self.reason}")


@dataclass(frozen=True)
class RelationIllFormed:
    position: int
    reason: str
    holds = False

    def describe(self) -> str:
        return f"RelationIllFormed at triple {self.position}: {self.reason}"


class FreshSupply:
    """Deterministic source of rigid names avoiding an exclusion set."""

    def __init__(self, exclude=()):
        self.exclude = {r.ident if isinstance(r, Rigid) else r for r in exclude}

    def __repr__(self):
        return f"FreshSupply({sorted(self.exclude)})"


def fresh_rigid(supply: FreshSupply, base: str) -> Rigid:
    ident = fresh_ident(base, supply.exclude)
    supply.exclude.add(ident)
    return Rigid(ident)


# -- equivalent substitutions ----------------------------------------------------------

def equiv_subst(s1: Substitution, s2: Substitution, h: BiTrace) -> bool:
    if set(s1) != set(s2):
        return False
    gamma = underlying_theory(h)
    names = h.free_names()[0]
    for x in s1:
        m, n = s1[x], s2[x]
        if not derivable(gamma, m, n):
            return False
        if not (m._names | n._names) <= names:
            return False
    return True


# -- matching ----------------------------------------------------------------------

class _Match:
    """One-sided matching of a pattern against a target (per side)."""

    def __init__(self, subst: bool, rename: bool):
        self.subst, self.rename = subst, rename
        self.theta = {}
        self.rho = {}

    def msg(self, pat: Message, tgt: Message, env: dict, tbound) -> bool:
        tp = type(pat)
        if tp is Name:
            b = env.get(pat.ident)
            if b is not None:
                return type(tgt) is Name and tgt.ident == b
            if tgt._names & tbound:
                return False
            if pat.ident in self.theta:
                return self.theta[pat.ident] == tgt
            if not self.subst and tgt != pat:
                return False
            self.theta[pat.ident] = tgt
            return True
        if tp is Rigid:
            if not self.rename:
                return tgt == pat
            if type(tgt) is not Rigid:
                return False
            if pat.ident in self.rho:
                return self.rho[pat.ident] == tgt.ident
            if tgt.ident in self.rho.values():
                return False
            self.rho[pat.ident] = tgt.ident
            return True
        if type(tgt) is not tp:
            return False
        return self.msg(pat.left, tgt.left, env, tbound) and self.msg(pat.right, tgt.right, env, tbound)

    def proc(self, pat: Process, tgt: Process, env=None, tbound=frozenset()) -> bool:
        env = env or {}
        if type(pat) is not type(tgt):
            return False
        if isinstance(pat, Nil):
            return True
        if isinstance(pat, Output):
            return (self.msg(pat.chan, tgt.chan, env, tbound) and self.msg(pat.msg, tgt.msg, env, tbound)
                    and self.proc(pat.cont, tgt.cont, env, tbound))
        if isinstance(pat, Par):
            return self.proc(pat.left, tgt.left, env, tbound) and self.proc(pat.right, tgt.right, env, tbound)
        if isinstance(pat, Bang):
            return self.proc(pat.body, tgt.body, env, tbound)
        if isinstance(pat, Match):
            return (self.msg(pat.m1, tgt.m1, env, tbound) and self.msg(pat.m2, tgt.m2, env, tbound)
                    and self.proc(pat.cont, tgt.cont, env, tbound))
        if isinstance(pat, Input):
            if not self.msg(pat.chan, tgt.chan, env, tbound):
                return False
            return self.proc(pat.cont, tgt.cont, {**env, pat.binder: tgt.binder}, tbound | {tgt.binder})
        if isinstance(pat, Restrict):
            return self.proc(pat.body, tgt.body, {**env, pat.binder: tgt.binder}, tbound | {tgt.binder})
        if isinstance(pat, Let):
            if not self.msg(pat.src, tgt.src, env, tbound) or (pat.b1 == pat.b2) != (tgt.b1 == tgt.b2):
                return False
            e = {**env, pat.b1: tgt.b1, pat.b2: tgt.b2}
            return self.proc(pat.cont, tgt.cont, e, tbound | {tgt.b1, tgt.b2})
        if isinstance(pat, Case):
            if not (self.msg(pat.src, tgt.src, env, tbound) and self.msg(pat.key, tgt.key, env, tbound)):
                return False
            return self.proc(pat.cont, tgt.cont, {**env, pat.binder: tgt.binder}, tbound | {tgt.binder})
        return False

    def pre_substitution(self) -> Optional[Substitution]:
        """The substitution applied before the rigid renaming."""
        if not self.rho:
            return Substitution(self.theta)
        inv = {v: k for k, v in self.rho.items()}
        dom = set(self.rho)
        table = {}
        for x, m in self.theta.items():
            for r in m._rigids:
                if r not in inv and r in dom:
                    return None
            table[x] = _rename_rigids(m, inv)
        return Substitution(table)


def _rename_rigids(m: Message, table: dict) -> Message:
    if type(m) is Rigid:
        t = table.get(m.ident)
        return m if t is None else Rigid(t)
    if type(m) is Name:
        return m
    if not (m._rigids & table.keys()):
        return m
    return type(m)(_rename_rigids(m.left, table), _rename_rigids(m.right, table))


def _rename_rigids_proc(p: Process, table: dict) -> Process:
    if not table or not (proc_names(p)[1] & table.keys()):
        return p
    r = lambda m: _rename_rigids(m, table)
    if isinstance(p, Output):
        return Output(r(p.chan), r(p.msg), _rename_rigids_proc(p.cont, table))
    if isinstance(p, Input):
        return Input(r(p.chan), p.binder, _rename_rigids_proc(p.cont, table))
    if isinstance(p, Par):
        return Par(_rename_rigids_proc(p.left, table), _rename_rigids_proc(p.right, table))
    if isinstance(p, Restrict):
        return Restrict(p.binder, _rename_rigids_proc(p.body, table))
    if isinstance(p, Bang):
        return Bang(_rename_rigids_proc(p.body, table))
    if isinstance(p, Match):
        return Match(r(p.m1), r(p.m2), _rename_rigids_proc(p.cont, table))
    if isinstance(p, Let):
        return Let(p.b1, p.b2, r(p.src), _rename_rigids_proc(p.cont, table))
    if isinstance(p, Case):
        return Case(r(p.src), p.binder, r(p.key), _rename_rigids_proc(p.cont, table))
    return p


def _rigid_to_name_proc(p: Process, rigid: str, name: str) -> Process:
    """Replace the rigid name ``#rigid`` by the name ``name`` (assumed fresh)."""
    table = {rigid: None}

    def r(m):
        if type(m) is Rigid:
            return Name(name) if m.ident == rigid else m
        if type(m) is Name or rigid not in m._rigids:
            return m
        return type(m)(r(m.left), r(m.right))

    if rigid not in proc_names(p)[1]:
        return p
    rec = lambda q: _rigid_to_name_proc(q, rigid, name)
    if isinstance(p, Output):
        return Output(r(p.chan), r(p.msg), rec(p.cont))
    if isinstance(p, Input):
        return Input(r(p.chan), p.binder, rec(p.cont))
    if isinstance(p, Par):
        return Par(rec(p.left), rec(p.right))
    if isinstance(p, Restrict):
        return Restrict(p.binder, rec(p.body))
    if isinstance(p, Bang):
        return Bang(rec(p.body))
    if isinstance(p, Match):
        return Match(r(p.m1), r(p.m2), rec(p.cont))
    if isinstance(p, Let):
        return Let(p.b1, p.b2, r(p.src), rec(p.cont))
    if isinstance(p, Case):
        return Case(r(p.src), p.binder, r(p.key), rec(p.cont))
    return p


def _rigid_to_name(m: Message, rigid: str, name: str) -> Message:
    if type(m) is Rigid:
        return Name(name) if m.ident == rigid else m
    if type(m) is Name or rigid not in m._rigids:
        return m
    return type(m)(_rigid_to_name(m.left, rigid, name), _rigid_to_name(m.right, rigid, name))


# -- the justification engine -------------------------------------------------------------

@dataclass
class _Context:
    members: list
    cfg: CheckConfig
    index: dict = field(default_factory=dict)
    canon_index: dict = field(default_factory=dict)
    member_rigids: tuple = ()
    member_inputs: tuple = ()
    memo: dict = field(default_factory=dict)
    buckets: dict = field(default_factory=dict)
    consistent_memo: dict = field(default_factory=dict)

    def __post_init__(self):
        members, self.members = self.members, []
        self._rigids, self._inputs = set(), set()
        for t in members:
            self.add(t)

    def add(self, t: TracedTriple):
        self.members.append(t)
        self.memo.clear()
        self.index.setdefault(t.key, t)
        self.buckets.setdefault(_shape_key(t), []).append(t)
        if "eq" in self.cfg.up_to_rules:
            try:
                k = (t.trace, canonical_key(t.left), canonical_key(t.right))
                self.canon_index.setdefault(k, t)
            except ValueError:
                pass
        self._rigids |= t.free_names()[1]
        for e in t.trace:
            if e.mark == INPUT and type(e.left) is Name and e.left == e.right:
                self._inputs.add(e.left.ident)
        self.member_rigids = tuple(sorted(self._rigids))
        self.member_inputs = tuple(sorted(self._inputs))

    def consistent(self, h: BiTrace) -> bool:
        hit = self.consistent_memo.get(h)
        if hit is None:
            hit = bool(is_consistent(underlying_theory(h))) and \
                bool(bitrace_consistent_bounded(h, self.cfg.subst_depth))
            self.consistent_memo[h] = hit
        return hit


@lru_cache(maxsize=None)
def _shape(p: Process):
    """Constructor skeleton; matching never changes it."""
    kids = tuple(_shape(getattr(p, a)) for a in ("cont", "body", "left", "right")
                 if isinstance(getattr(p, a, None), Process))
    return (type(p).__name__, kids)


def _shape_key(t: TracedTriple):
    return tuple(e.mark for e in t.trace), _shape(t.left), _shape(t.right)


def _terminal(state: TracedTriple, ctx: _Context) -> Optional[str]:
    rules = ctx.cfg.up_to_rules
    h, p, q = state.trace, state.left, state.right
    if state.key in ctx.index:
        return "member"
    eq = "eq" in rules
    if eq:
        try:
            ck = (h, canonical_key(p), canonical_key(q))
        except ValueError:
            ck = None
        if ck is not None and ck in ctx.canon_index:
            return "structural"
    same = alpha_key(p) == alpha_key(q)
    if not same and eq:
        try:
            same = struct_equiv(p, q)
        except ValueError:
            same = False
    if same and h.is_reflexive() and ctx.consistent(h):
        return "reflexive"
    subst, rename = "s" in rules, "i" in rules
    if subst or rename:
        for m in ctx.buckets.get(_shape_key(state), ()):
            tag = _match_member(m, state, subst, rename)
            if tag:
                return tag
    if "w" in rules:
        for m in ctx.members:
            if _weakening_member(m, state, subst, ctx):
                return "weakening"
    if "p" in rules and ctx.cfg.parallel_contexts:
        for m in ctx.members:
            if _parallel_member(m, state, ctx):
                return "parallel"
    return None


def _match_member(m: TracedTriple, t: TracedTriple, subst: bool, rename: bool) -> Optional[str]:
    if len(m.trace) != len(t.trace):
        return None
    left, right = _Match(subst, rename), _Match(subst, rename)
    for a, b in zip(m.trace, t.trace):
        if a.mark != b.mark:
            return None
        if not left.msg(a.left, b.left, {}, frozenset()):
            return None
        if not right.msg(a.right, b.right, {}, frozenset()):
            return None
    if not left.proc(m.left, t.left) or not right.proc(m.right, t.right):
        return None
    s1, s2 = left.pre_substitution(), right.pre_substitution()
    if s1 is None or s2 is None:
        return None
    if (s1 or s2) and not respects(SubstitutionPair(s1, s2), m.trace):
        return None
    tags = []
    if s1 or s2:
        tags.append("substitution")
    if left.rho and any(k != v for k, v in left.rho.items()) or \
            right.rho and any(k != v for k, v in right.rho.items()):
        tags.append("injective-renaming")
    return "+".join(tags) or "member"


def _weakening_member(m: TracedTriple, t: TracedTriple, subst: bool, ctx: _Context) -> bool:
    if len(t.trace) >= len(m.trace):
        return False
    left, right = _Match(subst, False), _Match(subst, False)
    if not left.proc(m.left, t.left) or not right.proc(m.right, t.right):
        return False
    s1, s2 = Substitution(left.theta), Substitution(right.theta)
    sp = SubstitutionPair(s1, s2)
    if (s1 or s2) and not respects(sp, m.trace):
        return False
    big = apply_pair(m.trace, sp)
    return ctx.consistent(t.trace) and bitrace_order(t.trace, big, "weakening") is not None


def _components(p: Process) -> list:
    if isinstance(p, Par):
        return _components(p.left) + _components(p.right)
    if isinstance(p, Nil):
        return []
    return [p]


def _split_parallel(target: Process, member: Process, template: Process, dom, subst: bool):
    """Find sigma with target ~ member | template sigma (components up to α)."""
    tc, mc, rc = _components(target), _components(member), _components(template)
    if len(tc) != len(mc) + len(rc):
        return None
    for chosen in itertools.permutations(range(len(tc)), len(mc)):
        if any(alpha_key(tc[i]) != alpha_key(c) for i, c in zip(chosen, mc)):
            continue
        rest = [tc[i] for i in range(len(tc)) if i not in chosen]
        for order in itertools.permutations(rest):
            mt = _Match(True, False)
            if all(mt.proc(r, o) for r, o in zip(rc, order)):
                sigma = {x: mt.theta.get(x, Name(x)) for x in dom}
                if not set(mt.theta) <= set(dom):
                    continue
                return Substitution(sigma)
    return None


def _parallel_member(m: TracedTriple, t: TracedTriple, ctx: _Context) -> bool:
    h = t.trace
    if h != m.trace and bitrace_order(h, m.trace, "contraction") is None:
        return False
    if not ctx.consistent(h):
        return False
    for template, dom in ctx.cfg.parallel_contexts:
        if not proc_names(template)[0] <= set(dom):
            continue
        s1 = _split_parallel(t.left, m.left, template, dom, True)
        if s1 is None:
            continue
        s2 = _split_parallel(t.right, m.right, template, dom, True)
        if s2 is None:
            continue
        full1 = {x: s1.image(x) for x in dom}
        full2 = {x: s2.image(x) for x in dom}
        if _equiv_full(full1, full2, h):
            return True
    return False


def _equiv_full(f1: dict, f2: dict, h: BiTrace) -> bool:
    gamma = underlying_theory(h)
    names = h.free_names()[0]
    for x in f1:
        a, b = f1[x], f2[x]
        if not derivable(gamma, a, b) or not (a._names | b._names) <= names:
            return False
    return True


def _predecessors(state: TracedTriple, ctx: _Context, root: bool):
    """States from which ``state`` follows by one generative up-to rule."""
    rules = ctx.cfg.up_to_rules
    h, p, q = state.trace, state.left, state.right
    if "c" in rules and (root or ctx.consistent(h)):
        for _, g in contraction_removals(h):
            yield "contraction", TracedTriple(g, p, q)
    if "f" in rules:
        yield from _flex_rigid_predecessors(state, ctx)
    if "r" in rules:
        yield from _restriction_predecessors(state, ctx)


def _flex_rigid_predecessors(state, ctx):
    h, p, q = state.trace, state.left, state.right
    for k, e in enumerate(h):
        if e.mark != OUTPUT or type(e.left) is not Rigid or e.left != e.right:
            continue
        c = e.left.ident
        if c in h[:k].free_names()[1]:
            continue
        used = h.free_names()[0] | proc_names(p)[0] | proc_names(q)[0]
        options = [x for x in ctx.member_inputs if x not in used]
        options.append(fresh_ident("x", used | set(ctx.member_inputs)))
        for x in dict.fromkeys(options):
            entries = list(h.entries[:k]) + [IOPair(Name(x), Name(x), INPUT)]
            for f in h.entries[k + 1:]:
                entries.append(IOPair(_rigid_to_name(f.left, c, x),
                                      _rigid_to_name(f.right, c, x), f.mark))
            g = BiTrace(entries, check=False)
            yield "flex-rigid", TracedTriple(
                g, _rigid_to_name_proc(p, c, x), _rigid_to_name_proc(q, c, x))


def _top_restrictions(p: Process, eq: bool):
    if eq:
        try:
            binders, leaves = _prenex(p, set(_all_idents(p)))
        except ValueError:
            return None
        if not binders:
            return None
        body = Nil() if not leaves else leaves[0]
        for leaf in leaves[1:]:
            body = Par(body, leaf)
        return binders[0], _wrap(binders[1:], body)
    if isinstance(p, Restrict):
        return p.binder, p.body
    return None


def _all_idents(p: Process):
    from .process import all_names
    return all_names(p)


def _restriction_predecessors(state, ctx):
    h, p, q = state.trace, state.left, state.right
    eq = "eq" in ctx.cfg.up_to_rules
    left, right = _top_restrictions(p, eq), _top_restrictions(q, eq)

    def options(side_rigids, binder):
        supply = FreshSupply(side_rigids)
        out = [fresh_rigid(supply, binder)]
        out += [Rigid(r) for r in ctx.member_rigids if r not in side_rigids]
        return list(dict.fromkeys(out))

    l_excl = set().union(*(e.left._rigids for e in h)) | proc_names(p)[1]
    r_excl = set().union(*(e.right._rigids for e in h)) | proc_names(q)[1]
    lefts = [(None, p)]
    if left is not None:
        x, body = left
        lefts += [(c, subst_proc(body, {x: c})) for c in options(l_excl, x)]
    rights = [(None, q)]
    if right is not None:
        y, body = right
        rights += [(d, subst_proc(body, {y: d})) for d in options(r_excl, y)]
    for (c, p1), (d, q1) in itertools.product(lefts, rights):
        if c is None and d is None:
            continue
        yield "restriction", TracedTriple(h, p1, q1)


def up_to_member(target: TracedTriple, r, cfg: CheckConfig, _ctx: _Context = None):
    """Search for a chain of up-to rules deriving ``target`` from a member.

    Returns the rules in the order they are applied starting from a member
    (``["member"]`` for a member itself), or None.
    """
    ctx = _ctx or _Context(_members_of(r), cfg)
    key = target.key
    if key in ctx.memo:
        return ctx.memo[key]
    result = None
    queue = deque([(target, ())])
    seen = {key}
    while queue:
        state, chain = queue.popleft()
        tag = _terminal(state, ctx)
        if tag is not None:
            head = tag.split("+")
            if tag == "member" and chain:
                head = []
            result = head + list(reversed(chain))
            break
        if len(chain) >= cfg.closure_budget:
            continue
        for rule, nxt in _predecessors(state, ctx, not chain):
            if nxt.key not in seen:
                seen.add(nxt.key)
                queue.append((nxt, chain + (rule,)))
    ctx.memo[key] = result
    return result


def _members_of(r) -> list:
    if isinstance(r, TracedRelation):
        return r.symmetric()
    return TracedRelation(list(r)).symmetric()


# -- checking ------------------------------------------------------------------------------

def well_formed(r: TracedRelation, cfg: CheckConfig) -> Optional[RelationIllFormed]:
    for k, t in enumerate(r.triples):
        if has_bang(t.left) or has_bang(t.right):
            return RelationIllFormed(k, "replication is not supported by the checker")
        try:
            _check_scoping(t.trace.entries)
        except BiTraceError as e:
            return RelationIllFormed(k, f"invalid bi-trace: {e}")
        n, rg = t.trace.free_names()
        pn = proc_names(t.left)[0] | proc_names(t.right)[0]
        pr = proc_names(t.left)[1] | proc_names(t.right)[1]
        if not pn <= n or not pr <= rg:
            extra = sorted(pn - n) + ["#" + x for x in sorted(pr - rg)]
            return RelationIllFormed(k, f"free names of the processes not in the trace: {', '.join(extra)}")
        cert = is_consistent(underlying_theory(t.trace))
        if not cert:
            return RelationIllFormed(k, f"inconsistent trace theory: {cert.describe()}")
        verdict = bitrace_consistent_bounded(t.trace, cfg.subst_depth)
        if not verdict:
            return RelationIllFormed(k, f"inconsistent bi-trace: {verdict.describe()}")
    return None


def _fresh_choices(xs, exclude, ctx):
    """Fresh rigid names for the restricted names ``xs``: the default choice
    first, then alternatives drawn from rigid names used by the relation."""
    supply = FreshSupply(exclude)
    default = tuple(fresh_rigid(supply, x) for x in xs)
    yield default
    pool = [Rigid(r) for r in ctx.member_rigids if r not in exclude]
    if not xs or not pool:
        return
    options = list(dict.fromkeys(list(default) + pool))
    for combo in itertools.permutations(options, len(xs)):
        if combo != default:
            yield combo


def _instantiate_concr(c: Concr, names) -> tuple:
    table = {x: n for x, n in zip(c.restricted, names)}
    msg = apply_subst(c.msg, Substitution(table))
    return msg, subst_proc(c.cont, table)


class _Obligations:
    """Enumerates the transition obligations of a triple."""

    def __init__(self, ctx: _Context):
        self.ctx = ctx
        self.count = 0

    def check_triple(self, t: TracedTriple, on_target=None):
        depth = self.ctx.cfg.subst_depth
        for sp in enumerate_respectful(t.trace, depth):
            h = apply_pair(t.trace, sp)
            p = subst_proc(t.left, sp[0])
            q = subst_proc(t.right, sp[1])
            gamma = underlying_theory(h)
            left_known = frozenset(e.left for e in h)
            rsteps = step(q)
            for act, ag in step(p):
                failure = self._obligation(h, gamma, left_known, p, q, act, ag, rsteps, on_target)
                if failure is not None:
                    return Counterexample(t, sp, act, failure)
        return None

    def _obligation(self, h, gamma, left_known, p, q, act, ag, rsteps, on_target):
        if isinstance(act, Tau):
            self.count += 1
            for ract, rag in rsteps:
                if isinstance(ract, Tau):
                    target = TracedTriple(h, ag.p, rag.p)
                    if self._justify([target], on_target):
                        return None
            return "no tau move of the right process leads to a justified continuation"
        if not synthesizable(left_known, act.chan):
            return None
        self.count += 1
        want = In if isinstance(act, In) else OutBar
        matches = [(ra, rg) for ra, rg in rsteps
                   if isinstance(ra, want) and derivable(gamma, act.chan, ra.chan)]
        kind = "input" if want is In else "output"
        if not matches:
            return f"right process has no {kind} on a channel equivalent to {act.chan}"
        names = h.free_names()[0]
        if want is In:
            x = ag.binder if ag.binder not in names else fresh_ident(ag.binder, names)
            for ra, rg in matches:
                ext = h.extend(IOPair(act.chan, ra.chan, INPUT), IOPair(Name(x), Name(x), INPUT))
                target = TracedTriple(ext, subst_proc(ag.body, {ag.binder: Name(x)}),
                                      subst_proc(rg.body, {rg.binder: Name(x)}))
                if self._justify([target], on_target):
                    return None
            return "no input continuation is justified"
        exclude = set(h.free_names()[1]) | proc_names(p)[1] | proc_names(q)[1]
        for ra, rg in matches:
            lefts = list(_fresh_choices(ag.restricted, exclude, self.ctx))
            rights = list(_fresh_choices(rg.restricted, exclude, self.ctx))
            first = True
            targets = []
            for cs, ds in itertools.product(lefts, rights):
                m1, p1 = _instantiate_concr(ag, cs)
                m2, q1 = _instantiate_concr(rg, ds)
                ext = h.extend(IOPair(act.chan, ra.chan, INPUT), IOPair(m1, m2, OUTPUT))
                if first:
                    first = False
                    if not self.ctx.consistent(ext):
                        break
                targets.append(TracedTriple(ext, p1, q1))
            if targets and self._justify(targets, on_target):
                return None
        return "no output continuation is justified"

    def _justify(self, targets, on_target) -> bool:
        for target in targets:
            if up_to_member(target, None, self.ctx.cfg, self.ctx) is not None:
                if on_target is not None:
                    on_target(target)
                return True
        return False


def check_relation(r: TracedRelation, cfg: CheckConfig = CheckConfig()):
    """Check that ``r`` (symmetrically closed) is an open bisimulation up to
    the configured rules, for the bounded family of respectful substitutions."""
    if not isinstance(r, TracedRelation):
        r = TracedRelation(r)
    bad = well_formed(r, cfg)
    if bad is not None:
        return bad
    members = r.symmetric()
    ctx = _Context(members, cfg)
    ob = _Obligations(ctx)
    for t in members:
        cx = ob.check_triple(t)
        if cx is not None:
            return cx
    return VerifiedUpToBound(cfg.subst_depth, ob.count)


def saturate(r: TracedRelation, cfg: CheckConfig, limit: int = 20000) -> TracedRelation:
    """Add every continuation the checker justifies (under ``cfg``) as an
    explicit member, until nothing new appears."""
    if not isinstance(r, TracedRelation):
        r = TracedRelation(r)
    members = r.symmetric()
    keys = {t.key for t in members}
    plain = CheckConfig(cfg.subst_depth, frozenset(), cfg.closure_budget)
    ctx, bare = _Context(members, cfg), _Context(members, plain)
    queue = deque(members)
    while queue:
        t = queue.popleft()
        added = []

        def record(target):
            if target.key in keys or up_to_member(target, None, plain, bare) is not None:
                return
            keys.add(target.key)
            added.append(target)

        _Obligations(ctx).check_triple(t, on_target=record)
        for a in added:
            for b in (a, a.inverse()):
                if b.key not in bare.index:
                    ctx.add(b)
                    bare.add(b)
                    keys.add(b.key)
                    queue.append(b)
        if len(bare.members) > limit:
            raise RuntimeError("saturation did not converge within the member limit")
    return TracedRelation(bare.members)


def universal_bitrace(names) -> BiTrace:
    return BiTrace([IOPair(Name(x), Name(x), INPUT) for x in sorted(names)])


# -- bounded refuter ------------------------------------------------------------------------

_STATE_LIMIT = 4000


def _tau_closure(p: Process, limit: int):
    """States reachable by tau moves, with the action path to each.

    Returns ``(states, complete)``; ``complete`` is False if the bound was hit.
    """
    start = alpha_key(p)
    paths = {start: (p, ())}
    queue = deque([p])
    while queue:
        cur = queue.popleft()
        path = paths[alpha_key(cur)][1]
        for act, ag in step(cur):
            if isinstance(act, Tau):
                k = alpha_key(ag.p)
                if k not in paths:
                    if len(paths) >= limit:
                        return list(paths.values()), False
                    paths[k] = (ag.p, path + (act,))
                    queue.append(ag.p)
    return list(paths.values()), True


def _barbs(p: Process, limit: int):
    states, complete = _tau_closure(p, limit)
    barbs = {}
    for s, path in states:
        for act, _ in step(s):
            if isinstance(act, Tau):
                continue
            b = ("in" if isinstance(act, In) else "out", act.chan)
            if b not in barbs:
                barbs[b] = (act, path + (act,))
    return barbs, complete


def _observers(channels, messages, depth, fresh):
    """Observer processes: sequences of at most ``depth`` prefixes."""
    def build(k, bound):
        yield Nil()
        if k == 0:
            return
        chans = list(channels) + [Name(v) for v in bound]
        msgs = list(messages) + [Name(v) for v in bound]
        for c in chans:
            var = fresh(len(bound))
            for rest in build(k - 1, bound + (var,)):
                yield Input(c, var, rest)
            for m in msgs:
                for rest in build(k - 1, bound):
                    yield Output(c, m, rest)
    yield from build(depth, ())


def _channels(p: Process) -> set:
    out = set()
    stack = [p]
    while stack:
        q = stack.pop()
        if isinstance(q, (Input, Output)):
            out.add(q.chan)
        for attr in ("cont", "body", "left", "right"):
            v = getattr(q, attr, None)
            if isinstance(v, Process):
                stack.append(v)
    return out


def bounded_distinguisher(p: Process, q: Process, depth: int = 2,
                          state_limit: int = _STATE_LIMIT):
    """Search observers of size at most ``depth`` for one that separates p, q.

    Returns ``(observer, barb, trace)`` or None; None is not a proof of
    equivalence.
    """
    if not is_pure(p) or not is_pure(q):
        raise ValueError("the distinguisher works on pure processes")
    if alpha_key(p) == alpha_key(q):
        return None
    free = sorted(proc_names(p)[0] | proc_names(q)[0])
    fresh_base = fresh_ident("n", set(free))
    channels = sorted({c for c in _channels(p) | _channels(q)
                       if c._names <= set(free)}, key=lambda m: m.key)
    messages = [Name(x) for x in free] + [Name(fresh_base)]
    taken = set(free) | {fresh_base}

    def fresh(i):
        return fresh_ident("z", taken | {f"z{j}" for j in range(i)}) if i == 0 else f"z{i}"

    for obs in _observers(channels, messages, depth, fresh):
        bp, cp = _barbs(Par(p, obs), state_limit)
        bq, cq = _barbs(Par(q, obs), state_limit)
        if not (cp and cq):
            continue
        for barb in sorted(set(bp) ^ set(bq), key=lambda b: (b[0], b[1].key)):
            act, trace = bp.get(barb) or bq.get(barb)
            return obs, act, list(trace)
    return None
