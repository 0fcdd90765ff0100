"""Spi-calculus processes, agents and the one-step transition relation."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

from .terms import (
    Enc, Message, Name, Pair, Substitution, apply_subst, fresh_ident,
)

__all__ = [
    "Nil", "Output", "Input", "Par", "Restrict", "Bang", "Match", "Let", "Case",
    "Proc", "Abs", "Concr", "Tau", "In", "OutBar",
    "proc_names", "subst_proc", "reduce", "step", "interact", "compose_agent",
    "restrict_agent", "alpha_equiv", "alpha_key", "struct_equiv", "canonical_key",
    "agent_key", "print_process", "print_agent", "has_bang", "traces",
    "agent_process",
]


# -- syntax -------------------------------------------------------------------------

class Process:
    __slots__ = ()

    def free_names(self):
        return proc_names(self)

    def __str__(self):
        return print_process(self)


@dataclass(frozen=True, repr=False)
class Nil(Process):
    pass


@dataclass(frozen=True, repr=False)
class Output(Process):
    chan: Message
    msg: Message
    cont: Process


@dataclass(frozen=True, repr=False)
class Input(Process):
    chan: Message
    binder: str
    cont: Process


@dataclass(frozen=True, repr=False)
class Par(Process):
    left: Process
    right: Process


@dataclass(frozen=True, repr=False)
class Restrict(Process):
    binder: str
    body: Process


@dataclass(frozen=True, repr=False)
class Bang(Process):
    body: Process


@dataclass(frozen=True, repr=False)
class Match(Process):
    m1: Message
    m2: Message
    cont: Process


@dataclass(frozen=True, repr=False)
class Let(Process):
    b1: str
    b2: str
    src: Message
    cont: Process


@dataclass(frozen=True, repr=False)
class Case(Process):
    src: Message
    binder: str
    key: Message
    cont: Process


for _cls in (Nil, Output, Input, Par, Restrict, Bang, Match, Let, Case):
    _cls.__repr__ = lambda self: f"<{type(self).__name__} {print_process(self)}>"

NIL = Nil()


class Agent:
    __slots__ = ()

    def free_names(self):
        return agent_names(self)

    def __str__(self):
        return print_agent(self)

    def __repr__(self):
        return f"<{type(self).__name__} {print_agent(self)}>"


@dataclass(frozen=True, repr=False)
class Proc(Agent):
    p: Process


@dataclass(frozen=True, repr=False)
class Abs(Agent):
    binder: str
    body: Process


@dataclass(frozen=True, repr=False)
class Concr(Agent):
    restricted: tuple
    msg: Message
    cont: Process

    def __post_init__(self):
        object.__setattr__(self, "restricted", tuple(self.restricted))
        if len(set(self.restricted)) != len(self.restricted):
            raise ValueError("restricted names of a concretion must be distinct")


class Action:
    __slots__ = ()

    def free_names(self):
        if isinstance(self, Tau):
            return frozenset(), frozenset()
        return self.chan._names, self.chan._rigids

    @property
    def key(self):
        if isinstance(self, Tau):
            return (0,)
        return (1 if isinstance(self, In) else 2, self.chan.key)


@dataclass(frozen=True)
class Tau(Action):
    def __str__(self):
        return "tau"


@dataclass(frozen=True)
class In(Action):
    chan: Message

    def __str__(self):
        return f"in {self.chan}"


@dataclass(frozen=True)
class OutBar(Action):
    chan: Message

    def __str__(self):
        return f"out {self.chan}"


TAU = Tau()


# -- printing ------------------------------------------------------------------------

def _cont(p: Process) -> str:
    s = print_process(p)
    return f"({s})" if isinstance(p, Par) else s


def print_process(p: Process) -> str:
    if isinstance(p, Nil):
        return "0"
    if isinstance(p, Output):
        return f"out({p.chan},{p.msg}).{_cont(p.cont)}"
    if isinstance(p, Input):
        return f"in({p.chan},{p.binder}).{_cont(p.cont)}"
    if isinstance(p, Par):
        right = print_process(p.right)
        if isinstance(p.right, Par):
            right = f"({right})"
        return f"{print_process(p.left)} | {right}"
    if isinstance(p, Restrict):
        return f"nu {p.binder}. {_cont(p.body)}"
    if isinstance(p, Bang):
        return f"!{_cont(p.body)}"
    if isinstance(p, Match):
        return f"[{p.m1} = {p.m2}]{_cont(p.cont)}"
    if isinstance(p, Let):
        return f"let ({p.b1},{p.b2}) = {p.src} in {_cont(p.cont)}"
    if isinstance(p, Case):
        return f"case {p.src} of {{{p.binder}}}{p.key} in {_cont(p.cont)}"
    raise TypeError(f"not a process: {p!r}")


def print_agent(a: Agent) -> str:
    if isinstance(a, Proc):
        return print_process(a.p)
    if isinstance(a, Abs):
        return f"({a.binder}){_cont(a.body)}"
    prefix = f"(nu {','.join(a.restricted)})" if a.restricted else ""
    return f"{prefix}<{a.msg}>{_cont(a.cont)}"


# -- free names and substitution ----------------------------------------------------

@lru_cache(maxsize=1 << 16)
def proc_names(p: Process) -> tuple:
    """Free ``(names, rigid_names)`` of a process."""
    if isinstance(p, Nil):
        return frozenset(), frozenset()
    if isinstance(p, Output):
        n, r = proc_names(p.cont)
        return (n | p.chan._names | p.msg._names, r | p.chan._rigids | p.msg._rigids)
    if isinstance(p, Input):
        n, r = proc_names(p.cont)
        return (n - {p.binder}) | p.chan._names, r | p.chan._rigids
    if isinstance(p, Par):
        n1, r1 = proc_names(p.left)
        n2, r2 = proc_names(p.right)
        return n1 | n2, r1 | r2
    if isinstance(p, Restrict):
        n, r = proc_names(p.body)
        return n - {p.binder}, r
    if isinstance(p, Bang):
        return proc_names(p.body)
    if isinstance(p, Match):
        n, r = proc_names(p.cont)
        return (n | p.m1._names | p.m2._names, r | p.m1._rigids | p.m2._rigids)
    if isinstance(p, Let):
        n, r = proc_names(p.cont)
        return (n - {p.b1, p.b2}) | p.src._names, r | p.src._rigids
    if isinstance(p, Case):
        n, r = proc_names(p.cont)
        return ((n - {p.binder}) | p.src._names | p.key._names,
                r | p.src._rigids | p.key._rigids)
    raise TypeError(f"not a process: {p!r}")


def agent_names(a: Agent) -> tuple:
    if isinstance(a, Proc):
        return proc_names(a.p)
    if isinstance(a, Abs):
        n, r = proc_names(a.body)
        return n - {a.binder}, r
    n, r = proc_names(a.cont)
    n = (n | a.msg._names) - set(a.restricted)
    return n, r | a.msg._rigids


def all_names(p: Process) -> frozenset:
    """Every name identifier occurring in ``p``, bound or free."""
    out = set(proc_names(p)[0])
    stack = [p]
    while stack:
        q = stack.pop()
        for attr in ("binder", "b1", "b2"):
            v = getattr(q, attr, None)
            if v is not None:
                out.add(v)
        for attr in ("cont", "body", "left", "right"):
            v = getattr(q, attr, None)
            if isinstance(v, Process):
                stack.append(v)
    return frozenset(out)


def _binder(s: dict, binders, body: Process):
    """Prepare substitution ``s`` for descending under ``binders``.

    Returns the (possibly renamed) binders and the substitution to use on the
    body, or ``None`` if the substitution no longer affects the body.
    """
    inner = {k: v for k, v in s.items() if k not in binders}
    fn = proc_names(body)[0]
    inner = {k: v for k, v in inner.items() if k in fn}
    if not inner:
        return binders, None
    rng = set()
    for v in inner.values():
        rng |= v._names
    avoid = set(fn) | rng | set(inner) | set(binders)
    out = []
    for b in binders:
        if b in rng:
            nb = fresh_ident(b, avoid)
            avoid.add(nb)
            inner[b] = Name(nb)
            out.append(nb)
        else:
            out.append(b)
    return tuple(out), inner


def _sub(p: Process, s: dict) -> Process:
    if not s:
        return p
    if isinstance(p, Nil):
        return p
    if not (proc_names(p)[0] & s.keys()):
        return p
    table = Substitution(s)
    if isinstance(p, Output):
        return Output(apply_subst(p.chan, table), apply_subst(p.msg, table), _sub(p.cont, s))
    if isinstance(p, Par):
        return Par(_sub(p.left, s), _sub(p.right, s))
    if isinstance(p, Bang):
        return Bang(_sub(p.body, s))
    if isinstance(p, Match):
        return Match(apply_subst(p.m1, table), apply_subst(p.m2, table), _sub(p.cont, s))
    if isinstance(p, Input):
        (b,), inner = _binder(s, (p.binder,), p.cont)
        return Input(apply_subst(p.chan, table), b, _sub(p.cont, inner or {}))
    if isinstance(p, Restrict):
        (b,), inner = _binder(s, (p.binder,), p.body)
        return Restrict(b, _sub(p.body, inner or {}))
    if isinstance(p, Let):
        (b1, b2), inner = _binder(s, (p.b1, p.b2), p.cont)
        return Let(b1, b2, apply_subst(p.src, table), _sub(p.cont, inner or {}))
    if isinstance(p, Case):
        (b,), inner = _binder(s, (p.binder,), p.cont)
        return Case(apply_subst(p.src, table), b, apply_subst(p.key, table),
                    _sub(p.cont, inner or {}))
    raise TypeError(f"not a process: {p!r}")


def subst_proc(p: Process, s) -> Process:
    """Capture-avoiding application of a substitution to a process."""
    if isinstance(s, Substitution):
        s = dict(s._map)
    else:
        s = {k: v for k, v in dict(s).items() if v != Name(k)}
    return _sub(p, s)


def _rename(p: Process, old: str, new: str) -> Process:
    return _sub(p, {old: Name(new)}) if old != new else p


def subst_agent(a: Agent, s) -> Agent:
    if isinstance(s, Substitution):
        s = dict(s._map)
    if isinstance(a, Proc):
        return Proc(_sub(a.p, s))
    if isinstance(a, Abs):
        (b,), inner = _binder(s, (a.binder,), a.body)
        return Abs(b, _sub(a.body, inner or {}))
    n = (proc_names(a.cont)[0] | a.msg._names) - set(a.restricted)
    live = {k: v for k, v in s.items() if k in n}
    if not live:
        return a
    a = _avoid_concr(a, set().union(*(v._names for v in live.values())) | set(live))
    table = Substitution(live)
    return Concr(a.restricted, apply_subst(a.msg, table), _sub(a.cont, live))


# -- reduction ---------------------------------------------------------------------

def has_bang(p: Process) -> bool:
    if isinstance(p, Bang):
        return True
    for attr in ("cont", "body", "left", "right"):
        v = getattr(p, attr, None)
        if isinstance(v, Process) and has_bang(v):
            return True
    return False


def reduce(p: Process) -> Optional[Process]:
    """One reduction step at the top of ``p``, if any rule applies."""
    if isinstance(p, Bang):
        return Par(p.body, p)
    if isinstance(p, Match):
        return p.cont if p.m1 == p.m2 else None
    if isinstance(p, Let):
        if type(p.src) is not Pair:
            return None
        if p.b1 == p.b2:
            return subst_proc(p.cont, {p.b1: p.src.left})
        return subst_proc(p.cont, {p.b1: p.src.left, p.b2: p.src.right})
    if isinstance(p, Case):
        if type(p.src) is Enc and p.src.right == p.key:
            return subst_proc(p.cont, {p.binder: p.src.left})
        return None
    return None


# -- agents ---------------------------------------------------------------------------

def _avoid_concr(c: Concr, avoid) -> Concr:
    """α-rename the restricted names of ``c`` away from ``avoid``."""
    if not set(c.restricted) & set(avoid):
        return c
    taken = set(avoid) | set(c.restricted) | all_names(c.cont) | c.msg._names
    ys, msg, cont = [], c.msg, c.cont
    for y in c.restricted:
        if y in avoid:
            ny = fresh_ident(y, taken)
            taken.add(ny)
            msg = apply_subst(msg, Substitution({y: Name(ny)}))
            cont = _rename(cont, y, ny)
            ys.append(ny)
        else:
            ys.append(y)
    return Concr(tuple(ys), msg, cont)


def _avoid_abs(f: Abs, avoid) -> Abs:
    if f.binder not in avoid:
        return f
    nb = fresh_ident(f.binder, set(avoid) | all_names(f.body))
    return Abs(nb, _rename(f.body, f.binder, nb))


def _wrap(binders, p: Process) -> Process:
    for y in reversed(binders):
        p = Restrict(y, p)
    return p


def restrict_agent(x: str, a: Agent) -> Agent:
    """``(nu x)A`` following the agent-composition equations."""
    if isinstance(a, Proc):
        return Proc(Restrict(x, a.p))
    if isinstance(a, Abs):
        a = _avoid_abs(a, {x})
        return Abs(a.binder, Restrict(x, a.body))
    a = _avoid_concr(a, {x})
    if x in a.msg._names:
        return Concr((x,) + a.restricted, a.msg, a.cont)
    return Concr(a.restricted, a.msg, Restrict(x, a.cont))


def compose_agent(r: Process, a: Agent, side: str = "right") -> Agent:
    """``R | A`` when ``side`` is "right" (agent on the right), else ``A | R``."""
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    fn = proc_names(r)[0]

    def join(q):
        return Par(r, q) if side == "right" else Par(q, r)

    if isinstance(a, Proc):
        return Proc(join(a.p))
    if isinstance(a, Abs):
        a = _avoid_abs(a, fn)
        return Abs(a.binder, join(a.body))
    a = _avoid_concr(a, fn)
    return Concr(a.restricted, a.msg, join(a.cont))


def interact(f: Abs, c: Concr, concretion_first: bool = False) -> Process:
    """``F @ C`` (or ``C @ F`` with ``concretion_first``)."""
    if not isinstance(f, Abs) or not isinstance(c, Concr):
        raise TypeError("interact needs an abstraction and a concretion")
    c = _avoid_concr(c, proc_names(f.body)[0] | {f.binder})
    body = subst_proc(f.body, {f.binder: c.msg})
    inner = Par(c.cont, body) if concretion_first else Par(body, c.cont)
    return _wrap(c.restricted, inner)


def agent_process(a: Agent) -> Process:
    """The process underneath an agent (restrictions kept, binder left free)."""
    if isinstance(a, Proc):
        return a.p
    if isinstance(a, Abs):
        return a.body
    return _wrap(a.restricted, a.cont)


# -- transitions ----------------------------------------------------------------------

def _sort(transitions):
    seen = {}
    for act, ag in transitions:
        k = (act, agent_key(ag))
        if k not in seen:
            seen[k] = (act, ag)
    return sorted(seen.values(), key=lambda t: (t[0].key, print_agent(t[1])))


@lru_cache(maxsize=1 << 15)
def _step(p: Process) -> tuple:
    if isinstance(p, Nil):
        return ()
    if isinstance(p, Output):
        return ((OutBar(p.chan), Concr((), p.msg, p.cont)),)
    if isinstance(p, Input):
        return ((In(p.chan), Abs(p.binder, p.cont)),)
    if isinstance(p, Bang):
        # one unfolding: transitions of the copy, with the replication kept
        return tuple(_sort((act, compose_agent(p, ag, "left")) for act, ag in _step(p.body)))
    if isinstance(p, (Match, Let, Case)):
        q = reduce(p)
        return () if q is None else _step(q)
    if isinstance(p, Restrict):
        out = []
        for act, ag in _step(p.body):
            if p.binder in act.free_names()[0]:
                continue
            out.append((act, restrict_agent(p.binder, ag)))
        return tuple(_sort(out))
    if isinstance(p, Par):
        left, right = _step(p.left), _step(p.right)
        out = [(act, compose_agent(p.right, ag, "left")) for act, ag in left]
        out += [(act, compose_agent(p.left, ag, "right")) for act, ag in right]
        for a1, g1 in left:
            for a2, g2 in right:
                if isinstance(a1, In) and isinstance(a2, OutBar) and a1.chan == a2.chan:
                    out.append((TAU, Proc(interact(g1, g2))))
                elif isinstance(a1, OutBar) and isinstance(a2, In) and a1.chan == a2.chan:
                    out.append((TAU, Proc(interact(g2, g1, concretion_first=True))))
        return tuple(_sort(out))
    raise TypeError(f"not a process: {p!r}")


def step(p: Process) -> list:
    """All one-step transitions of ``p`` as ``(action, agent)`` pairs."""
    return list(_step(p))


def traces(p: Process, depth: int) -> list:
    """Action sequences of length at most ``depth`` (inputs stay symbolic)."""
    out = set()
    frontier = [((), p)]
    for _ in range(depth):
        nxt = []
        for path, q in frontier:
            for act, ag in _step(q):
                npath = path + (act,)
                out.add(npath)
                nxt.append((npath, agent_process(ag)))
        frontier = nxt
    return sorted(out, key=lambda t: [a.key for a in t])


# -- α-equivalence and structural equivalence ------------------------------------------

def _mkey(m: Message, env: dict):
    t = type(m)
    if t is Name:
        b = env.get(m.ident)
        return ("n", m.ident) if b is None else ("b", b)
    if t is Pair or t is Enc:
        return ("p" if t is Pair else "e", _mkey(m.left, env), _mkey(m.right, env))
    return ("r", m.ident)


def _bind(env: dict, names, depth: int):
    env = dict(env)
    for i, x in enumerate(names):
        env[x] = ("d", depth + i)
    return env, depth + len(names)


def _akey(p: Process, env: dict, depth: int):
    if isinstance(p, Nil):
        return ("0",)
    if isinstance(p, Output):
        return ("o", _mkey(p.chan, env), _mkey(p.msg, env), _akey(p.cont, env, depth))
    if isinstance(p, Input):
        e, d = _bind(env, (p.binder,), depth)
        return ("i", _mkey(p.chan, env), _akey(p.cont, e, d))
    if isinstance(p, Par):
        return ("|", _akey(p.left, env, depth), _akey(p.right, env, depth))
    if isinstance(p, Restrict):
        e, d = _bind(env, (p.binder,), depth)
        return ("v", _akey(p.body, e, d))
    if isinstance(p, Bang):
        return ("!", _akey(p.body, env, depth))
    if isinstance(p, Match):
        return ("m", _mkey(p.m1, env), _mkey(p.m2, env), _akey(p.cont, env, depth))
    if isinstance(p, Let):
        e, d = _bind(env, (p.b1, p.b2), depth)
        return ("l", _mkey(p.src, env), _akey(p.cont, e, d))
    if isinstance(p, Case):
        e, d = _bind(env, (p.binder,), depth)
        return ("c", _mkey(p.src, env), _mkey(p.key, env), _akey(p.cont, e, d))
    raise TypeError(f"not a process: {p!r}")


@lru_cache(maxsize=1 << 16)
def alpha_key(p: Process):
    """A key equal for exactly the α-equivalent processes."""
    return _akey(p, {}, 0)


def alpha_equiv(p: Process, q: Process) -> bool:
    return alpha_key(p) == alpha_key(q)


def agent_key(a: Agent):
    """α-invariant key of an agent."""
    if isinstance(a, Proc):
        return ("P", alpha_key(a.p))
    if isinstance(a, Abs):
        e, d = _bind({}, (a.binder,), 0)
        return ("A", _akey(a.body, e, d))
    e, d = _bind({}, a.restricted, 0)
    return ("C", len(a.restricted), _mkey(a.msg, e), _akey(a.cont, e, d))


_PERM_LIMIT = 6


def _prenex(p: Process, taken: set):
    """Flatten one layer of ``p`` (through | and nu, after reductions).

    Returns ``(binders, leaves)``: all restrictions renamed apart and pulled
    to the front, and the prefixed or stuck components.
    """
    if isinstance(p, Bang):
        raise ValueError("structural equivalence is only checked without replication")
    if isinstance(p, Nil):
        return [], []
    if isinstance(p, Par):
        b1, l1 = _prenex(p.left, taken)
        b2, l2 = _prenex(p.right, taken)
        return b1 + b2, l1 + l2
    if isinstance(p, Restrict):
        nb = fresh_ident(p.binder, taken)
        taken.add(nb)
        binders, leaves = _prenex(_rename(p.body, p.binder, nb), taken)
        if any(nb in proc_names(l)[0] for l in leaves):
            binders = [nb] + binders
        return binders, leaves
    q = reduce(p)
    if q is not None:
        return _prenex(q, taken)
    if has_bang(p):
        raise ValueError("structural equivalence is only checked without replication")
    return [], [p]


def _components(binders, leaves):
    """Group leaves that share restricted names (minimal scopes)."""
    parent = list(range(len(leaves)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    owner = {}
    for i, leaf in enumerate(leaves):
        for b in proc_names(leaf)[0] & set(binders):
            if b in owner:
                parent[find(i)] = find(owner[b])
            else:
                owner[b] = i
    groups = {}
    for i in range(len(leaves)):
        groups.setdefault(find(i), []).append(i)
    out = []
    for idxs in groups.values():
        mine = [leaves[i] for i in idxs]
        bs = sorted(b for b in binders if owner.get(b) is not None and find(owner[b]) == find(idxs[0]))
        out.append((bs, mine))
    return out


def _group_key(bs, leaves, env, depth):
    if len(bs) > _PERM_LIMIT:
        orders = [bs]
    else:
        orders = itertools.permutations(bs)
    best = None
    for order in orders:
        e = dict(env)
        for i, b in enumerate(order):
            e[b] = ("g", depth + i)
        k = tuple(sorted(_leaf_key(l, e, depth + len(bs)) for l in leaves))
        if best is None or k < best:
            best = k
    return (len(bs), best)


def _leaf_key(p: Process, env: dict, depth: int):
    """Key of a prefixed or stuck leaf; continuations are canonicalized too."""
    if isinstance(p, Output):
        return ("o", _mkey(p.chan, env), _mkey(p.msg, env), _canonical(p.cont, env, depth))
    if isinstance(p, Input):
        e, d = _bind(env, (p.binder,), depth)
        return ("i", _mkey(p.chan, env), _canonical(p.cont, e, d))
    if isinstance(p, Match):
        return ("m", _mkey(p.m1, env), _mkey(p.m2, env), _canonical(p.cont, env, depth))
    if isinstance(p, Let):
        names = (p.b1,) if p.b1 == p.b2 else (p.b1, p.b2)
        e, d = _bind(env, names, depth)
        return ("l", len(names), _mkey(p.src, env), _canonical(p.cont, e, d))
    if isinstance(p, Case):
        e, d = _bind(env, (p.binder,), depth)
        return ("c", _mkey(p.src, env), _mkey(p.key, env), _canonical(p.cont, e, d))
    return _akey(p, env, depth)


def _canonical(p: Process, env: dict, depth: int):
    taken = set(all_names(p)) | set(env)
    binders, leaves = _prenex(p, taken)
    comps = _components(binders, leaves)
    return tuple(sorted(_group_key(bs, ls, env, depth) for bs, ls in comps))


def canonical_key(p: Process):
    """Canonical form used by :func:`struct_equiv`."""
    return _canonical(p, {}, 0)


def struct_equiv(p: Process, q: Process) -> bool:
    """Sound test for structural equivalence of replication-free processes."""
    if has_bang(p) or has_bang(q):
        raise ValueError("structural equivalence is only checked without replication")
    return canonical_key(p) == canonical_key(q)


def agent_canonical_key(a: Agent):
    """Canonical key of an agent, modulo structural equivalence of its body."""
    if isinstance(a, Proc):
        return ("P", canonical_key(a.p))
    if isinstance(a, Abs):
        return ("A", _canonical(a.body, {a.binder: ("x", 0)}, 0))
    ys = a.restricted
    orders = itertools.permutations(ys) if len(ys) <= _PERM_LIMIT else [ys]
    best = None
    for order in orders:
        env = {y: ("y", i) for i, y in enumerate(order)}
        k = (_mkey(a.msg, env), _canonical(a.cont, env, 0))
        if best is None or k < best:
            best = k
    return ("C", len(ys), best)


def agents_struct_equiv(a: Agent, b: Agent) -> bool:
    return agent_canonical_key(a) == agent_canonical_key(b)
