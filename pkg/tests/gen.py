"""Seeded random generators for messages, theories, derivable pairs and processes."""
from __future__ import annotations

import dataclasses
import random

from spibisim.process import (
    Case, Input, Let, Match, Nil, Output, Par, Process, Restrict, proc_names,
)
from spibisim.terms import Enc, Name, Pair, Rigid, fresh_ident
from spibisim.theory import derivable, theory

NAMES = ("x", "y", "z")
RIGIDS = ("a", "b", "k")


def message(rng: random.Random, depth: int, names=NAMES, rigids=RIGIDS):
    atoms = [Name(n) for n in names] + [Rigid(r) for r in rigids]
    if depth == 0 or rng.random() < 0.4:
        return rng.choice(atoms)
    cls = rng.choice((Pair, Enc))
    return cls(message(rng, depth - 1, names, rigids), message(rng, depth - 1, names, rigids))


def _perturb(rng, m, depth):
    """Usually m itself, sometimes a nearby message."""
    r = rng.random()
    if r < 0.6:
        return m
    if r < 0.8 and isinstance(m, (Pair, Enc)):
        return type(m)(_perturb(rng, m.left, depth), _perturb(rng, m.right, depth))
    return message(rng, depth)


def random_theory(rng: random.Random, max_pairs: int = 4, depth: int = 2):
    """A small theory; right sides are often close to the left sides so that
    consistent and inconsistent theories both show up."""
    n = rng.randint(1, max_pairs)
    pairs = []
    for _ in range(n):
        m = message(rng, depth)
        pairs.append((m, _perturb(rng, m, depth)))
    return theory(pairs)


def left_closure(gamma):
    """Pairs reachable from ``gamma`` by decomposing pairs and decrypting
    with derivable keys (an independent re-statement of the left rules)."""
    pairs = set(gamma)
    changed = True
    while changed:
        changed = False
        for m, n in list(pairs):
            if type(m) is Pair and type(n) is Pair:
                new = [(m.left, n.left), (m.right, n.right)]
            elif type(m) is Enc and type(n) is Enc and derivable(frozenset(pairs), m.right, n.right):
                new = [(m.left, n.left)]
            else:
                continue
            for p in new:
                if p not in pairs:
                    pairs.add(p)
                    changed = True
    return pairs


def derivable_pair(rng: random.Random, gamma, depth: int = 3, names=NAMES):
    """A random pair (M, N) with gamma |- M <-> N, built bottom-up."""
    base = sorted(left_closure(gamma), key=lambda p: (p[0].key, p[1].key))
    base += [(Name(x), Name(x)) for x in names]

    def build(d):
        if d == 0 or rng.random() < 0.45:
            return rng.choice(base)
        cls = rng.choice((Pair, Enc))
        (m1, n1), (m2, n2) = build(d - 1), build(d - 1)
        return cls(m1, m2), cls(n1, n2)

    return build(depth)


def consistent_theory(rng: random.Random, max_pairs: int = 4, depth: int = 2):
    from spibisim.theory import is_consistent
    while True:
        g = random_theory(rng, max_pairs, depth)
        if is_consistent(g):
            return g


def rename_rigids(m, table):
    if type(m) is Rigid:
        return Rigid(table.get(m.ident, m.ident))
    if type(m) is Name:
        return m
    return type(m)(rename_rigids(m.left, table), rename_rigids(m.right, table))


# -- processes

def process(rng: random.Random, depth: int, free=("a", "b"), bound=(), size=None):
    """A replication-free pure process over ``free`` plus bound names."""
    scope = list(free) + list(bound)
    used = set(free) | set(bound)

    def fresh():
        n = fresh_ident("v", used)
        used.add(n)
        return n

    def msg(d):
        atoms = [Name(x) for x in scope]
        if d == 0 or rng.random() < 0.6:
            return rng.choice(atoms)
        return rng.choice((Pair, Enc))(msg(d - 1), msg(d - 1))

    if depth == 0 or rng.random() < 0.15:
        return Nil()
    r = rng.random()
    if r < 0.25:
        return Output(Name(rng.choice(scope)), msg(1), process(rng, depth - 1, free, bound))
    if r < 0.45:
        x = fresh()
        return Input(Name(rng.choice(scope)), x, process(rng, depth - 1, free, tuple(bound) + (x,)))
    if r < 0.65:
        return Par(process(rng, depth - 1, free, bound), process(rng, depth - 1, free, bound))
    if r < 0.78:
        x = fresh()
        return Restrict(x, process(rng, depth - 1, free, tuple(bound) + (x,)))
    if r < 0.86:
        return Match(msg(1), msg(1), process(rng, depth - 1, free, bound))
    if r < 0.93:
        x, y = fresh(), fresh()
        return Let(x, y, msg(1), process(rng, depth - 1, free, tuple(bound) + (x, y)))
    x = fresh()
    return Case(msg(1), x, msg(0), process(rng, depth - 1, free, tuple(bound) + (x,)))


# -- structural equivalence axioms

def _fn(p):
    return proc_names(p)[0]


def _top_rewrites(p: Process, rng):
    """Structural axioms applicable at the root of ``p``."""
    out = [Par(p, Nil())]
    if isinstance(p, Par):
        out.append(Par(p.right, p.left))
        if isinstance(p.right, Nil):
            out.append(p.left)
        if isinstance(p.left, Par):
            out.append(Par(p.left.left, Par(p.left.right, p.right)))
        if isinstance(p.right, Par):
            out.append(Par(Par(p.left, p.right.left), p.right.right))
        if isinstance(p.left, Restrict) and p.left.binder not in _fn(p.right):
            out.append(Restrict(p.left.binder, Par(p.left.body, p.right)))
    if isinstance(p, Restrict):
        x, body = p.binder, p.body
        if x not in _fn(body):
            out.append(body)
        if isinstance(body, Restrict):
            out.append(Restrict(body.binder, Restrict(x, body.body)))
        if isinstance(body, Par) and x not in _fn(body.right):
            out.append(Par(Restrict(x, body.left), body.right))
        if isinstance(body, Par) and x not in _fn(body.left):
            out.append(Par(body.left, Restrict(x, body.right)))
    if isinstance(p, Nil):
        out.append(Restrict(fresh_ident("w", _fn(p)), Nil()))
    return out


def _positions(p: Process, path=()):
    yield path, p
    for attr in ("cont", "body", "left", "right"):
        child = getattr(p, attr, None)
        if isinstance(child, Process):
            yield from _positions(child, path + (attr,))


def _replace(p: Process, path, new: Process) -> Process:
    if not path:
        return new
    head, rest = path[0], path[1:]
    return dataclasses.replace(p, **{head: _replace(getattr(p, head), rest, new)})


def _alpha(p: Process, rng):
    """Rename the binder at the root of ``p`` (if any) to a fresh name."""
    from spibisim.process import all_names, subst_proc
    if isinstance(p, (Input, Restrict, Case)):
        x = p.binder
        new = fresh_ident(x, set(all_names(p)))
        attr = "cont" if not isinstance(p, Restrict) else "body"
        body = subst_proc(getattr(p, attr), {x: Name(new)})
        return dataclasses.replace(p, binder=new, **{attr: body})
    return None


def struct_variant(rng: random.Random, p: Process, steps: int = 4) -> Process:
    """Apply ``steps`` random structural axioms at random positions."""
    for _ in range(steps):
        spots = list(_positions(p))
        path, sub = rng.choice(spots)
        options = _top_rewrites(sub, rng)
        a = _alpha(sub, rng)
        if a is not None:
            options.append(a)
        p = _replace(p, path, rng.choice(options))
    return p
