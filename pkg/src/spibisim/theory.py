"""Observer theories: proof search, derivations, cut, rewriting, consistency.

A theory is a ``frozenset`` of message pairs.  Proof search saturates the
theory under the left rules (pair and encryption decomposition) and then
tries the right rules goal-directed; every successful search is turned into
an explicit derivation tree that can be rendered and independently checked.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Optional

from .terms import Enc, Message, Name, Pair, Rigid, is_compound

__all__ = [
    "Derivation", "CutError", "theory", "pi1", "pi2", "inverse_theory",
    "prove_equiv", "prove_synth", "derivable", "synthesizable", "equivalents",
    "validate_derivation", "cut", "weaken", "redexes", "reduce_step",
    "normalize", "Consistency", "is_consistent", "is_consistent_oracle",
    "compose_theories", "synthesis_closure",
]


def theory(pairs: Iterable = ()) -> frozenset:
    return frozenset((m, n) for m, n in pairs)


def pi1(gamma) -> frozenset:
    return frozenset(m for m, _ in gamma)


def pi2(gamma) -> frozenset:
    return frozenset(n for _, n in gamma)


def inverse_theory(gamma) -> frozenset:
    return frozenset((n, m) for m, n in gamma)


def pair_key(p):
    return (p[0].key, p[1].key)


def _components(p):
    m, n = p
    return ((m.left, n.left), (m.right, n.right))


def _left_rule(p):
    m, n = p
    if type(m) is Pair and type(n) is Pair:
        return "pl"
    if type(m) is Enc and type(n) is Enc:
        return "el"
    return None


# -- saturation ---------------------------------------------------------------

class _Saturated:
    """Left-rule closure of a theory, with the order in which pairs appeared."""

    __slots__ = ("pairs", "by_left", "by_right", "steps")

    def __init__(self, pairs, steps):
        self.pairs = pairs
        self.by_left = {}
        self.by_right = {}
        for m, n in pairs:
            self.by_left.setdefault(m, set()).add(n)
            self.by_right.setdefault(n, set()).add(m)
        self.steps = steps


def _right(pairs, m, n) -> bool:
    if (m, n) in pairs:
        return True
    if type(m) is not type(n):
        return False
    if type(m) is Name:
        return m == n
    if is_compound(m):
        return _right(pairs, m.left, n.left) and _right(pairs, m.right, n.right)
    return False


@lru_cache(maxsize=1 << 16)
def _saturate(gamma: frozenset) -> _Saturated:
    current = set(gamma)
    steps = []
    changed = True
    while changed:
        changed = False
        for p in sorted(current, key=pair_key):
            rule = _left_rule(p)
            if rule is None:
                continue
            comps = _components(p)
            if all(c in current for c in comps):
                continue
            if rule == "el" and not _right(current, *comps[1]):
                continue
            added = tuple(c for c in comps if c not in current)
            current.update(comps)
            steps.append((rule, p, comps, added))
            changed = True
    return _Saturated(frozenset(current), tuple(steps))


def derivable(gamma, m: Message, n: Message) -> bool:
    """Decide ``gamma |- m <-> n``."""
    return _right(_saturate(theory(gamma)).pairs, m, n)


def _diag(sigma) -> frozenset:
    return frozenset((m, m) for m in sigma)


def synthesizable(sigma, m: Message) -> bool:
    """Decide ``sigma |- m``."""
    return _right(_saturate(_diag(sigma)).pairs, m, m)


def equivalents(gamma, m: Message) -> frozenset:
    """All ``n`` with ``gamma |- m <-> n``."""
    sat = _saturate(theory(gamma))
    return _partners(sat.by_left, m)


def _partners(index, m, memo=None) -> frozenset:
    if memo is not None:
        hit = memo.get(m)
        if hit is not None:
            return hit
    out = set(index.get(m, ()))
    if type(m) is Name:
        out.add(m)
    elif is_compound(m):
        lefts = _partners(index, m.left, memo)
        if lefts:
            rights = _partners(index, m.right, memo)
            out.update(type(m)(a, b) for a in lefts for b in rights)
    out = frozenset(out)
    if memo is not None:
        memo[m] = out
    return out


# -- derivations ----------------------------------------------------------------

@dataclass(frozen=True)
class Derivation:
    """A sequent derivation node.

    ``context`` is a frozenset of message pairs (equivalence sequents) or of
    messages (synthesis sequents); ``goal`` is ``(m, n)`` or ``(m,)``.
    """

    rule: str
    context: frozenset
    goal: tuple
    premises: tuple = ()

    @property
    def is_synth(self) -> bool:
        return len(self.goal) == 1

    def sequent(self) -> str:
        if self.is_synth:
            ctx = ", ".join(str(m) for m in sorted(self.context, key=lambda m: m.key))
            return "{" + ctx + "} |- " + str(self.goal[0])
        ctx = ", ".join(f"{m} <-> {n}" for m, n in sorted(self.context, key=pair_key))
        return "{" + ctx + "} |- " + f"{self.goal[0]} <-> {self.goal[1]}"

    def render(self) -> str:
        if not self.premises:
            return f"{self.rule}({self.sequent()})"
        inner = ", ".join(p.render() for p in self.premises)
        return f"{self.rule}({self.sequent()}; {inner})"

    __str__ = render

    def nodes(self):
        yield self
        for p in self.premises:
            yield from p.nodes()

    def rules(self) -> list:
        return [d.rule for d in self.nodes()]

    def size(self) -> int:
        return sum(1 for _ in self.nodes())


def _right_tree(pairs, m, n):
    if (m, n) in pairs:
        return ("id", (m, n))
    if type(m) is Name and m == n:
        return ("var", (m, n))
    rule = "pr" if type(m) is Pair else "er"
    return (rule, (m, n), _right_tree(pairs, m.left, n.left),
            _right_tree(pairs, m.right, n.right))


def _used(tree, acc):
    if tree[0] == "id":
        acc.add(tree[1])
    for sub in tree[2:]:
        _used(sub, acc)
    return acc


def _materialize(tree, ctx) -> Derivation:
    return Derivation(tree[0], ctx, tree[1],
                      tuple(_materialize(t, ctx) for t in tree[2:]))


def _build(gamma: frozenset, m, n) -> Optional[Derivation]:
    sat = _saturate(gamma)
    if not _right(sat.pairs, m, n):
        return None
    # replay saturation to recover the context in force at each step
    ctx = set(gamma)
    plan = []
    for rule, p, comps, added in sat.steps:
        key_tree = _right_tree(frozenset(ctx), *comps[1]) if rule == "el" else None
        plan.append((rule, p, comps, added, key_tree))
        ctx.update(comps)
    final = _right_tree(sat.pairs, m, n)
    needed = _used(final, set())
    kept = []
    for rule, p, comps, added, key_tree in reversed(plan):
        if needed.intersection(added):
            kept.append((rule, p, comps, key_tree))
            needed.add(p)
            if key_tree is not None:
                _used(key_tree, needed)
    kept.reverse()
    contexts = [frozenset(gamma)]
    for _, _, comps, _ in kept:
        contexts.append(contexts[-1] | frozenset(comps))
    d = _materialize(final, contexts[-1])
    for i in range(len(kept) - 1, -1, -1):
        rule, p, comps, key_tree = kept[i]
        if rule == "pl":
            d = Derivation("pl", contexts[i], (m, n), (d,))
        else:
            d = Derivation("el", contexts[i], (m, n),
                           (_materialize(key_tree, contexts[i]), d))
    return d


def prove_equiv(gamma, m: Message, n: Message) -> Optional[Derivation]:
    """A derivation of ``gamma |- m <-> n``, or ``None`` if there is none."""
    return _build(theory(gamma), m, n)


def _project(d: Derivation) -> Derivation:
    return Derivation(d.rule, frozenset(a for a, _ in d.context), (d.goal[0],),
                      tuple(_project(p) for p in d.premises))


def prove_synth(sigma, m: Message) -> Optional[Derivation]:
    """A derivation of ``sigma |- m``, or ``None``.

    Synthesis is equivalence over the diagonal theory, so the proof is
    found there and projected.
    """
    d = _build(_diag(sigma), m, m)
    return None if d is None else _project(d)


# -- validation -------------------------------------------------------------------

def _as_pair(x, synth):
    return (x, x) if synth else x


def validate_derivation(d: Derivation) -> list:
    """Check every node locally; return a list of problems (empty if valid)."""
    errors = []
    synth = d.is_synth
    for node in d.nodes():
        msg = _check_node(node, synth)
        if msg:
            errors.append(f"{node.rule} at {node.sequent()}: {msg}")
    return errors


def _check_node(node: Derivation, synth: bool) -> Optional[str]:
    if node.is_synth != synth:
        return "mixed sequent kinds"
    ctx = node.context
    goal = node.goal if not synth else (node.goal[0], node.goal[0])
    pairs = frozenset(_as_pair(x, synth) for x in ctx)
    prem = node.premises
    for p in prem:
        if p.is_synth != synth:
            return "mixed sequent kinds"
    m, n = goal
    if node.rule == "var":
        if prem or type(m) is not Name or m != n:
            return "var needs a name on both sides and no premises"
        return None
    if node.rule == "id":
        if prem or (m, n) not in pairs:
            return "goal not in context"
        return None
    if node.rule in ("pr", "er"):
        cls = Pair if node.rule == "pr" else Enc
        if type(m) is not cls or type(n) is not cls or len(prem) != 2:
            return "goal shape does not match"
        want = [(m.left, n.left), (m.right, n.right)]
        for p, w in zip(prem, want):
            if p.context != ctx:
                return "premise context differs"
            got = p.goal if not synth else (p.goal[0], p.goal[0])
            if got != w:
                return "premise goal is not a component"
        return None
    if node.rule in ("pl", "el"):
        main = prem[-1] if prem else None
        if main is None or len(prem) != (1 if node.rule == "pl" else 2):
            return "wrong number of premises"
        if main.goal != node.goal:
            return "goal changed"
        cls = Pair if node.rule == "pl" else Enc
        for q in pairs:
            if type(q[0]) is not cls or type(q[1]) is not cls:
                continue
            comps = _components(q)
            extra = frozenset(x[0] if synth else x for x in comps)
            if main.context != ctx | extra:
                continue
            if node.rule == "pl":
                return None
            key = prem[0]
            kgoal = key.goal if not synth else (key.goal[0], key.goal[0])
            if key.context == ctx and kgoal == comps[1]:
                return None
        return "no principal pair explains the premise"
    return f"unknown rule {node.rule!r}"


# -- cut ----------------------------------------------------------------------------

class CutError(ValueError):
    """Raised when the cut formula of the second derivation does not match."""


def weaken(d: Derivation, extra) -> Derivation:
    """Add ``extra`` to every context of ``d``."""
    extra = frozenset(extra)
    return Derivation(d.rule, d.context | extra, d.goal,
                      tuple(weaken(p, extra) for p in d.premises))


def _drop(d: Derivation, p, comps, live=True) -> Derivation:
    """Remove ``p`` from the contexts of ``d`` and add ``comps``.

    ``comps`` is empty when ``p`` is a name pair ``(x, x)`` (its uses become
    ``var``), otherwise it holds the two components of the compound pair
    ``p``.  ``live`` is False below a left rule that re-introduces ``p``;
    from there on the subtree only needs weakening.
    """
    if not live:
        return weaken(d, comps)
    ctx = (d.context - {p}) | frozenset(comps)
    if d.rule == "id" and d.goal == p:
        if not comps:
            return Derivation("var", ctx, d.goal)
        rule = "pr" if type(p[0]) is Pair else "er"
        return Derivation(rule, ctx, d.goal,
                          tuple(Derivation("id", ctx, c) for c in comps))
    if d.rule in ("pl", "el"):
        main = d.premises[-1]
        principal = _principal(d)
        if principal == p:
            return _drop(main, p, comps, True)
        new_main = _drop(main, p, comps, p not in _components(principal))
        if d.rule == "pl":
            return Derivation("pl", ctx, d.goal, (new_main,))
        key = _drop(d.premises[0], p, comps, True)
        return Derivation("el", ctx, d.goal, (key, new_main))
    return Derivation(d.rule, ctx, d.goal,
                      tuple(_drop(q, p, comps, True) for q in d.premises))


def _principal(d: Derivation):
    cls = Pair if d.rule == "pl" else Enc
    main = d.premises[-1]
    candidates = []
    for q in sorted(d.context, key=pair_key):
        if type(q[0]) is cls and type(q[1]) is cls:
            if main.context == d.context | frozenset(_components(q)):
                if d.rule == "el" and d.premises[0].goal != _components(q)[1]:
                    continue
                candidates.append(q)
    if not candidates:
        raise CutError(f"invalid {d.rule} node")
    return candidates[0]


def cut(d1: Derivation, d2: Derivation, delta=None) -> Derivation:
    """Eliminate the cut between ``d1: G |- M <-> N`` and
    ``d2: D, (M, N) |- R <-> T``, giving ``G, D |- R <-> T``.

    ``delta`` defaults to the context of ``d2`` without ``(M, N)``.
    """
    if d1.is_synth or d2.is_synth:
        raise CutError("cut applies to equivalence derivations")
    pair = d1.goal
    if delta is None:
        if pair not in d2.context:
            raise CutError("cut pair does not occur in the second context")
        delta = d2.context - {pair}
    delta = frozenset(delta)
    if d2.context != delta | {pair}:
        raise CutError("second context is not delta plus the cut pair")
    gamma = d1.context
    if pair in delta:
        return weaken(d2, gamma)
    rule = d1.rule
    if rule == "id":
        return weaken(d2, gamma)
    if rule == "var":
        return weaken(_drop(d2, pair, ()), gamma)
    if rule in ("pl", "el"):
        inner = cut(d1.premises[-1], d2, delta)
        if rule == "pl":
            return Derivation("pl", gamma | delta, d2.goal, (inner,))
        key = weaken(d1.premises[0], delta)
        return Derivation("el", gamma | delta, d2.goal, (key, inner))
    # right rule: split the cut pair into its components
    c1, c2 = d1.premises[0].goal, d1.premises[1].goal
    split = _drop(d2, pair, (c1, c2))
    first = cut(d1.premises[0], split, delta | {c2})
    return cut(d1.premises[1], first, gamma | delta)


# -- rewriting ------------------------------------------------------------------

def redexes(gamma) -> list:
    """Pairs of ``gamma`` that the rewrite relation may decompose, in order."""
    gamma = theory(gamma)
    pairs = _saturate(gamma).pairs
    out = []
    for p in sorted(gamma, key=pair_key):
        rule = _left_rule(p)
        if rule == "pl" or (rule == "el" and _right(pairs, p[0].right, p[1].right)):
            out.append(p)
    return out


def reduce_step(gamma, choose: Callable = None) -> Optional[frozenset]:
    """One rewrite step on the smallest redex (or the one ``choose`` picks)."""
    gamma = theory(gamma)
    found = redexes(gamma)
    if not found:
        return None
    p = found[0] if choose is None else choose(found)
    return (gamma - {p}) | frozenset(_components(p))


@lru_cache(maxsize=1 << 14)
def _normalize(gamma: frozenset) -> frozenset:
    while True:
        nxt = reduce_step(gamma)
        if nxt is None:
            return gamma
        gamma = nxt


def normalize(gamma, choose: Callable = None) -> frozenset:
    """The irreducible form of ``gamma``."""
    gamma = theory(gamma)
    if choose is None:
        return _normalize(gamma)
    while True:
        nxt = reduce_step(gamma, choose)
        if nxt is None:
            return gamma
        gamma = nxt


# -- consistency -------------------------------------------------------------------

@dataclass(frozen=True)
class Consistency:
    """Outcome of a consistency check; truthy when consistent."""

    ok: bool
    normal_form: frozenset
    condition: Optional[str] = None
    witnesses: tuple = ()

    def __bool__(self):
        return self.ok

    def describe(self) -> str:
        if self.ok:
            return "consistent"
        pairs = ", ".join(f"({m}, {n})" for m, n in self.witnesses)
        return f"condition ({self.condition}) violated: {pairs}"


def _kind(m: Message) -> int:
    return 0 if type(m) in (Name, Rigid) else m.key[0]


@lru_cache(maxsize=1 << 15)
def _consistency(gamma: frozenset) -> Consistency:
    nf = _normalize(gamma)
    ordered = sorted(nf, key=pair_key)
    for m, n in ordered:
        if _kind(m) != _kind(n) or ((type(m) is Name or type(n) is Name) and m != n):
            return Consistency(False, nf, "a", ((m, n),))
    left, right = pi1(nf), pi2(nf)
    for m, n in ordered:
        if type(m) is Enc and (synthesizable(left, m.right) or synthesizable(right, n.right)):
            return Consistency(False, nf, "b", ((m, n),))
    seen_l, seen_r = {}, {}
    for m, n in ordered:
        if m in seen_l:
            return Consistency(False, nf, "c", ((m, seen_l[m]), (m, n)))
        if n in seen_r:
            return Consistency(False, nf, "c", ((seen_r[n], n), (m, n)))
        seen_l[m] = n
        seen_r[n] = m
    return Consistency(True, nf)


def is_consistent(gamma) -> Consistency:
    """Decide consistency through the irreducible form."""
    return _consistency(theory(gamma))


def synthesis_closure(base: Iterable, depth: int, full: bool = True) -> list:
    """Messages built from ``base`` by at most ``depth`` layers of pairing and
    encryption.  With ``full=False`` each new layer combines one message of
    the previous layer with one of the base, which keeps the set small.
    """
    base = sorted(set(base), key=lambda m: m.key)
    seen = set(base)
    levels = [base]
    for _ in range(depth):
        prev = levels[-1]
        pool = sorted(seen, key=lambda m: m.key) if full else base
        new = []
        for a in prev:
            for b in pool:
                for cls in (Pair, Enc):
                    for m in (cls(a, b), cls(b, a)):
                        if m not in seen:
                            seen.add(m)
                            new.append(m)
        new.sort(key=lambda m: m.key)
        levels.append(new)
    return [m for level in levels for m in level]


def is_consistent_oracle(gamma, depth: int = 2) -> bool:
    """Brute-force check of the consistency definition on a bounded space.

    Every derivable pair whose left (or right) side lies in the synthesis
    closure of the observable subterms is tested against the three
    conditions.  A composite message is not materialized when neither it nor
    any of its partners occurs inside the saturated theory: its partners then
    come only from its components, which were already tested, so it cannot
    witness a violation (nor can anything built on top of it).
    """
    gamma = theory(gamma)
    inv = inverse_theory(gamma)
    sat_l = _saturate(gamma).by_left
    sat_r = _saturate(inv).by_left
    left, right = pi1(gamma), pi2(gamma)
    names = set()
    for m, n in gamma:
        names |= m._names | n._names

    def base(side):
        subs = {s for m in side for s in m.subterms()}
        subs = {s for s in subs if synthesizable(side, s)}
        return sorted(subs | {Name(x) for x in names}, key=lambda m: m.key)

    def shapes(index):
        return {(type(s), s.left, s.right) for k in index for s in k.subterms() if is_compound(s)}

    memo = ({}, {})
    checked = set()

    def ok(m, n):
        if (m, n) in checked:
            return True
        checked.add((m, n))
        if _kind(m) != _kind(n):
            return False
        if type(m) is Enc:
            if synthesizable(left, m.right) and not derivable(gamma, m.right, n.right):
                return False
            if synthesizable(right, n.right) and not derivable(gamma, m.right, n.right):
                return False
        return _partners(sat_l, m, memo[0]) == {n} and _partners(sat_r, n, memo[1]) == {m}

    def sweep(index, other, here, there, side_base, flip):
        mem = memo[1] if flip else memo[0]

        def test(m):
            for n in _partners(index, m, mem):
                if not (ok(n, m) if flip else ok(m, n)):
                    return False
            return True

        if not all(test(m) for m in side_base):
            return False
        seen = set(side_base)
        prev = side_base
        for _ in range(depth):
            new = []
            for a in prev:
                pa = _partners(index, a, mem)
                for b in side_base:
                    pb = _partners(index, b, mem)
                    for cls in (Pair, Enc):
                        for (l, pl), (r, pr) in (((a, pa), (b, pb)), ((b, pb), (a, pa))):
                            if (cls, l, r) not in here and not any(
                                    (cls, x, y) in there for x in pl for y in pr):
                                continue
                            m = cls(l, r)
                            if m in seen:
                                continue
                            seen.add(m)
                            if not test(m):
                                return False
                            new.append(m)
            prev = new
        return True

    sh_l, sh_r = shapes(sat_l), shapes(sat_r)
    return (sweep(sat_l, sat_r, sh_l, sh_r, base(left), False)
            and sweep(sat_r, sat_l, sh_r, sh_l, base(right), True))


# -- composition ------------------------------------------------------------------

def compose_theories(g1, g2) -> Optional[frozenset]:
    """Compose ``{(M_i, N_i)}`` with ``{(N_i, R_i)}`` into ``{(M_i, R_i)}``."""
    g1, g2 = theory(g1), theory(g2)
    mid1 = [n for _, n in g1]
    mid2 = [n for n, _ in g2]
    if len(set(mid1)) != len(mid1) or len(set(mid2)) != len(mid2):
        return None
    if set(mid1) != set(mid2):
        return None
    right_of = dict(g2)
    return frozenset((m, right_of[n]) for m, n in g1)
