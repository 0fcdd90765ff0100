"""Messages, substitutions and free-name bookkeeping.

Messages are immutable trees built from names, rigid names, pairs and
encryptions.  Hashes and free-name sets are cached on construction since
messages are used heavily as dictionary keys by the prover.
"""
from __future__ import annotations

import re
from typing import Iterable, Mapping

IDENT = re.compile(r"[a-zA-Z][a-zA-Z0-9_]*\Z")

_EMPTY = frozenset()


class Message:
    __slots__ = ("_hash", "_names", "_rigids", "_key", "_size")

    def subterms(self):
        """Yield every subterm, including the message itself."""
        yield self

    def __lt__(self, other):
        return self.key < other.key

    @property
    def key(self):
        return self._key

    @property
    def size(self):
        return self._size

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"<{type(self).__name__} {self}>"


class _Atom(Message):
    __slots__ = ("ident",)
    _tag = -1

    def __init__(self, ident: str):
        if not isinstance(ident, str) or not IDENT.match(ident):
            raise ValueError(f"bad identifier {ident!r}")
        self.ident = ident
        self._hash = hash((self._tag, ident))
        self._key = (self._tag, ident)
        self._size = 1

    def __eq__(self, other):
        return type(other) is type(self) and other.ident == self.ident

    def __ne__(self, other):
        return not self.__eq__(other)

    __hash__ = Message.__hash__

    def __reduce__(self):
        return (type(self), (self.ident,))


class Name(_Atom):
    """A name: may be instantiated by substitutions and bound by binders."""

    __slots__ = ()
    _tag = 0

    def __init__(self, ident):
        super().__init__(ident)
        self._names = frozenset((ident,))
        self._rigids = _EMPTY

    def __str__(self):
        return self.ident


class Rigid(_Atom):
    """A rigid name (written ``#a``); never in the domain of a substitution."""

    __slots__ = ()
    _tag = 1

    def __init__(self, ident):
        super().__init__(ident)
        self._names = _EMPTY
        self._rigids = frozenset((ident,))

    def __str__(self):
        return "#" + self.ident


class _Binary(Message):
    __slots__ = ("left", "right")
    _tag = -1
    _label = ""

    def __init__(self, left: Message, right: Message):
        if not isinstance(left, Message) or not isinstance(right, Message):
            raise TypeError("message components must be messages")
        self.left = left
        self.right = right
        self._hash = hash((self._tag, left._hash, right._hash))
        self._key = (self._tag, left._key, right._key)
        self._names = left._names | right._names
        self._rigids = left._rigids | right._rigids
        self._size = 1 + left._size + right._size

    def __eq__(self, other):
        if self is other:
            return True
        return (type(other) is type(self) and other._hash == self._hash
                and other.left == self.left and other.right == self.right)

    def __ne__(self, other):
        return not self.__eq__(other)

    __hash__ = Message.__hash__

    def subterms(self):
        yield self
        yield from self.left.subterms()
        yield from self.right.subterms()

    def __str__(self):
        return f"{self._label}({self.left},{self.right})"

    def __reduce__(self):
        return (type(self), (self.left, self.right))


class Pair(_Binary):
    __slots__ = ()
    _tag = 2
    _label = "pr"


class Enc(_Binary):
    """``enc(body, key)``: the body encrypted under the key."""

    __slots__ = ()
    _tag = 3
    _label = "enc"


def is_compound(m: Message) -> bool:
    return isinstance(m, _Binary)


def same_constructor(m: Message, n: Message) -> bool:
    return type(m) is type(n)


def rebuild(m: _Binary, left: Message, right: Message) -> Message:
    return type(m)(left, right)


class Substitution(Mapping):
    """A finite map from name identifiers to messages.

    Identity bindings are dropped on construction, so the domain is exactly
    the set of names moved by the substitution.  Application is simultaneous.
    """

    __slots__ = ("_map", "_hash")

    def __init__(self, bindings=None):
        items = {}
        for k, v in dict(bindings or {}).items():
            if isinstance(k, Name):
                k = k.ident
            if not isinstance(k, str) or not IDENT.match(k):
                raise ValueError(f"substitution domain must hold names, got {k!r}")
            if not isinstance(v, Message):
                raise TypeError("substitution range must hold messages")
            if v != Name(k):
                items[k] = v
        self._map = items
        self._hash = None

    def __getitem__(self, k):
        return self._map[k]

    def __iter__(self):
        return iter(sorted(self._map))

    def __len__(self):
        return len(self._map)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._map.items()))
        return self._hash

    def __eq__(self, other):
        if isinstance(other, Substitution):
            return self._map == other._map
        return NotImplemented

    def __str__(self):
        if not self._map:
            return "[]"
        return "[" + ", ".join(f"{k} -> {self._map[k]}" for k in self) + "]"

    __repr__ = __str__

    def image(self, x: str) -> Message:
        return self._map.get(x) or Name(x)

    def range_names(self) -> frozenset:
        out = set()
        for v in self._map.values():
            out |= v._names
        return frozenset(out)

    def without(self, names: Iterable[str]) -> "Substitution":
        drop = set(names)
        if not drop & self._map.keys():
            return self
        return Substitution({k: v for k, v in self._map.items() if k not in drop})

    def __call__(self, m: Message) -> Message:
        return apply_subst(m, self)


EMPTY_SUBST = Substitution()


def apply_subst(m: Message, s: Substitution) -> Message:
    """Replace every name of ``m`` in the domain of ``s``, simultaneously."""
    if not s or not (m._names & s._map.keys()):
        return m
    return _apply(m, s._map)


def _apply(m, table):
    if type(m) is Name:
        return table.get(m.ident, m)
    if type(m) is Rigid or not (m._names & table.keys()):
        return m
    return type(m)(_apply(m.left, table), _apply(m.right, table))


def compose_subst(t: Substitution, s: Substitution) -> Substitution:
    """The substitution ``t`` followed by ``s``: M(t∘s) = (Mt)s."""
    out = {k: apply_subst(v, s) for k, v in t._map.items()}
    for k, v in s._map.items():
        out.setdefault(k, v)
    return Substitution(out)


def restrict(s: Substitution, v: Iterable) -> Substitution:
    keep = {x.ident if isinstance(x, Name) else x for x in v}
    return Substitution({k: val for k, val in s._map.items() if k in keep})


class SubstitutionPair(tuple):
    """Pair of substitutions applied to the two sides of a bi-trace."""

    __slots__ = ()

    def __new__(cls, first=EMPTY_SUBST, second=EMPTY_SUBST):
        return super().__new__(cls, (first, second))

    @property
    def first(self):
        return self[0]

    @property
    def second(self):
        return self[1]

    def __str__(self):
        return f"({self[0]}, {self[1]})"

    def compose(self, other: "SubstitutionPair") -> "SubstitutionPair":
        return SubstitutionPair(compose_subst(self[0], other[0]),
                                compose_subst(self[1], other[1]))


EMPTY_PAIR = SubstitutionPair()


def free_names(e) -> tuple[frozenset, frozenset]:
    """Return ``(names, rigid_names)`` occurring free in ``e``.

    ``e`` may be a message, anything with a ``free_names`` method (processes,
    agents, bi-traces) or an iterable of message pairs (a theory).
    """
    if isinstance(e, Message):
        return e._names, e._rigids
    method = getattr(e, "free_names", None)
    if method is not None:
        return method()
    names, rigids = set(), set()
    for item in e:
        if isinstance(item, tuple):
            for m in item:
                if isinstance(m, Message):
                    names |= m._names
                    rigids |= m._rigids
        else:
            n, r = free_names(item)
            names |= n
            rigids |= r
    return frozenset(names), frozenset(rigids)


def names_of(*items) -> frozenset:
    out = set()
    for it in items:
        out |= free_names(it)[0]
    return frozenset(out)


def rigids_of(*items) -> frozenset:
    out = set()
    for it in items:
        out |= free_names(it)[1]
    return frozenset(out)


def is_pure(e) -> bool:
    return not free_names(e)[1]


def fresh_ident(base: str, avoid) -> str:
    """Smallest ``stem<k>`` not in ``avoid``, where stem drops trailing digits."""
    stem = base.rstrip("0123456789") or base
    k = 0
    while f"{stem}{k}" in avoid:
        k += 1
    return f"{stem}{k}"
