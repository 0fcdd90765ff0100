import pytest
from hypothesis import given, settings, strategies as st

from spibisim.bitrace import (
    BiTrace, BiTraceError, IOPair, apply_pair, bitrace_consistent_bounded, bitrace_order,
    compose_bitraces, enumerate_respectful, inverse_bitrace, project, respects,
    underlying_theory, validate_bitrace,
)
from spibisim.formats import read_bitrace
from spibisim.syntax import parse_message as M
from spibisim.terms import EMPTY_PAIR, Substitution, SubstitutionPair, compose_subst, free_names
from spibisim.theory import is_consistent, theory


def H(*lines):
    return read_bitrace("\n".join(lines))


def SP(**kw):
    s = Substitution({k: M(v) for k, v in kw.items()})
    return SubstitutionPair(s, s)


TWO_INPUTS = H("i: x <-> x", "o: #a <-> #a", "i: y <-> y", "o: #b <-> #b")
BAD = H("o: #a <-> #a", "o: #b <-> #b", "i: x <-> x",
        "o: enc(x,#k) <-> enc(#a,#k)", "o: enc(#b,#k) <-> enc(x,#k)")


# -- validation and views

def test_validate():
    assert len(validate_bitrace([])) == 0
    validate_bitrace([IOPair(M("x"), M("x"), "i"), IOPair(M("enc(x,#k)"), M("enc(x,#k)"), "o")])
    with pytest.raises(BiTraceError) as e:
        validate_bitrace([IOPair(M("enc(x,#k)"), M("enc(x,#k)"), "o")])
    assert e.value.position == 0
    with pytest.raises(BiTraceError):
        BiTrace([(M("x"), M("x"), "q")])


def test_theory_inverse_project():
    assert underlying_theory(H("o: #a <-> #b", "i: #a <-> #b")) == theory([(M("#a"), M("#b"))])
    assert inverse_bitrace(H("i: #a <-> #b")) == H("i: #b <-> #a")
    assert project(H("o: #a <-> #b"), 1) == [(M("#a"), "o")]
    assert project(H("o: #a <-> #b"), 2) == [(M("#b"), "o")]
    with pytest.raises(ValueError):
        project(H(), 3)


# -- respectful substitutions

def test_respects_examples():
    assert respects(EMPTY_PAIR, TWO_INPUTS)
    assert respects(SP(y="x"), TWO_INPUTS)
    r = respects(SP(x="#a"), TWO_INPUTS)
    assert not r and (r.position, r.name) == (0, "x")
    assert respects(SP(y="#a"), TWO_INPUTS)


def test_enumerate_examples():
    assert list(enumerate_respectful(H("i: x <-> x"), 0)) == [EMPTY_PAIR]
    assert SP(x="#a") in list(enumerate_respectful(H("o: #a <-> #a", "i: x <-> x"), 0))
    got = list(enumerate_respectful(H("o: #a <-> #a", "i: x <-> x"), 0, {"z"}))
    assert SP(x="z") in got
    with pytest.raises(ValueError):
        list(enumerate_respectful(H(), -1))


def test_enumerate_crosses_sides():
    h = H("o: enc(#a,#k) <-> enc(#b,#k)", "i: x <-> x")
    pairs = {(sp.first.image("x"), sp.second.image("x")) for sp in enumerate_respectful(h, 0)}
    assert (M("enc(#a,#k)"), M("enc(#b,#k)")) in pairs
    assert (M("#a"), M("#b")) not in pairs


def test_enumerate_is_deterministic_and_finite():
    h = H("o: #a <-> #b", "i: x <-> x", "o: pr(x,#a) <-> pr(x,#b)", "i: y <-> y")
    first = list(enumerate_respectful(h, 1))
    assert first == list(enumerate_respectful(h, 1))
    assert len(first) == len(set(first))


TRACES = [
    TWO_INPUTS,
    H("o: #a <-> #b", "i: x <-> x", "o: enc(x,#k) <-> enc(x,#k)"),
    H("o: enc(#a,#k) <-> enc(#b,#k)", "i: x <-> x", "o: #k <-> #k", "i: y <-> y"),
    H("o: pr(#a,#c) <-> pr(#b,#c)", "i: x <-> x", "i: y <-> y"),
]


@pytest.mark.parametrize("h", TRACES, ids=range(len(TRACES)))
def test_enumerated_pairs_are_respectful(h):
    for sp in enumerate_respectful(h, 1):
        assert respects(sp, h), sp


@pytest.mark.parametrize("h", TRACES, ids=range(len(TRACES)))
def test_respectful_pairs_compose(h):
    for sp in enumerate_respectful(h, 0):
        inst = apply_pair(h, sp)
        for sq in enumerate_respectful(inst, 0):
            both = SubstitutionPair(compose_subst(sp.first, sq.first),
                                    compose_subst(sp.second, sq.second))
            assert respects(both, h)


# -- consistency

def test_consistency_examples():
    assert bitrace_consistent_bounded(H(), 1)
    assert bitrace_consistent_bounded(H("i: x <-> x"), 1)
    for d in (0, 1):
        v = bitrace_consistent_bounded(BAD, d)
        assert not v and v.position == 4
        assert v.subst == SP(x="#b")
        assert v.certificate.condition == "c"
    assert not bitrace_consistent_bounded(H("i: #a <-> #a"), 1)


@pytest.mark.parametrize("h", TRACES, ids=range(len(TRACES)))
def test_consistency_closure_properties(h):
    v = bitrace_consistent_bounded(h, 1)
    assert v
    for k in range(len(h)):
        assert bitrace_consistent_bounded(h[:k], 1)
    assert is_consistent(underlying_theory(h))
    n1 = set().union(*(free_names(m)[0] for m, _ in project(h, 1)))
    n2 = set().union(*(free_names(m)[0] for m, _ in project(h, 2)))
    assert n1 == n2
    for sp in enumerate_respectful(h, 1):
        assert bitrace_consistent_bounded(apply_pair(h, sp), 1)


def test_prefix_of_bad_trace_is_consistent():
    assert bitrace_consistent_bounded(BAD[:4], 1)


# -- composition

def test_compose_examples():
    assert compose_bitraces(H("i: #a <-> #b"), H("i: #b <-> #c")) == H("i: #a <-> #c")
    assert compose_bitraces(H("i: #a <-> #b"), H("o: #b <-> #c")) is None
    assert compose_bitraces(H("i: #a <-> #b", "o: #x <-> #y"), H("i: #b <-> #c")) is None


@pytest.mark.parametrize("h", TRACES, ids=range(len(TRACES)))
def test_composition_with_inverse(h):
    back = compose_bitraces(h, inverse_bitrace(h))
    if back is None:
        return
    assert bitrace_consistent_bounded(back, 1)


# -- orders

def test_weakening():
    j = bitrace_order(H("o: #a <-> #a"), H("o: #a <-> #a", "i: #a <-> #a"), "weakening")
    assert j is not None and j.kind == "weakening"
    # removing an entry that introduces a name is not weakening
    assert bitrace_order(H("o: #a <-> #a"), H("o: #a <-> #a", "i: x <-> x"), "weakening") is None
    # rigid names behave as constants here
    assert bitrace_order(H("o: #a <-> #a"), H("o: #a <-> #a", "o: #b <-> #b"), "weakening")


def test_contraction():
    assert bitrace_order(H("o: #a <-> #a", "i: #a <-> #a"), H("o: #a <-> #a"), "contraction")
    assert bitrace_order(H("o: #a <-> #a", "i: #b <-> #b"), H("o: #a <-> #a"), "contraction") is None


def test_flex_rigid():
    j = bitrace_order(H("o: #a <-> #a", "o: #c <-> #c", "o: enc(#c,#a) <-> enc(#c,#a)"),
                      H("o: #a <-> #a", "i: x <-> x", "o: enc(x,#a) <-> enc(x,#a)"), "flexrigid")
    assert j.theta == Substitution({"x": M("#c")})
    # #a already occurs earlier, so it is not fresh
    assert bitrace_order(H("o: #a <-> #a", "o: #a <-> #a"),
                         H("o: #a <-> #a", "i: x <-> x"), "flexrigid") is None


def test_orders_are_reflexive():
    for kind in ("weakening", "contraction", "flexrigid"):
        assert bitrace_order(TWO_INPUTS, TWO_INPUTS, kind) is not None


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from(["#a", "#b", "enc(#a,#k)", "pr(#a,#b)"]), max_size=3))
def test_inverse_is_an_involution(msgs):
    h = H(*[f"o: {m} <-> {m}" for m in msgs], "i: x <-> x")
    assert inverse_bitrace(inverse_bitrace(h)) == h
    assert bool(bitrace_consistent_bounded(h, 0)) == bool(bitrace_consistent_bounded(inverse_bitrace(h), 0))
