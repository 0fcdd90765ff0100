import pytest

from conftest import FIXTURES
from spibisim.bisim import (
    CheckConfig, Counterexample, FreshSupply, RelationIllFormed, TracedRelation, TracedTriple,
    VerifiedUpToBound, bounded_distinguisher, check_relation, equiv_subst, fresh_rigid,
    parse_rules, saturate, universal_bitrace, up_to_member, well_formed,
)
from spibisim.formats import load, read_bitrace, read_relation
from spibisim.process import proc_names
from spibisim.syntax import parse_message as M, parse_process as P
from spibisim.terms import EMPTY_SUBST, Rigid, Substitution


def H(*lines):
    return read_bitrace("\n".join(lines))


def R(*triples):
    return TracedRelation([TracedTriple(h, P(p), P(q)) for h, p, q in triples])


def rel(name):
    return load(FIXTURES / name, read_relation)


# -- configuration

def test_parse_rules():
    assert parse_rules("c,s") == {"c", "s"}
    assert parse_rules(["contraction", "eq"]) == {"c", "eq"}
    assert parse_rules("") == frozenset()
    with pytest.raises(ValueError):
        parse_rules("c,zz")


def test_config_validation():
    with pytest.raises(ValueError):
        CheckConfig(-1)
    assert CheckConfig(1, "c,s").up_to_rules == {"c", "s"}


# -- helpers

def test_equiv_subst():
    h = H("o: enc(#a,#k) <-> enc(#b,#k)")
    assert equiv_subst(EMPTY_SUBST, EMPTY_SUBST, h)
    assert equiv_subst(Substitution({"x": M("enc(#a,#k)")}), Substitution({"x": M("enc(#b,#k)")}), h)
    assert not equiv_subst(Substitution({"x": M("#a")}), Substitution({"x": M("#a")}), H())
    assert not equiv_subst(Substitution({"x": M("enc(#a,#k)")}), EMPTY_SUBST, h)


def test_fresh_rigid():
    assert fresh_rigid(FreshSupply({"c0"}), "c") == Rigid("c1")
    assert fresh_rigid(FreshSupply(), "c") == Rigid("c0")
    supply = FreshSupply()
    assert [fresh_rigid(supply, "c") for _ in range(2)] == [Rigid("c0"), Rigid("c1")]
    assert fresh_rigid(FreshSupply({"k"}), "k") == fresh_rigid(FreshSupply({"k"}), "k")


def test_universal_bitrace():
    assert universal_bitrace(["b", "a"]) == H("i: a <-> a", "i: b <-> b")


# -- well-formedness

def test_free_rigid_name_outside_trace_is_ill_formed():
    v = check_relation(R((H("o: #a <-> #a"), "out(#a,#n).0", "0")), CheckConfig(1))
    assert isinstance(v, RelationIllFormed) and v.position == 0
    assert "#n" in v.reason


def test_replication_is_rejected():
    v = check_relation(R((H("o: #a <-> #a"), "!out(#a,#a).0", "0")), CheckConfig(1))
    assert isinstance(v, RelationIllFormed) and "replication" in v.reason


def test_inconsistent_trace_is_ill_formed():
    bad = H("o: #a <-> #a", "o: #b <-> #b", "i: x <-> x",
            "o: enc(x,#k) <-> enc(#a,#k)", "o: enc(#b,#k) <-> enc(x,#k)")
    assert well_formed(R((bad, "0", "0")), CheckConfig(1)) is not None


# -- verdicts

def test_unmatched_output():
    v = check_relation(R((H("o: #a <-> #a", "o: #n <-> #n"), "out(#a,#n).0", "0")), CheckConfig(1))
    assert isinstance(v, Counterexample)
    assert str(v.action) == "out #a" and v.subst.first == EMPTY_SUBST


def test_key_before_input_breaks_the_guard():
    v = check_relation(rel("guard_key_first.rel"), CheckConfig(1))
    assert isinstance(v, Counterexample)
    assert v.subst.first.image("x") == Rigid("a")
    assert v.subst.second.image("x") == Rigid("a")


def test_guard_without_key_verifies():
    assert check_relation(rel("guard.rel"), CheckConfig(1)).holds


def test_key_exchange_needs_up_to():
    r = rel("ex8.rel")
    assert isinstance(check_relation(r, CheckConfig(1, "c,s")), VerifiedUpToBound)
    v = check_relation(r, CheckConfig(1))
    assert isinstance(v, Counterexample) and str(v.action) == "in #a"


def test_verdict_invariant_under_inverse():
    for name in ("ex8.rel", "guard.rel", "guard_key_first.rel", "secret.rel"):
        r = rel(name)
        a = check_relation(r, CheckConfig(1, "c,s"))
        b = check_relation(r.inverse(), CheckConfig(1, "c,s"))
        assert type(a) is type(b), name


def test_determinism():
    r = rel("guard_key_first.rel")
    assert check_relation(r, CheckConfig(1)).describe() == check_relation(r, CheckConfig(1)).describe()
    assert saturate(rel("secret.rel"), CheckConfig(1)).symmetric() == \
        saturate(rel("secret.rel"), CheckConfig(1)).symmetric()


# -- up-to chains

KEY_EX = H("o: #a <-> #a", "i: #a <-> #a", "o: enc(#a,#k) <-> enc(#a,#k)",
           "o: enc(#m, enc(#a,#k)) <-> enc(#m, enc(#a,#k))")


def test_chain_member():
    r = rel("ex8.rel")
    for t in r:
        assert up_to_member(t, r, CheckConfig(1, "c,s")) == ["member"]


def test_chain_contraction():
    r = rel("ex8.rel")
    t4 = list(r)[3]
    target = TracedTriple(t4.trace.extend((M("#a"), M("#a"), "i")), t4.left, t4.right)
    assert up_to_member(target, r, CheckConfig(1, "c,s")) == ["contraction"]
    assert up_to_member(target, r, CheckConfig(1, "s")) is None


def test_chain_substitution_then_contraction():
    r = rel("ex8.rel")
    target = TracedTriple(KEY_EX.extend((M("#a"), M("#a"), "i")),
                          P("out(#m,#a).0"), P("[#a = #a] out(#m,#a).0"))
    assert up_to_member(target, r, CheckConfig(1, "c,s")) == ["substitution", "contraction"]
    assert up_to_member(target, r, CheckConfig(1, "c")) is None
    shorter = TracedTriple(KEY_EX, target.left, target.right)
    assert up_to_member(shorter, r, CheckConfig(1, "s")) == ["substitution"]


def test_chain_respects_budget():
    r = rel("ex8.rel")
    target = TracedTriple(KEY_EX.extend((M("#a"), M("#a"), "i")),
                          P("out(#m,#a).0"), P("[#a = #a] out(#m,#a).0"))
    # the substitution match is terminal; only the contraction counts against the budget
    assert up_to_member(target, r, CheckConfig(1, "c,s", closure_budget=1)) == ["substitution", "contraction"]
    twice = TracedTriple(target.trace.extend((M("#m"), M("#m"), "i")), target.left, target.right)
    assert up_to_member(twice, r, CheckConfig(1, "c,s", closure_budget=1)) is None
    assert up_to_member(twice, r, CheckConfig(1, "c,s", closure_budget=2)) == \
        ["substitution", "contraction", "contraction"]
    with pytest.raises(ValueError):
        CheckConfig(1, "c,s", closure_budget=0)


# -- saturation

def test_saturation_contains_members_and_verifies_bare():
    r = rel("guard.rel")
    full = saturate(r, CheckConfig(1))
    keys = {t.key for t in full}
    assert all(t.key in keys for t in r)
    assert len(full) > len(r)
    assert check_relation(full, CheckConfig(1)).holds


# -- bounded refutation

SOUND_PAIRS = [
    ("out(a,b).0 | in(a,x).0", "in(a,x).0 | out(a,b).0"),
    ("nu k. out(a,b).0", "out(a,b).0"),
    ("[a = a]out(a,b).0", "out(a,b).0"),
    ("let (x,y) = pr(a,b) in out(x,y).0", "out(a,b).0"),
    ("nu k. nu j. out(a,pr(k,j)).0", "nu j. nu k. out(a,pr(k,j)).0"),
]


@pytest.mark.parametrize("left,right", SOUND_PAIRS)
def test_verified_pairs_have_no_distinguisher(left, right):
    p, q = P(left), P(right)
    h = universal_bitrace(sorted(proc_names(p)[0] | proc_names(q)[0]))
    v = check_relation(TracedRelation([TracedTriple(h, p, q)]), CheckConfig(1, "eq,s,c,w,r"))
    assert isinstance(v, VerifiedUpToBound), v.describe()
    assert bounded_distinguisher(p, q, 3) is None


def test_distinguisher_examples():
    observer, barb, trace = bounded_distinguisher(P("out(a,b).0"), P("0"), 1)
    assert observer == P("0") and str(barb) == "out a"
    assert bounded_distinguisher(P("nu x. out(a, enc(b,x)).0"), P("nu x. out(a, enc(c,x)).0"), 3) is None
    p = P("in(a,x).out(x,a).0")
    assert bounded_distinguisher(p, p, 2) is None


def test_distinguisher_finds_payload_difference():
    found = bounded_distinguisher(P("out(a,b).0"), P("out(a,c).0"), 2)
    assert found is not None
    v = check_relation(R((universal_bitrace("abc"), "out(a,b).0", "out(a,c).0")), CheckConfig(1))
    assert isinstance(v, Counterexample)


def test_distinguisher_rejects_rigid_names():
    with pytest.raises(ValueError):
        bounded_distinguisher(P("out(#a,b).0"), P("0"), 1)


def test_parallel_context():
    h = H("o: #a <-> #a", "o: enc(#b,#k) <-> enc(#c,#k)", "o: #b <-> #b", "o: #c <-> #c")
    member = TracedTriple(h, P("out(#a, enc(#b,#k)).0"), P("out(#a, enc(#c,#k)).0"))
    r = TracedRelation([member])
    cfg = CheckConfig(1, "p", parallel_contexts=[(P("out(y,z).0"), ("y", "z"))])

    def target(extra1, extra2):
        return TracedTriple(h, P(f"out(#a, enc(#b,#k)).0 | {extra1}"),
                            P(f"out(#a, enc(#c,#k)).0 | {extra2}"))

    same = target("out(#a,#a).0", "out(#a,#a).0")
    assert up_to_member(same, r, CheckConfig(1)) is None
    assert up_to_member(same, r, cfg) == ["parallel"]
    assert up_to_member(target("out(#a,enc(#b,#k)).0", "out(#a,enc(#c,#k)).0"), r, cfg) == ["parallel"]
    # #b and #c are only related under the unknown key
    assert up_to_member(target("out(#a,#b).0", "out(#a,#c).0"), r, cfg) is None
    with pytest.raises(ValueError):
        CheckConfig(1, "p", parallel_contexts=[(P("out(#a,y).0"), ("y",))])
