"""Property-based checks over generated messages, substitutions and theories."""
import random

from hypothesis import given, settings, strategies as st

import gen
from spibisim.process import alpha_key, proc_names, subst_proc
from spibisim.syntax import parse_message
from spibisim.terms import Name, Rigid, Enc, Pair, Substitution, apply_subst, compose_subst
from spibisim.theory import (
    derivable, inverse_theory, is_consistent, normalize, prove_equiv, validate_derivation,
)

atoms = st.sampled_from([Name("x"), Name("y"), Name("z"), Rigid("a"), Rigid("k")])
messages = st.recursive(
    atoms,
    lambda inner: st.builds(Pair, inner, inner) | st.builds(Enc, inner, inner),
    max_leaves=6,
)
substs = st.dictionaries(st.sampled_from("xyz"), messages, max_size=3).map(Substitution)
seeds = st.integers(0, 2**32)


@given(messages)
def test_message_print_parse(m):
    assert parse_message(str(m)) == m


@given(messages, substs, substs)
def test_substitution_composition(m, t, s):
    assert apply_subst(m, compose_subst(t, s)) == apply_subst(apply_subst(m, t), s)


@given(messages, substs)
def test_substitution_preserves_rigids(m, s):
    assert m._rigids <= apply_subst(m, s)._rigids


@settings(max_examples=80, deadline=None)
@given(seeds)
def test_normalize_is_idempotent(seed):
    g = gen.random_theory(random.Random(seed), 4, 3)
    nf = normalize(g)
    assert normalize(nf) == nf


@settings(max_examples=80, deadline=None)
@given(seeds)
def test_inverse_involution_and_consistency(seed):
    g = gen.random_theory(random.Random(seed), 4, 2)
    assert inverse_theory(inverse_theory(g)) == g
    assert bool(is_consistent(g)) == bool(is_consistent(inverse_theory(g)))


@settings(max_examples=80, deadline=None)
@given(seeds)
def test_found_derivations_validate(seed):
    rng = random.Random(seed)
    g = gen.random_theory(rng, 4, 3)
    m, n = gen.derivable_pair(rng, g, 3)
    d = prove_equiv(g, m, n)
    assert d is not None and not validate_derivation(d)
    assert derivable(inverse_theory(g), n, m)


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_alpha_key_ignores_bound_names(seed):
    rng = random.Random(seed)
    p = gen.process(rng, 4)
    for path, sub in gen._positions(p):
        q = gen._alpha(sub, rng)
        if q is not None:
            assert alpha_key(gen._replace(p, path, q)) == alpha_key(p)
    # renaming a free name is visible
    for x in proc_names(p)[0]:
        assert alpha_key(subst_proc(p, {x: Rigid("zz")})) != alpha_key(p)
