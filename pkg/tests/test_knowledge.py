import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracle import closure, oracle_derivable
from uaf_bindlab.errors import SecrecyViolation
from uaf_bindlab.knowledge import (
    KnowledgeBase,
    Origination,
    OriginationAssumption,
    derivable,
    explain,
    non_orig,
    saturate,
)
from uaf_bindlab.terms import (
    AsymEnc,
    DhExponent,
    DhPublic,
    DhShared,
    Hash,
    Name,
    Nonce,
    PremasterSecret,
    PrivateKey,
    PublicKey,
    Sig,
    SymEnc,
    SymKey,
    Tag,
    hsh,
    tup,
)

k = SymKey(Nonce("kd"))
m = Nonce("m")
c = Nonce("c")
x, y = DhExponent("x"), DhExponent("y")


def kb(*terms, assumptions=frozenset()):
    return KnowledgeBase(frozenset(terms), frozenset(assumptions))


def test_decrypt_with_known_key():
    assert m in saturate(kb(SymEnc(k, m), k))


def test_no_decrypt_without_key():
    assert m not in saturate(kb(SymEnc(k, m)))
    assert not derivable(kb(SymEnc(k, m)), m)


def test_decrypt_with_derivable_key():
    # the key is composed from known parts, not present verbatim
    assert m in saturate(kb(SymEnc(k, m), Nonce("kd")))


def test_decrypt_unlocked_later():
    base = saturate(kb(SymEnc(k, m)))
    assert m in base.add(Nonce("kd")).terms


def test_asym_decrypt_needs_private_key():
    ct = AsymEnc(PublicKey("s"), m)
    assert m not in saturate(kb(ct, PublicKey("s")))
    assert m in saturate(kb(ct, PrivateKey("s")))


def test_dh_completion():
    assert DhShared(x, y) in saturate(kb(x, DhPublic(y)))
    assert DhShared(y, x) in saturate(kb(DhPublic(x), y))
    assert DhShared(x, y) not in saturate(kb(DhPublic(x), DhPublic(y)))


def test_signature_payload_extraction():
    assert m in saturate(kb(Sig(PrivateKey("s"), m)))


def test_tuple_split():
    assert {m, c} <= saturate(kb(tup(m, c))).terms


def test_compose_asym_from_parts():
    assert derivable(kb(c, PublicKey("s")), AsymEnc(PublicKey("s"), c))


def test_fresh_atom_not_guessable():
    assert not derivable(kb(), Nonce("challenge-1"))


def test_names_and_tags_public():
    assert derivable(kb(), Name("server"))
    assert derivable(kb(), hsh(Tag("t"), Name("n")))


def test_public_key_not_automatically_known():
    assert not derivable(kb(), PublicKey("s"))


def test_hash_not_invertible_matches_oracle():
    h = Hash((c,))
    assert not derivable(kb(h), c)
    assert not oracle_derivable({h}, c)
    # the oracle closes over everything reachable and still never yields c
    assert c not in closure({h}, [c, h, tup(c, c)])


def test_saturate_idempotent_and_monotone():
    base = kb(tup(SymEnc(k, m), Nonce("kd")), Sig(PrivateKey("a"), x), DhPublic(y))
    s1 = saturate(base)
    assert base.terms <= s1.terms
    assert saturate(s1).terms == s1.terms
    assert saturate(kb(*s1.terms)).terms == s1.terms


def test_non_originating_insert_raises():
    with pytest.raises(SecrecyViolation):
        saturate(kb(Sig(PrivateKey("s"), PrivateKey("ca")), assumptions=non_orig(PrivateKey("ca"))))


def test_non_originating_reached_by_add_raises():
    base = saturate(kb(SymEnc(k, PrivateKey("ca")), assumptions=non_orig(PrivateKey("ca"))))
    with pytest.raises(SecrecyViolation):
        base.add(Nonce("kd"))


def test_assumption_subject_kinds():
    OriginationAssumption(Origination.NON_ORIGINATING, PrivateKey("ca"))
    OriginationAssumption(Origination.UNIQUELY_ORIGINATING, PremasterSecret("p"))
    with pytest.raises(ValueError):
        OriginationAssumption(Origination.NON_ORIGINATING, Nonce("n"))
    with pytest.raises(ValueError):
        OriginationAssumption(Origination.UNIQUELY_GENERATED, PrivateKey("a"))


def test_explain_tree():
    base = kb(SymEnc(k, m), Nonce("kd"))
    tree = explain(base, tup(m, Name("a")))
    text = tree.render()
    assert "decrypt" in text and "public" in text
    assert explain(kb(), m) is None


# ---------------------------------------------------------------------------
# properties

atoms = st.sampled_from([m, c, Nonce("kd"), x, y, PrivateKey("a"), PublicKey("a"), Name("n"), Tag("t")])


def _terms(children):
    return st.one_of(
        st.builds(lambda a, b: tup(a, b), children, children),
        st.builds(lambda a: hsh(a), children),
        st.builds(SymEnc, st.one_of(st.just(k), children), children),
        st.builds(lambda p: AsymEnc(PublicKey("a"), p), children),
        st.builds(lambda p: Sig(PrivateKey("a"), p), children),
        st.builds(DhPublic, st.sampled_from([x, y])),
    )


terms = st.recursive(atoms, _terms, max_leaves=6)
kbs = st.frozensets(terms, max_size=5)


@settings(max_examples=150, deadline=None)
@given(kbs)
def test_prop_saturation_monotone_idempotent(ts):
    s = saturate(KnowledgeBase(ts))
    assert ts <= s.terms
    assert saturate(KnowledgeBase(s.terms)).terms == s.terms


@settings(max_examples=150, deadline=None)
@given(kbs, kbs, terms)
def test_prop_derivable_monotone(a, b, t):
    if derivable(KnowledgeBase(a), t):
        assert derivable(KnowledgeBase(a | b), t)


@settings(max_examples=150, deadline=None)
@given(kbs, terms)
def test_prop_agrees_with_oracle(ts, t):
    assert derivable(KnowledgeBase(ts), t) == oracle_derivable(ts, t)


@settings(max_examples=100, deadline=None)
@given(kbs, st.lists(terms, min_size=1, max_size=3))
def test_prop_incremental_add_matches_batch(ts, extra):
    inc = saturate(KnowledgeBase(ts)).add(*extra)
    batch = saturate(KnowledgeBase(ts | frozenset(extra)))
    assert inc.terms == batch.terms
