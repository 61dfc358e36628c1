import pytest

from oracle import oracle_derivable
from uaf_bindlab.errors import AuthFailed, NotDerivable, SecrecyViolation
from uaf_bindlab.knowledge import derivable
from uaf_bindlab.network import Execution, Network, replay
from uaf_bindlab.protocols import handshake, run_authentication, run_baseline, run_honest, run_registration
from uaf_bindlab.roles import ROLE_HEIGHTS, Role, World, roles_for
from uaf_bindlab.scenarios import builtin_scenarios, run_for_protocol
from uaf_bindlab.terms import Nonce, SymEnc, SymKey, Tag, tup
from uaf_bindlab.uaf import BASELINE, MODELS, BindingMethod, ModelId, Protocol
from uaf_bindlab.tls import TlsVariant

W = World()
UAF_MODELS = [m for m in MODELS if not m.baseline]


def test_baseline_honest_run_completes():
    b = run_baseline()
    c, s = b.strand("C1"), b.strand("S1")
    assert c.done and s.done
    # application heights are two on each side, after the TLS steps
    assert c.height == ROLE_HEIGHTS[Role.CLIENT, TlsVariant.TLS12_RSA]
    assert s.height == ROLE_HEIGHTS[Role.SERVER, TlsVariant.TLS12_RSA]
    assert not derivable(b.adversary_kb, W.password)


def test_baseline_password_leaks_to_adversary_server():
    run = run_for_protocol(builtin_scenarios()["baseline-replay"], BASELINE, Protocol.BASELINE)
    kb = run.network.kb
    assert W.password in kb.terms
    assert oracle_derivable(kb.terms, W.password)


def test_baseline_tampered_ciphertext_rejected():
    net = Network(W, BASELINE)
    net.spawn(Role.CLIENT, "C1", W.server)
    net.spawn(Role.SERVER, "S1")
    handshake(net, "C1", "S1")
    forged = SymEnc(SymKey(Tag("guess")), tup(Tag("x"), Tag("y")))
    s = net.deliver("S1", forged)
    assert s.status == "halted" and s.reason == AuthFailed.reason


@pytest.mark.parametrize("model", UAF_MODELS, ids=lambda m: m.selector)
def test_registration_honest_fc_agrees(model):
    b = run_registration(model)
    c, s = b.strand("C1"), b.strand("S1")
    assert c.done and s.done
    assert c.var("fc") == s.var("fc") is not None
    assert c.var("authk") == s.var("authk")


@pytest.mark.parametrize("model", UAF_MODELS, ids=lambda m: m.selector)
def test_authentication_honest_accepts(model):
    b = run_authentication(model)
    assert b.strand("S1").done
    assert b.strand("S1").var("authk") == b.strand("C1").var("authk")


def test_honest_run_kb_never_holds_secret_keys():
    for model in MODELS:
        for p in model.protocols:
            kb = run_honest(model, p).adversary_kb
            for key in W.secret_keys:
                assert key not in kb.terms


def test_deliver_requires_derivable_term():
    ex = Execution.begin(W, ModelId(BindingMethod.UNBOUND, TlsVariant.TLS12_DH))
    ex = ex.spawn(Role.SERVER_AUTH, "S1")
    with pytest.raises(NotDerivable):
        ex.deliver("S1", tup(Tag("client_hello"), Nonce("C9.cr"), Tag("x")))


def test_replay_rebuilds_execution():
    b = run_authentication(ModelId(BindingMethod.SERVER_CERT, TlsVariant.TLS12_RSA))
    ex = replay(W, b.model, b.actions)
    assert ex.bundle().events == b.events
    assert ex.kb.terms == b.adversary_kb.terms


def test_leak_marks_compromise():
    net = Network(W, ModelId(BindingMethod.UNBOUND, TlsVariant.TLS12_RSA))
    croles, sroles = roles_for(Protocol.AUTHENTICATION)
    net.spawn(croles, "C1", W.server)
    net.spawn(sroles, "S1")
    cs, _ = handshake(net, "C1", "S1")
    assert not derivable(net.kb, cs.cwk)
    net.leak("C1")
    assert "C1" in net.bundle().compromised
    assert derivable(net.kb, cs.cwk)


def test_leak_requires_premaster_secret():
    net = Network(W, ModelId(BindingMethod.UNBOUND, TlsVariant.TLS12_DH))
    net.spawn(Role.CLIENT_TLS, "C1", W.server)
    with pytest.raises(ValueError):
        net.leak("C1")


def test_secret_key_in_message_is_a_hard_error():
    ex = Execution.begin(W, BASELINE)
    with pytest.raises(SecrecyViolation):
        ex.kb.add(W.secret_keys[0])
