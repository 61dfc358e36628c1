import pytest

from uaf_bindlab.errors import (
    BindingMismatch,
    ChallengeMismatch,
    IllegalBindingForVariant,
    MalformedMessage,
    SignatureInvalid,
)
from uaf_bindlab.roles import World
from uaf_bindlab.terms import (
    DhExponent,
    DhShared,
    Hash,
    Name,
    Nonce,
    PremasterSecret,
    PrivateKey,
    PublicKey,
    Sig,
    Tag,
    hsh,
    tup,
)
from uaf_bindlab.tls import TlsVariant, derive_session, exporter
from uaf_bindlab.uaf import (
    MODELS,
    BindingMethod,
    ModelId,
    Protocol,
    ServerView,
    VerificationPolicy,
    authentication_assertion,
    final_challenge,
    key_handle,
    make_tls_data,
    model_from_selector,
    registration_assertion,
    verify_assertion,
)

W = World()
CH = Nonce("S1.ch")
APPID = Name(W.server)


def _session(variant=TlsVariant.TLS12_DH, subject=W.server):
    cert = W.certificate(subject)
    if variant is TlsVariant.TLS12_RSA:
        secret = PremasterSecret("pms")
    else:
        secret = DhShared(DhExponent("x"), DhExponent("y"))
    return derive_session(variant, Nonce("cr"), Nonce("sr"), secret, cert, subject)


def test_thirteen_models_and_selectors():
    assert len(MODELS) == 13
    assert len({m.selector for m in MODELS}) == 13
    assert model_from_selector("UAF-Exporter-TLS13").name == "UAF-Exporter-TLS1.3"
    with pytest.raises(KeyError):
        model_from_selector("uaf-exporter-tls12-dh")


def test_illegal_model_combination():
    with pytest.raises(IllegalBindingForVariant):
        ModelId(BindingMethod.EXPORTER, TlsVariant.TLS12_DH)
    with pytest.raises(IllegalBindingForVariant):
        ModelId(BindingMethod.SERVER_CERT, TlsVariant.TLS13)


def test_tls_data_shapes():
    s = _session()
    c = W.client_binding_key
    cert = s.server_cert.term
    assert make_tls_data(BindingMethod.UNBOUND, CH, s) == Tag("unbound")
    assert make_tls_data(BindingMethod.SERVER_ENDPOINT, CH, s) == hsh(Tag("uaf_server_endpoint"), CH, hsh(cert))
    assert make_tls_data(BindingMethod.SERVER_CERT, CH, s) == hsh(Tag("uaf_server_cert"), CH, cert)
    sig = Sig(PrivateKey(c), PublicKey(c))
    assert make_tls_data(BindingMethod.CHANNEL_ID, CH, s, c) == hsh(Tag("uaf_channel_id"), CH, PublicKey(c), sig)
    assert make_tls_data(BindingMethod.TOKEN_BINDING, CH, s, c) == hsh(
        Tag("uaf_token_binding"), CH, tup(PublicKey(c), sig)
    )
    s13 = _session(TlsVariant.TLS13)
    assert make_tls_data(BindingMethod.EXPORTER, CH, s13) == exporter(s13, Tag("uaf"), CH)


def test_exporter_binding_illegal_over_tls12():
    with pytest.raises(IllegalBindingForVariant):
        make_tls_data(BindingMethod.EXPORTER, CH, _session(TlsVariant.TLS12_DH))


def test_tls_data_checks_ca():
    with pytest.raises(ValueError):
        make_tls_data(BindingMethod.SERVER_CERT, CH, _session(), ca="other-ca")


def _auth_view(binding=BindingMethod.SERVER_ENDPOINT, variant=TlsVariant.TLS12_DH):
    return ServerView(Protocol.AUTHENTICATION, binding, _session(variant), APPID, CH,
                      registered_keys=W.server_registered_keys)


def _auth_response(tls_data, challenge=CH, authk=W.registered_authk, appid=APPID):
    fc = final_challenge(appid, challenge, tls_data)
    n = Nonce("C1.n")
    return tup(fc, n, authentication_assertion(PrivateKey(authk), fc, n))


def test_endpoint_own_certificate_accepted():
    view = _auth_view()
    data = make_tls_data(BindingMethod.SERVER_ENDPOINT, CH, view.session)
    ok = verify_assertion(view, _auth_response(data))
    assert ok.authk == PublicKey(W.registered_authk)


def test_endpoint_adversary_certificate_rejected():
    view = _auth_view()
    data = make_tls_data(BindingMethod.SERVER_ENDPOINT, CH, _session(subject=W.adversary))
    with pytest.raises(BindingMismatch):
        verify_assertion(view, _auth_response(data))


def test_lenient_accepts_unverifiable_binding():
    view = _auth_view()
    data = make_tls_data(BindingMethod.SERVER_ENDPOINT, CH, _session(subject=W.adversary))
    assert verify_assertion(view, _auth_response(data), VerificationPolicy.LENIENT)


def test_lenient_still_checks_challenge_and_signature():
    view = _auth_view()
    data = make_tls_data(BindingMethod.SERVER_ENDPOINT, CH, view.session)
    with pytest.raises(ChallengeMismatch):
        verify_assertion(view, _auth_response(data, challenge=Nonce("old")), VerificationPolicy.LENIENT)
    with pytest.raises(SignatureInvalid):
        verify_assertion(view, _auth_response(data, authk="mallory.authk"), VerificationPolicy.LENIENT)


def test_stale_challenge_rejected():
    view = _auth_view()
    with pytest.raises(ChallengeMismatch):
        verify_assertion(view, _auth_response(Tag("unbound"), challenge=Nonce("S0.ch")))


def test_wrong_appid_rejected():
    view = _auth_view(BindingMethod.UNBOUND)
    with pytest.raises(ChallengeMismatch):
        verify_assertion(view, _auth_response(Tag("unbound"), appid=Name(W.adversary)))


def test_unregistered_key_rejected():
    view = _auth_view(BindingMethod.UNBOUND)
    with pytest.raises(SignatureInvalid):
        verify_assertion(view, _auth_response(Tag("unbound"), authk="mallory.authk"))


def test_malformed_response_rejected():
    with pytest.raises(MalformedMessage):
        verify_assertion(_auth_view(), tup(CH, CH))


def test_client_side_binding_only_well_formedness_checked():
    view = _auth_view(BindingMethod.TOKEN_BINDING)
    good = make_tls_data(BindingMethod.TOKEN_BINDING, CH, _session(subject=W.adversary), W.client_binding_key)
    assert verify_assertion(view, _auth_response(good))
    bad = hsh(Tag("uaf_token_binding"), Nonce("other"), tup(PublicKey("k"), Sig(PrivateKey("k"), PublicKey("k"))))
    with pytest.raises(BindingMismatch):
        verify_assertion(view, _auth_response(bad))


def _reg_view(binding=BindingMethod.SERVER_CERT, subject=W.server):
    return ServerView(Protocol.REGISTRATION, binding, _session(subject=subject), APPID, CH, Name("S1.user"),
                      attestation_keys=W.attestation_keys)


def _reg_response(view, tls_data, attest=W.attestation_key, user=None):
    authk = PrivateKey("C1.authk")
    kpub = PublicKey(authk.owner)
    fc = final_challenge(APPID, CH, tls_data)
    aaid = Name(W.aaid)
    h = key_handle(authk, user or view.username)
    return tup(h, aaid, kpub, fc, registration_assertion(PrivateKey(attest), aaid, fc, kpub))


def test_registration_servercert_recomputes_own_cert():
    view = _reg_view()
    data = make_tls_data(BindingMethod.SERVER_CERT, CH, view.session)
    ok = verify_assertion(view, _reg_response(view, data))
    assert isinstance(ok.fc, Hash) and ok.aaid == Name(W.aaid)


def test_registration_foreign_cert_rejected():
    view = _reg_view()
    data = make_tls_data(BindingMethod.SERVER_CERT, CH, _session(subject=W.adversary))
    with pytest.raises(BindingMismatch):
        verify_assertion(view, _reg_response(view, data))


def test_registration_bad_attestation_rejected():
    view = _reg_view(BindingMethod.UNBOUND)
    with pytest.raises(SignatureInvalid):
        verify_assertion(view, _reg_response(view, Tag("unbound"), attest=W.adversary))


def test_registration_key_handle_checked():
    view = _reg_view(BindingMethod.UNBOUND)
    with pytest.raises(MalformedMessage):
        verify_assertion(view, _reg_response(view, Tag("unbound"), user=Name("bob")))
