"""UAF registration/authentication message formats and channel-binding data."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .errors import (
    BindingMismatch,
    ChallengeMismatch,
    IllegalBindingForVariant,
    MalformedMessage,
    SignatureInvalid,
)
from .terms import Hash, Name, Nonce, PrivateKey, PublicKey, Sig, Tag, Term, Tuple, hsh, tup
from .tls import TlsSession, TlsVariant, exporter

UNBOUND = Tag("unbound")
EXPORTER_LABEL = Tag("uaf")


class BindingMethod(enum.Enum):
    UNBOUND = "nobinding"
    TOKEN_BINDING = "tokenbinding"
    CHANNEL_ID = "channelid"
    SERVER_ENDPOINT = "endpoint"
    SERVER_CERT = "servercert"
    EXPORTER = "exporter"

    @property
    def label(self) -> str:
        return {
            "nobinding": "NoBinding",
            "tokenbinding": "TokenBinding",
            "channelid": "ChannelId",
            "endpoint": "Endpoint",
            "servercert": "ServerCert",
            "exporter": "Exporter",
        }[self.value]

    @property
    def client_side(self) -> bool:
        """Bindings built from a client-held key the server cannot tie to the session."""
        return self in (BindingMethod.TOKEN_BINDING, BindingMethod.CHANNEL_ID)

    def legal_for(self, variant: TlsVariant) -> bool:
        if self is BindingMethod.EXPORTER:
            return variant is TlsVariant.TLS13
        if variant is TlsVariant.TLS13:
            return self is BindingMethod.UNBOUND
        return True


class Protocol(enum.Enum):
    BASELINE = "baseline"
    REGISTRATION = "reg"
    AUTHENTICATION = "auth"


@dataclass(frozen=True)
class ModelId:
    binding: BindingMethod
    tls: TlsVariant
    baseline: bool = False

    def __post_init__(self):
        if self.baseline:
            if self.tls is not TlsVariant.TLS12_RSA:
                raise ValueError("the baseline model only runs over TLS1.2-RSA")
        elif not self.binding.legal_for(self.tls):
            raise IllegalBindingForVariant(f"{self.binding.label} is not modelled over {self.tls.label}")

    @property
    def selector(self) -> str:
        if self.baseline:
            return "baseline-nouaf"
        return f"uaf-{self.binding.value}-{self.tls.value}"

    @property
    def name(self) -> str:
        if self.baseline:
            return "Baseline-NoUAF"
        return f"UAF-{self.binding.label}-{self.tls.label}"

    @property
    def protocols(self) -> tuple[Protocol, ...]:
        if self.baseline:
            return (Protocol.BASELINE,)
        return (Protocol.REGISTRATION, Protocol.AUTHENTICATION)

    def __str__(self):
        return self.name


BASELINE = ModelId(BindingMethod.UNBOUND, TlsVariant.TLS12_RSA, baseline=True)


def _all_models() -> tuple[ModelId, ...]:
    rows = [BASELINE]
    tls12 = (BindingMethod.UNBOUND, BindingMethod.TOKEN_BINDING, BindingMethod.CHANNEL_ID,
             BindingMethod.SERVER_ENDPOINT, BindingMethod.SERVER_CERT)
    for variant in (TlsVariant.TLS12_RSA, TlsVariant.TLS12_DH):
        rows.extend(ModelId(b, variant) for b in tls12)
    rows.append(ModelId(BindingMethod.UNBOUND, TlsVariant.TLS13))
    rows.append(ModelId(BindingMethod.EXPORTER, TlsVariant.TLS13))
    return tuple(rows)


MODELS: tuple[ModelId, ...] = _all_models()
MODELS_BY_SELECTOR = {m.selector: m for m in MODELS}


def model_from_selector(selector: str) -> ModelId:
    try:
        return MODELS_BY_SELECTOR[selector.lower()]
    except KeyError:
        valid = ", ".join(MODELS_BY_SELECTOR)
        raise KeyError(f"unknown model '{selector}'; valid names: {valid}") from None


# ---------------------------------------------------------------------------
# binding data


def make_tls_data(binding: BindingMethod, challenge: Term, session: TlsSession,
                  client_binding_key: str | None = None, ca: str | None = None) -> Term:
    """Channel-binding data the client mixes into the final challenge.

    ``client_binding_key`` names the owner of the long-lived client key pair
    used by token binding and channel ID.
    """
    if not binding.legal_for(session.variant):
        raise IllegalBindingForVariant(f"{binding.label} is not available over {session.variant.label}")
    if ca is not None and session.server_cert.issuer != ca:
        raise ValueError("session certificate was not issued by the expected CA")
    match binding:
        case BindingMethod.UNBOUND:
            return UNBOUND
        case BindingMethod.CHANNEL_ID:
            pub = PublicKey(client_binding_key)
            return hsh(Tag("uaf_channel_id"), challenge, pub, Sig(PrivateKey(client_binding_key), pub))
        case BindingMethod.TOKEN_BINDING:
            pub = PublicKey(client_binding_key)
            return hsh(Tag("uaf_token_binding"), challenge, tup(pub, Sig(PrivateKey(client_binding_key), pub)))
        case BindingMethod.SERVER_ENDPOINT:
            return hsh(Tag("uaf_server_endpoint"), challenge, hsh(session.server_cert.term))
        case BindingMethod.SERVER_CERT:
            return hsh(Tag("uaf_server_cert"), challenge, session.server_cert.term)
        case BindingMethod.EXPORTER:
            return exporter(session, EXPORTER_LABEL, challenge)
    raise AssertionError(binding)


def final_challenge(appid: Name, challenge: Nonce, tls_data: Term) -> Hash:
    return hsh(appid, challenge, tls_data)


def key_handle(authk: PrivateKey, username: Name) -> Hash:
    return hsh(authk, username)


def registration_assertion(attest_key: PrivateKey, aaid: Name, fc: Hash, kpub: PublicKey) -> Sig:
    return Sig(attest_key, tup(aaid, fc, kpub))


def authentication_assertion(authk: PrivateKey, fc: Hash, n: Nonce) -> Sig:
    return Sig(authk, tup(fc, n))


def _client_binding_well_formed(binding: BindingMethod, challenge: Term, tls_data: Term) -> bool:
    match binding, tls_data:
        case BindingMethod.CHANNEL_ID, Hash((Tag("uaf_channel_id"), ch, PublicKey(o), Sig(PrivateKey(o2), PublicKey(o3)))):
            return ch == challenge and o == o2 == o3
        case BindingMethod.TOKEN_BINDING, Hash((Tag("uaf_token_binding"), ch, Tuple((PublicKey(o), Sig(PrivateKey(o2), PublicKey(o3)))))):
            return ch == challenge and o == o2 == o3
    return False


class VerificationPolicy(enum.Enum):
    STRICT = "strict"
    LENIENT = "lenient"


@dataclass(frozen=True)
class ServerView:
    """What the relying party knows when an assertion arrives."""

    protocol: Protocol
    binding: BindingMethod
    session: TlsSession
    appid: Name
    challenge: Nonce
    username: Name | None = None
    attestation_keys: dict = field(default_factory=dict, hash=False)  # aaid id -> attestation key owner
    registered_keys: frozenset = frozenset()  # PublicKey terms accepted for authentication


@dataclass(frozen=True)
class Accepted:
    fc: Hash
    authk: PublicKey
    aaid: Name | None = None
    n: Nonce | None = None
    h: Hash | None = None


def verify_assertion(view: ServerView, received: Term,
                     policy: VerificationPolicy = VerificationPolicy.STRICT) -> Accepted:
    """Check a decrypted registration/authentication response.

    Order: signature, then challenge and appid inside fc, then the binding.
    Raises a ProtocolReject subclass on failure.
    """
    if view.protocol is Protocol.REGISTRATION:
        match received:
            case Tuple((Hash() as h, Name() as aaid, PublicKey() as kpub, fc, Sig() as s)):
                pass
            case _:
                raise MalformedMessage("registration response has the wrong shape")
        owner = view.attestation_keys.get(aaid.id)
        if owner is None or s != registration_assertion(PrivateKey(owner), aaid, fc, kpub):
            raise SignatureInvalid("attestation signature does not verify")
        accepted = Accepted(fc, kpub, aaid=aaid, h=h)
    else:
        match received:
            case Tuple((fc, Nonce() as n, Sig(PrivateKey(owner)) as s)):
                pass
            case _:
                raise MalformedMessage("authentication response has the wrong shape")
        if PublicKey(owner) not in view.registered_keys or s != authentication_assertion(PrivateKey(owner), fc, n):
            raise SignatureInvalid("assertion is not signed by a registered authenticator key")
        accepted = Accepted(fc, PublicKey(owner), n=n)

    # fc travels with its cleartext parameters in UAF, so the server can read its parts.
    match fc:
        case Hash((Name() as appid, challenge, tls_data)):
            pass
        case _:
            raise ChallengeMismatch("final challenge parameters are malformed")
    if challenge != view.challenge:
        raise ChallengeMismatch("final challenge carries a challenge this session did not issue")
    if appid != view.appid:
        raise ChallengeMismatch("final challenge names another appid")

    if policy is VerificationPolicy.LENIENT:
        if not isinstance(tls_data, (Tag, Hash)):
            raise BindingMismatch("binding data is not well formed")
    elif view.binding.client_side:
        # Only well-formedness is checkable: nothing ties the client key to this session.
        if not _client_binding_well_formed(view.binding, challenge, tls_data):
            raise BindingMismatch("client binding data is malformed")
    else:
        expected = make_tls_data(view.binding, view.challenge, view.session)
        if tls_data != expected:
            raise BindingMismatch("binding data does not match this server's channel")

    if view.protocol is Protocol.REGISTRATION:
        if accepted.h != key_handle(PrivateKey(accepted.authk.owner), view.username):
            raise MalformedMessage("key handle does not belong to the registered key and username")
    return accepted
