"""Abstract TLS 1.2-RSA, TLS 1.2-DH and TLS 1.3 handshakes.

Only the message pattern that matters for channel binding is modelled:
hello exchange with randoms and the server certificate, then key transport
(RSA) or an ephemeral DH exchange whose server share is signed. TLS 1.2 has
no Finished MACs; the first application message under the write keys plays
that role. The TLS 1.3 server flight ends with a Finished MAC over the
transcript, certificate included, because without it a server could be made
to share keys with a client that believes it is talking to someone else.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .errors import CertificateRejected, MalformedMessage, UnsupportedVariant
from .terms import (
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
    SymKey,
    Tag,
    Term,
    Tuple,
    hsh,
    tup,
)

CLIENT_HELLO = Tag("client_hello")
SERVER_HELLO = Tag("server_hello")
CLIENT_KEY_EXCHANGE = Tag("client_key_exchange")
SERVER_KEY_EXCHANGE = Tag("server_key_exchange")
CERTIFICATE_VERIFY = Tag("certificate_verify")
CERT = Tag("cert")
SERVER_FINISHED = Tag("server_finished")


class TlsVariant(enum.Enum):
    TLS12_RSA = "tls12-rsa"
    TLS12_DH = "tls12-dh"
    TLS13 = "tls13"

    @property
    def uses_dh(self) -> bool:
        return self is not TlsVariant.TLS12_RSA

    @property
    def has_key_exchange_message(self) -> bool:
        """TLS 1.2 ends the handshake with a client key exchange; TLS 1.3 does not."""
        return self is not TlsVariant.TLS13

    @property
    def label(self) -> str:
        return {"tls12-rsa": "TLS1.2-RSA", "tls12-dh": "TLS1.2-DH", "tls13": "TLS1.3"}[self.value]


@dataclass(frozen=True)
class Certificate:
    subject: str
    issuer: str

    @property
    def key(self) -> PublicKey:
        return PublicKey(self.subject)

    @property
    def term(self) -> Sig:
        return Sig(PrivateKey(self.issuer), tup(CERT, Name(self.subject), PublicKey(self.subject), Name(self.issuer)))

    @classmethod
    def from_term(cls, t: Term) -> Certificate | None:
        """Decode a certificate term; None if it is not well formed or the signature does not verify."""
        match t:
            case Sig(PrivateKey(signer), Tuple((Tag("cert"), Name(subject), PublicKey(owner), Name(issuer)))):
                if signer == issuer and owner == subject:
                    return cls(subject, issuer)
        return None


@dataclass(frozen=True)
class TlsSession:
    variant: TlsVariant
    cr: Nonce
    sr: Nonce
    secret: Term  # PremasterSecret or DhShared
    ms: Hash
    cwk: SymKey
    swk: SymKey
    server_cert: Certificate
    peer_believed: str | None
    # DH only: the exponent this endpoint holds and the peer's public share.
    own_exponent: DhExponent | None = None
    peer_public: DhPublic | None = None


def master_secret(variant: TlsVariant, secret: Term, cr: Nonce, sr: Nonce) -> Hash:
    if variant.uses_dh != isinstance(secret, DhShared):
        raise UnsupportedVariant(f"{variant.label} cannot use secret {secret!r}")
    return hsh(Tag("ms"), secret, cr, sr)


def write_keys(ms: Term) -> tuple[SymKey, SymKey]:
    return SymKey(hsh(Tag("cwk"), ms)), SymKey(hsh(Tag("swk"), ms))


def derive_session(
    variant: TlsVariant,
    cr: Nonce,
    sr: Nonce,
    secret: Term,
    server_cert: Certificate,
    peer_believed: str | None,
    own_exponent: DhExponent | None = None,
    peer_public: DhPublic | None = None,
) -> TlsSession:
    ms = master_secret(variant, secret, cr, sr)
    cwk, swk = write_keys(ms)
    return TlsSession(variant, cr, sr, secret, ms, cwk, swk, server_cert, peer_believed, own_exponent, peer_public)


def exporter(session: TlsSession, label: Tag, context: Term) -> Hash:
    """Keying-material exporter, approximated by a hash over the session secrets."""
    if session.variant is not TlsVariant.TLS13:
        raise UnsupportedVariant(f"exporter binding is only modelled for TLS1.3, not {session.variant.label}")
    return hsh(session.ms, label, session.cr, session.sr, context)


# ---------------------------------------------------------------------------
# handshake messages


def client_hello(variant: TlsVariant, cr: Nonce, peer: str, x: DhExponent | None = None) -> Tuple:
    if variant is TlsVariant.TLS13:
        return tup(CLIENT_HELLO, cr, DhPublic(x), Name(peer))
    return tup(CLIENT_HELLO, cr, Name(peer))


def read_client_hello(variant: TlsVariant, msg: Term, server: str) -> tuple[Nonce, DhPublic | None]:
    match variant, msg:
        case TlsVariant.TLS13, Tuple((Tag("client_hello"), Nonce() as cr, DhPublic() as gx, Name(peer))):
            pass
        case (TlsVariant.TLS12_RSA | TlsVariant.TLS12_DH), Tuple((Tag("client_hello"), Nonce() as cr, Name(peer))):
            gx = None
        case _:
            raise MalformedMessage("not a client hello")
    if peer != server:
        raise MalformedMessage(f"client hello addressed to {peer}, not {server}")
    return cr, gx


def dh_transcript(variant: TlsVariant, cr: Nonce, sr: Nonce, gx: DhPublic | None, gy: DhPublic) -> Tuple:
    if variant is TlsVariant.TLS13:
        return tup(CERTIFICATE_VERIFY, cr, sr, gx, gy)
    return tup(SERVER_KEY_EXCHANGE, cr, sr, gy)


def server_finished(ms: Term, cr: Nonce, sr: Nonce, gx: DhPublic, gy: DhPublic, cert_term: Term) -> Hash:
    """TLS 1.3 server Finished: a MAC keyed by the handshake secret over the transcript."""
    return hsh(SERVER_FINISHED, ms, cr, sr, gx, gy, cert_term)


def server_hello(
    variant: TlsVariant,
    sr: Nonce,
    cert: Certificate,
    cr: Nonce,
    y: DhExponent | None = None,
    gx: DhPublic | None = None,
) -> Tuple:
    if not variant.uses_dh:
        return tup(SERVER_HELLO, sr, cert.term)
    gy = DhPublic(y)
    signed = Sig(PrivateKey(cert.subject), dh_transcript(variant, cr, sr, gx, gy))
    if variant is TlsVariant.TLS12_DH:
        return tup(SERVER_HELLO, sr, cert.term, gy, signed)
    ms = master_secret(variant, DhShared(y, gx.exp), cr, sr)
    return tup(SERVER_HELLO, sr, cert.term, gy, signed, server_finished(ms, cr, sr, gx, gy, cert.term))


def expected_server_hello(variant: TlsVariant, cr: Nonce, x: DhExponent | None, sr: Nonce,
                          cert: Certificate, gy: DhPublic | None) -> Tuple:
    """The exact server hello a client with (cr, x) accepts for the given server choices."""
    if not variant.uses_dh:
        return tup(SERVER_HELLO, sr, cert.term)
    gx = DhPublic(x) if variant is TlsVariant.TLS13 else None
    signed = Sig(PrivateKey(cert.subject), dh_transcript(variant, cr, sr, gx, gy))
    if variant is TlsVariant.TLS12_DH:
        return tup(SERVER_HELLO, sr, cert.term, gy, signed)
    ms = master_secret(variant, DhShared(x, gy.exp), cr, sr)
    return tup(SERVER_HELLO, sr, cert.term, gy, signed, server_finished(ms, cr, sr, gx, gy, cert.term))


def read_server_hello(
    variant: TlsVariant,
    msg: Term,
    cr: Nonce,
    intended_peer: str,
    trusted_ca: str,
    x: DhExponent | None = None,
) -> tuple[Nonce, Certificate, DhPublic | None]:
    """Check a server hello from the client's side and return (sr, certificate, server share).

    ``x`` is the client's own exponent, needed for TLS 1.3 to check the server Finished.
    """
    fin = None
    match variant, msg:
        case TlsVariant.TLS12_RSA, Tuple((Tag("server_hello"), Nonce() as sr, cert_term)):
            gy = signed = None
        case TlsVariant.TLS12_DH, Tuple((Tag("server_hello"), Nonce() as sr, cert_term, DhPublic() as gy, Sig() as signed)):
            pass
        case TlsVariant.TLS13, Tuple((Tag("server_hello"), Nonce() as sr, cert_term, DhPublic() as gy, Sig() as signed, fin)):
            pass
        case _:
            raise MalformedMessage("not a server hello")
    cert = Certificate.from_term(cert_term)
    if cert is None or cert.issuer != trusted_ca:
        raise CertificateRejected("certificate does not verify under the trusted CA")
    if cert.subject != intended_peer:
        raise CertificateRejected(f"certificate names {cert.subject}, expected {intended_peer}")
    if variant.uses_dh:
        gx = DhPublic(x) if variant is TlsVariant.TLS13 else None
        expected = Sig(PrivateKey(cert.subject), dh_transcript(variant, cr, sr, gx, gy))
        if signed != expected:
            raise CertificateRejected("server key share signature does not verify")
        if variant is TlsVariant.TLS13:
            ms = master_secret(variant, DhShared(x, gy.exp), cr, sr)
            if fin != server_finished(ms, cr, sr, gx, gy, cert_term):
                raise CertificateRejected("server Finished does not match this handshake")
    return sr, cert, gy


def client_key_exchange(variant: TlsVariant, server_key: PublicKey, pms: PremasterSecret | None = None,
                        x: DhExponent | None = None) -> Tuple:
    if variant is TlsVariant.TLS12_RSA:
        return tup(CLIENT_KEY_EXCHANGE, AsymEnc(server_key, pms))
    if variant is TlsVariant.TLS12_DH:
        return tup(CLIENT_KEY_EXCHANGE, DhPublic(x))
    raise UnsupportedVariant("TLS1.3 has no client key exchange message")


def read_client_key_exchange(variant: TlsVariant, msg: Term, server: str) -> Term:
    """Return the premaster secret (RSA) or the client's DH share (DH)."""
    match variant, msg:
        case TlsVariant.TLS12_RSA, Tuple((Tag("client_key_exchange"), AsymEnc(PublicKey(owner), PremasterSecret() as pms))):
            if owner != server:
                raise MalformedMessage("key exchange encrypted for another server")
            return pms
        case TlsVariant.TLS12_DH, Tuple((Tag("client_key_exchange"), DhPublic() as gx)):
            return gx
    raise MalformedMessage("not a client key exchange")
