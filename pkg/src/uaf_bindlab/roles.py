"""Honest role state machines.

A strand is an immutable record of one role instance: its position in the
role program, the variables it has bound and its TLS session. Programs are
ordered lists of send/receive steps; sends run eagerly, receives wait for the
network. Stepping is pure, so the search can branch on strand states freely.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

from .errors import AuthFailed, MalformedMessage, ProtocolReject
from .knowledge import KnowledgeBase, non_orig
from .terms import (
    DhExponent,
    DhPublic,
    DhShared,
    Name,
    Nonce,
    PremasterSecret,
    PrivateKey,
    PublicKey,
    SymEnc,
    Tag,
    Term,
    Tuple,
    tup,
)
from .tls import (
    Certificate,
    TlsSession,
    TlsVariant,
    client_hello,
    client_key_exchange,
    derive_session,
    read_client_hello,
    read_client_key_exchange,
    read_server_hello,
    server_hello,
)
from .uaf import (
    ModelId,
    Protocol,
    ServerView,
    VerificationPolicy,
    authentication_assertion,
    final_challenge,
    key_handle,
    make_tls_data,
    registration_assertion,
    verify_assertion,
)

AUTH_OK = Tag("auth OK")


class Role(enum.Enum):
    CLIENT = "client"
    SERVER = "server"
    CLIENT_REG = "client-reg"
    SERVER_REG = "server-reg"
    CLIENT_AUTH = "client-auth"
    SERVER_AUTH = "server-auth"
    CLIENT_TLS = "client-tls"
    SERVER_TLS = "server-tls"

    @property
    def is_client(self) -> bool:
        return self in (Role.CLIENT, Role.CLIENT_REG, Role.CLIENT_AUTH, Role.CLIENT_TLS)

    @property
    def complement(self) -> Role:
        return _COMPLEMENT[self]

    @property
    def protocol(self) -> Protocol | None:
        return _PROTOCOL.get(self)


_COMPLEMENT = {
    Role.CLIENT: Role.SERVER,
    Role.SERVER: Role.CLIENT,
    Role.CLIENT_REG: Role.SERVER_REG,
    Role.SERVER_REG: Role.CLIENT_REG,
    Role.CLIENT_AUTH: Role.SERVER_AUTH,
    Role.SERVER_AUTH: Role.CLIENT_AUTH,
    Role.CLIENT_TLS: Role.SERVER_TLS,
    Role.SERVER_TLS: Role.CLIENT_TLS,
}
_PROTOCOL = {
    Role.CLIENT: Protocol.BASELINE,
    Role.SERVER: Protocol.BASELINE,
    Role.CLIENT_REG: Protocol.REGISTRATION,
    Role.SERVER_REG: Protocol.REGISTRATION,
    Role.CLIENT_AUTH: Protocol.AUTHENTICATION,
    Role.SERVER_AUTH: Protocol.AUTHENTICATION,
}


def roles_for(protocol: Protocol) -> tuple[Role, Role]:
    return {
        Protocol.BASELINE: (Role.CLIENT, Role.SERVER),
        Protocol.REGISTRATION: (Role.CLIENT_REG, Role.SERVER_REG),
        Protocol.AUTHENTICATION: (Role.CLIENT_AUTH, Role.SERVER_AUTH),
    }[protocol]


@dataclass(frozen=True)
class Agent:
    name: str
    honest: bool = True

    @property
    def private_key(self) -> PrivateKey:
        return PrivateKey(self.name)

    @property
    def public_key(self) -> PublicKey:
        return PublicKey(self.name)


@dataclass(frozen=True)
class World:
    """Principals and long-term material shared by every run.

    The adversary owns one legitimate server identity with a CA-issued
    certificate. The honest client has one long-lived binding key pair, an
    embedded authenticator and, for authentication runs, a key registered
    with the honest server.
    """

    ca: str = "ca"
    client: str = "client"
    server: str = "server"
    adversary: str = "mallory"
    username: str = "alice"
    client_binding_key: str = "client.tb"
    aaid: str = "aaid.embedded"
    attestation_key: str = "authenticator.attest"
    registered_authk: str = "client.authk"
    policy: VerificationPolicy = VerificationPolicy.STRICT

    @property
    def honest_principals(self) -> frozenset:
        return frozenset({self.ca, self.client, self.server})

    @property
    def servers(self) -> tuple[str, ...]:
        return (self.server, self.adversary)

    def certificate(self, subject: str) -> Certificate:
        return Certificate(subject, self.ca)

    @property
    def password(self) -> Nonce:
        return Nonce(f"{self.username}.pw")

    @property
    def client_registrations(self) -> dict:
        """appid -> authenticator key the client registered earlier."""
        return {self.server: self.registered_authk}

    @property
    def server_registered_keys(self) -> frozenset:
        return frozenset({PublicKey(self.registered_authk)})

    @property
    def attestation_keys(self) -> dict:
        return {self.aaid: self.attestation_key}

    @property
    def secret_keys(self) -> tuple[PrivateKey, ...]:
        """Private keys of legitimate parties: never known to the adversary."""
        return (
            PrivateKey(self.ca),
            PrivateKey(self.server),
            PrivateKey(self.client),
            PrivateKey(self.client_binding_key),
            PrivateKey(self.attestation_key),
            PrivateKey(self.registered_authk),
        )

    def adversary_kb(self) -> KnowledgeBase:
        initial = {
            PrivateKey(self.adversary),
            PublicKey(self.adversary),
            self.certificate(self.adversary).term,
            self.certificate(self.server).term,
            PublicKey(self.ca),
            PublicKey(self.server),
            PublicKey(self.client),
            PublicKey(self.client_binding_key),
        }
        return KnowledgeBase(frozenset(initial), non_orig(*self.secret_keys)).add()


@dataclass(frozen=True)
class Strand:
    sid: str
    role: Role
    model: ModelId
    agent: str
    peer: str | None = None
    pc: int = 0
    vars: tuple = ()
    session: TlsSession | None = None
    status: str = "running"
    reason: str | None = None

    @property
    def height(self) -> int:
        return self.pc

    @property
    def full_height(self) -> int:
        return len(program(self.role, self.model.tls))

    @property
    def done(self) -> bool:
        return self.status == "done"

    @property
    def waiting(self) -> bool:
        return self.status == "running" and program(self.role, self.model.tls)[self.pc].direction == "recv"

    @property
    def expecting(self) -> str | None:
        if self.status != "running":
            return None
        step = program(self.role, self.model.tls)[self.pc]
        return step.label if step.direction == "recv" else None

    def var(self, name: str, default=None):
        for k, v in self.vars:
            if k == name:
                return v
        return default

    @property
    def bindings(self) -> dict:
        return dict(self.vars)

    def fresh(self, kind: str) -> Term:
        return fresh_atom(self.sid, kind)

    def bind(self, **kw) -> Strand:
        merged = dict(self.vars)
        merged.update(kw)
        return self.evolve(vars=tuple(sorted(merged.items())))

    def evolve(self, **changes) -> Strand:
        """Copy with some fields changed; a lighter dataclasses.replace for the search loop."""
        new = object.__new__(Strand)
        new.__dict__.update(self.__dict__)
        new.__dict__.update(changes)
        return new


_FRESH = {"cr": Nonce, "sr": Nonce, "ch": Nonce, "n": Nonce, "pms": PremasterSecret,
          "x": DhExponent, "y": DhExponent, "authk": PrivateKey, "user": Name}


def fresh_atom(sid: str, kind: str) -> Term:
    """Atom freshly generated by strand ``sid``; names are stable so states can be compared."""
    return _FRESH[kind](f"{sid}.{kind}")


@dataclass(frozen=True)
class Step:
    direction: str  # "send" | "recv"
    label: str
    fn: Callable = field(compare=False)


# ---------------------------------------------------------------------------
# TLS steps


def _c_hello(s: Strand, w: World):
    v = s.model.tls
    cr = s.fresh("cr")
    x = s.fresh("x") if v.uses_dh else None
    bound = dict(cr=cr, server=Name(s.peer))
    if v.uses_dh:
        bound["x"] = x
    else:
        bound["pms"] = s.fresh("pms")
    return client_hello(v, cr, s.peer, x), s.bind(**bound)


def _c_read_hello(s: Strand, w: World, msg: Term) -> Strand:
    v = s.model.tls
    sr, cert, gy = read_server_hello(v, msg, s.var("cr"), s.peer, w.ca, s.var("x"))
    s = s.bind(sr=sr, ca=Name(cert.issuer))
    if v.uses_dh:
        s = s.bind(y=gy.exp)
        secret = DhShared(s.var("x"), gy.exp)
        session = derive_session(v, s.var("cr"), sr, secret, cert, s.peer, s.var("x"), gy)
    else:
        session = derive_session(v, s.var("cr"), sr, s.var("pms"), cert, s.peer)
    return s.evolve(session=session)


def _c_key_exchange(s: Strand, w: World):
    v = s.model.tls
    if v is TlsVariant.TLS12_RSA:
        return client_key_exchange(v, PublicKey(s.session.server_cert.subject), pms=s.var("pms")), s
    return client_key_exchange(v, None, x=s.var("x")), s


def _s_read_hello(s: Strand, w: World, msg: Term) -> Strand:
    v = s.model.tls
    cr, gx = read_client_hello(v, msg, s.agent)
    s = s.bind(cr=cr, server=Name(s.agent), ca=Name(w.ca), sr=s.fresh("sr"))
    if v.uses_dh:
        s = s.bind(y=s.fresh("y"))
    if gx is not None:
        s = s.bind(x=gx.exp)
    return s


def _s_hello(s: Strand, w: World):
    v = s.model.tls
    cert = w.certificate(s.agent)
    gx = None
    if v is TlsVariant.TLS13:
        gx = DhPublic(s.var("x"))
    msg = server_hello(v, s.var("sr"), cert, s.var("cr"), s.var("y"), gx)
    if v is TlsVariant.TLS13:
        s = _server_session(s, w)
    return msg, s


def _server_session(s: Strand, w: World) -> Strand:
    v = s.model.tls
    cert = w.certificate(s.agent)
    if v.uses_dh:
        secret = DhShared(s.var("y"), s.var("x"))
        session = derive_session(v, s.var("cr"), s.var("sr"), secret, cert, None, s.var("y"), DhPublic(s.var("x")))
    else:
        session = derive_session(v, s.var("cr"), s.var("sr"), s.var("pms"), cert, None)
    return s.evolve(session=session)


def _s_read_key_exchange(s: Strand, w: World, msg: Term) -> Strand:
    v = s.model.tls
    got = read_client_key_exchange(v, msg, s.agent)
    s = s.bind(x=got.exp) if v.uses_dh else s.bind(pms=got)
    return _server_session(s, w)


def _tls_client() -> list[Step]:
    return [Step("send", "client_hello", _c_hello), Step("recv", "server_hello", _c_read_hello)]


def _tls_server() -> list[Step]:
    return [Step("recv", "client_hello", _s_read_hello), Step("send", "server_hello", _s_hello)]


_KX_CLIENT = Step("send", "client_key_exchange", _c_key_exchange)
_KX_SERVER = Step("recv", "client_key_exchange", _s_read_key_exchange)


# ---------------------------------------------------------------------------
# application steps


def _open(s: Strand, msg: Term, key) -> Term:
    match msg:
        case SymEnc(k, payload) if k == key:
            return payload
    raise AuthFailed("message is not encrypted under this session's key")


def _base_send_credentials(s: Strand, w: World):
    u, pw = Name(w.username), w.password
    s = s.bind(username=u, pw=pw)
    return SymEnc(s.session.cwk, tup(u, pw)), s


def _base_read_credentials(s: Strand, w: World, msg: Term) -> Strand:
    match _open(s, msg, s.session.cwk):
        case Tuple((Name() as u, pw)) if u == Name(w.username) and pw == w.password:
            return s.bind(username=u, pw=pw)
    raise AuthFailed("unknown user or wrong password")


def _base_send_ok(s: Strand, w: World):
    return SymEnc(s.session.swk, AUTH_OK), s


def _base_read_ok(s: Strand, w: World, msg: Term) -> Strand:
    if _open(s, msg, s.session.swk) != AUTH_OK:
        raise AuthFailed("server did not confirm the login")
    return s


def _reg_send_challenge(s: Strand, w: World):
    ch, user, appid = s.fresh("ch"), s.fresh("user"), Name(s.agent)
    s = s.bind(challenge=ch, username=user, appid=appid)
    return SymEnc(s.session.swk, tup(user, appid, ch)), s


def _reg_read_challenge(s: Strand, w: World, msg: Term) -> Strand:
    match _open(s, msg, s.session.swk):
        case Tuple((Name() as user, Name() as appid, Nonce() as ch)):
            # appid is spoofable and not checked against the TLS peer.
            return s.bind(username=user, appid=appid, challenge=ch)
    raise MalformedMessage("registration request has the wrong shape")


def _tls_data(s: Strand, w: World) -> Term:
    return make_tls_data(s.model.binding, s.var("challenge"), s.session, w.client_binding_key)


def _reg_send_response(s: Strand, w: World):
    authk = s.fresh("authk")
    kpub = PublicKey(authk.owner)
    fc = final_challenge(s.var("appid"), s.var("challenge"), _tls_data(s, w))
    h = key_handle(authk, s.var("username"))
    aaid = Name(w.aaid)
    sig = registration_assertion(PrivateKey(w.attestation_key), aaid, fc, kpub)
    s = s.bind(authk=kpub, fc=fc)
    return SymEnc(s.session.cwk, tup(h, aaid, kpub, fc, sig)), s


def server_view(s: Strand, w: World) -> ServerView:
    return ServerView(
        protocol=s.role.protocol,
        binding=s.model.binding,
        session=s.session,
        appid=s.var("appid"),
        challenge=s.var("challenge"),
        username=s.var("username"),
        attestation_keys=w.attestation_keys,
        registered_keys=w.server_registered_keys,
    )


def _server_read_response(s: Strand, w: World, msg: Term) -> Strand:
    payload = _open(s, msg, s.session.cwk)
    ok = verify_assertion(server_view(s, w), payload, w.policy)
    return s.bind(authk=ok.authk, fc=ok.fc)


def _auth_send_challenge(s: Strand, w: World):
    ch, appid = s.fresh("ch"), Name(s.agent)
    s = s.bind(challenge=ch, appid=appid)
    return SymEnc(s.session.swk, tup(appid, ch)), s


def _auth_read_challenge(s: Strand, w: World, msg: Term) -> Strand:
    match _open(s, msg, s.session.swk):
        case Tuple((Name() as appid, Nonce() as ch)):
            if appid.id not in w.client_registrations:
                raise AuthFailed(f"no authenticator key registered for {appid.id}")
            return s.bind(appid=appid, challenge=ch)
    raise MalformedMessage("authentication request has the wrong shape")


def _auth_send_response(s: Strand, w: World):
    authk = PrivateKey(w.client_registrations[s.var("appid").id])
    n = s.fresh("n")
    fc = final_challenge(s.var("appid"), s.var("challenge"), _tls_data(s, w))
    sig = authentication_assertion(authk, fc, n)
    s = s.bind(authk=PublicKey(authk.owner), fc=fc, n=n)
    return SymEnc(s.session.cwk, tup(fc, n, sig)), s


_APP = {
    Role.CLIENT: [Step("send", "credentials", _base_send_credentials), Step("recv", "auth_ok", _base_read_ok)],
    Role.SERVER: [Step("recv", "credentials", _base_read_credentials), Step("send", "auth_ok", _base_send_ok)],
    Role.CLIENT_REG: [Step("recv", "challenge", _reg_read_challenge), Step("send", "response", _reg_send_response)],
    Role.SERVER_REG: [Step("send", "challenge", _reg_send_challenge), Step("recv", "response", _server_read_response)],
    Role.CLIENT_AUTH: [Step("recv", "challenge", _auth_read_challenge), Step("send", "response", _auth_send_response)],
    Role.SERVER_AUTH: [Step("send", "challenge", _auth_send_challenge), Step("recv", "response", _server_read_response)],
    Role.CLIENT_TLS: [],
    Role.SERVER_TLS: [],
}


@lru_cache(maxsize=None)
def program(role: Role, variant: TlsVariant) -> tuple[Step, ...]:
    if role.is_client:
        steps = _tls_client() + ([_KX_CLIENT] if variant.has_key_exchange_message else [])
    else:
        steps = _tls_server() + ([_KX_SERVER] if variant.has_key_exchange_message else [])
    return tuple(steps + _APP[role])


def full_height(role: Role, variant: TlsVariant) -> int:
    return len(program(role, variant))


# Full strand heights per role and TLS variant; heights count every send and receive.
ROLE_HEIGHTS = {(r, v): full_height(r, v) for r in Role for v in TlsVariant}


def tls_height(variant: TlsVariant) -> int:
    return 3 if variant.has_key_exchange_message else 2


def start(role: Role, sid: str, model: ModelId, agent: str, peer: str | None, world: World) -> tuple[Strand, list[Term]]:
    if role.is_client and peer is None:
        raise ValueError("client strands need an intended peer")
    return advance(Strand(sid, role, model, agent, peer), world)


def advance(s: Strand, w: World) -> tuple[Strand, list[Term]]:
    """Run every send step until the strand waits for input or finishes."""
    steps = program(s.role, s.model.tls)
    out = []
    while s.status == "running" and s.pc < len(steps) and steps[s.pc].direction == "send":
        msg, s = steps[s.pc].fn(s, w)
        s = s.evolve(pc=s.pc + 1)
        out.append(msg)
    if s.status == "running" and s.pc == len(steps):
        s = s.evolve(status="done")
    return s, out


def receive(s: Strand, w: World, msg: Term) -> tuple[Strand, list[Term]]:
    """Feed ``msg`` to a waiting strand. Raises ProtocolReject if the strand refuses it."""
    if not s.waiting:
        raise ValueError(f"strand {s.sid} is not waiting for input")
    step = program(s.role, s.model.tls)[s.pc]
    s = step.fn(s, w, msg)
    return advance(s.evolve(pc=s.pc + 1), w)


def halt(s: Strand, err: ProtocolReject) -> Strand:
    return s.evolve(status="halted", reason=err.reason)
