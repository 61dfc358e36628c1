"""Bounded breadth-first search for Goal 1 counterexamples.

The adversary's moves are: start an honest client (towards the honest server
or towards its own server identity), start an honest server, hand itself one
client's premaster secret (TLS1.2-RSA only), or deliver a message to a
waiting strand. Deliveries are generated from the receiver's point of view:
for each field the receiver leaves open, every value of the matching kind in
the adversary's knowledge is tried, together with verbatim replays of
ciphertexts it holds. Candidates the receiver would refuse are dropped, since
a halted strand can neither complete nor help complete a violation, and every
remaining candidate must be derivable.

States are deduplicated on (strand states, adversary knowledge, compromised
strands). A Satisfied verdict only means no violation exists within bounds.
"""

from __future__ import annotations

import functools
import os
from collections import deque
from dataclasses import dataclass, field

from .bundle import Bundle
from .errors import BoundsExceeded, ProtocolReject
from .goals import Status, Verdict, goal1
from .network import Execution, adversary_fresh
from .roles import AUTH_OK, Role, Strand, World, receive, roles_for
from .terms import (
    AsymEnc,
    DhExponent,
    DhPublic,
    Hash,
    Name,
    Nonce,
    PremasterSecret,
    PrivateKey,
    PublicKey,
    Sig,
    SymEnc,
    Tag,
    Term,
    Tuple,
    children,
    to_text,
    tup,
)
from .tls import CLIENT_HELLO, CLIENT_KEY_EXCHANGE, TlsVariant, expected_server_hello
from .uaf import ModelId, Protocol

DEFAULT_BUDGET = 10**6


def default_budget() -> int:
    raw = os.environ.get("UAF_BINDLAB_BUDGET")
    return int(raw) if raw else DEFAULT_BUDGET


@dataclass(frozen=True)
class Bounds:
    clients: int = 1  # see README: two clients multiply the state space without changing any verdict
    servers: int = 2
    compromised: int = 1  # injected premaster secrets
    depth: int = 4  # constructor layers the adversary may add on top of what it knows
    budget: int = field(default_factory=default_budget)


@dataclass
class SearchResult:
    model: ModelId
    protocol: Protocol
    verdicts: dict  # Role -> Verdict
    explored: int


def synthesis_depth(kb, t: Term) -> int:
    """Constructor layers needed on top of known terms and public atoms."""
    if t in kb.terms or isinstance(t, (Name, Tag)):
        return 0
    kids = children(t)
    if not kids:
        return 0
    return 1 + max(synthesis_depth(kb, c) for c in kids)


# ---------------------------------------------------------------------------
# typed pools of adversary knowledge


@dataclass
class Pools:
    nonces: dict  # kind -> list[Nonce]
    pms: list
    dh: dict  # exponent kind -> list[DhPublic]
    names: list
    sigs: list
    handles: list
    ciphertexts: list


def _kind(t: Term) -> str:
    return t.id.rsplit(".", 1)[-1]


def pools(kb, world: World) -> Pools:
    nonces: dict[str, list] = {}
    pms, dh, names, sigs, handles, cts = [], set(), set(), [], [], []
    for t in sorted(kb.terms, key=to_text):
        match t:
            case Nonce():
                nonces.setdefault(_kind(t), []).append(t)
            case PremasterSecret():
                pms.append(t)
            case DhPublic():
                dh.add(t)
            case DhExponent():
                dh.add(DhPublic(t))
            case Name():
                names.add(t)
            case Sig(PrivateKey(owner), _) if owner not in (world.ca,):
                sigs.append(t)
            case Hash((PrivateKey(), Name())):
                handles.append(t)
            case SymEnc() | AsymEnc():
                cts.append(t)
    names |= {Name(world.server), Name(world.adversary), Name(world.username), adversary_fresh(world, "user")}
    by_kind: dict[str, list] = {}
    for g in sorted(dh):
        by_kind.setdefault(_kind(g.exp), []).append(g)
    return Pools(nonces, pms, by_kind, sorted(names), sigs, handles, cts)


# ---------------------------------------------------------------------------
# receiver-directed candidates


# The same hello is rebuilt for every knowledge state holding the same nonces and shares.
_server_hello = functools.lru_cache(maxsize=1 << 16)(expected_server_hello)


def _under(key: Term, payloads, p: Pools):
    for payload in payloads:
        yield SymEnc(key, payload)
    for ct in p.ciphertexts:
        if isinstance(ct, SymEnc) and ct.key == key:
            yield ct


def candidates(s: Strand, world: World, p: Pools):
    v = s.model.tls
    label = s.expecting
    match s.role.is_client, label:
        case True, "server_hello":
            cert = world.certificate(s.peer)
            for sr in p.nonces.get("sr", []):
                for gy in p.dh.get("y", []) if v.uses_dh else [None]:
                    yield _server_hello(v, s.var("cr"), s.var("x"), sr, cert, gy)
        case True, "challenge":
            key = s.session.swk
            appids = [Name(world.server), Name(world.adversary)]
            users = [n for n in p.names if n.id.endswith(".user")]
            chs = p.nonces.get("ch", [])
            if s.role is Role.CLIENT_REG:
                payloads = (tup(u, a, c) for u in users for a in appids for c in chs)
            else:
                payloads = (tup(a, c) for a in appids for c in chs)
            yield from _under(key, payloads, p)
        case True, "auth_ok":
            yield from _under(s.session.swk, [AUTH_OK], p)
        case False, "client_hello":
            me = Name(s.agent)
            for cr in p.nonces.get("cr", []):
                if v is TlsVariant.TLS13:
                    for gx in p.dh.get("x", []):
                        yield tup(CLIENT_HELLO, cr, gx, me)
                else:
                    yield tup(CLIENT_HELLO, cr, me)
        case False, "client_key_exchange":
            if v is TlsVariant.TLS12_RSA:
                key = PublicKey(s.agent)
                seen = set()
                for pms in p.pms:
                    seen.add(AsymEnc(key, pms))
                for ct in p.ciphertexts:
                    if isinstance(ct, AsymEnc) and ct.key == key:
                        seen.add(ct)
                for ct in sorted(seen):
                    yield tup(CLIENT_KEY_EXCHANGE, ct)
            else:
                for gx in p.dh.get("x", []):
                    yield tup(CLIENT_KEY_EXCHANGE, gx)
        case False, "credentials":
            pws = p.nonces.get("pw", [])
            yield from _under(s.session.cwk, (tup(Name(world.username), pw) for pw in pws), p)
        case False, "response":
            payloads = []
            for sig in p.sigs:
                match s.role, sig:
                    case Role.SERVER_REG, Sig(_, Tuple((Name() as aaid, fc, PublicKey() as kpub))):
                        payloads.extend(tup(h, aaid, kpub, fc, sig) for h in p.handles)
                    case Role.SERVER_AUTH, Sig(_, Tuple((fc, Nonce() as n))):
                        payloads.append(tup(fc, n, sig))
            yield from _under(s.session.cwk, payloads, p)


def _try_receive(s: Strand, world: World, msg: Term, cache: dict | None = None):
    key = (s, msg)
    if cache is not None and key in cache:
        return cache[key]
    try:
        result = receive(s, world, msg)
    except ProtocolReject:
        result = None
    if cache is not None:
        cache[key] = result
    return result


# ---------------------------------------------------------------------------
# exploration


def _key(ex: Execution):
    # A strand's session is a function of its bindings, so it is left out.
    return tuple((s.sid, s.peer, s.pc, s.status, s.vars) for s in ex.strands), ex.kb.terms, ex.compromised


def successors(ex: Execution, bounds: Bounds, protocol: Protocol, caches: dict | None = None):
    """Yield (action description, next execution) pairs."""
    world = ex.world
    croles, sroles = roles_for(protocol)
    clients = [s for s in ex.strands if s.role is croles]
    nservers = sum(1 for s in ex.strands if s.role is sroles)
    if all(a[0] == "spawn" for a in ex.actions):
        # Spawning phase: strands behave the same whenever they start, so all
        # start before the first adversary move, clients first, peers in order.
        if nservers == 0 and len(clients) < bounds.clients:
            sid = f"C{len(clients) + 1}"
            peers = (world.server, world.adversary)
            floor = peers.index(clients[-1].peer) if clients else 0
            for peer in peers[floor:]:
                yield ("spawn", sid, peer), ex.spawn(croles, sid, peer)
        if nservers < bounds.servers:
            sid = f"S{nservers + 1}"
            yield ("spawn", sid), ex.spawn(sroles, sid)
    if ex.model.tls is TlsVariant.TLS12_RSA and len(ex.compromised) < bounds.compromised:
        for s in ex.strands:
            if s.role is croles and s.peer == world.server and s.var("pms") is not None and s.sid not in ex.compromised:
                yield ("leak", s.sid), ex.leak(s.sid)
    caches = caches if caches is not None else {}
    pool_cache = caches.setdefault("pools", {})
    recv_cache = caches.setdefault("receive", {})
    move_cache = caches.setdefault("moves", {})
    p = pool_cache.get(ex.kb.terms)
    if p is None:
        p = pool_cache[ex.kb.terms] = pools(ex.kb, world)
    for s in ex.strands:
        if not s.waiting:
            continue
        # What a strand accepts depends only on its own state and the adversary's knowledge.
        key = (s, ex.kb.terms)
        moves = move_cache.get(key)
        if moves is None:
            moves = move_cache[key] = list(_deliveries(ex, s, p, bounds, recv_cache))
        for msg, result in moves:
            yield ("deliver", s.sid, msg), ex.delivered(s.sid, msg, result)


def _deliveries(ex: Execution, s: Strand, p: Pools, bounds: Bounds, recv_cache: dict):
    seen = set()
    for msg in candidates(s, ex.world, p):
        if msg in seen:
            continue
        seen.add(msg)
        if not ex.derivable(msg):
            continue
        result = _try_receive(s, ex.world, msg, recv_cache)
        if result is None or synthesis_depth(ex.kb, msg) > bounds.depth:
            continue
        yield msg, result


def explore(model: ModelId, protocol: Protocol, world: World | None = None, bounds: Bounds | None = None,
            perspectives: tuple[Role, ...] | None = None, on_state=None) -> SearchResult:
    """Breadth-first exploration; first violation found per perspective is the witness.

    ``on_state`` is called with every newly reached execution (for audits).
    """
    world = world or World()
    bounds = bounds or Bounds()
    perspectives = perspectives or roles_for(protocol)
    start = Execution.begin(world, model)
    frontier = deque([start])
    visited = {_key(start)}
    witnesses: dict[Role, Bundle] = {}
    caches: dict = {}
    explored = 0
    while frontier:
        ex = frontier.popleft()
        explored += 1
        if explored > bounds.budget:
            raise BoundsExceeded(
                f"{model.name} {protocol.value}: more than {bounds.budget} states; raise UAF_BINDLAB_BUDGET"
            )
        for _action, nxt in successors(ex, bounds, protocol, caches):
            k = _key(nxt)
            if k in visited:
                continue
            visited.add(k)
            if on_state is not None:
                on_state(nxt)
            _judge(nxt, perspectives, witnesses, world)
            if len(witnesses) == len(perspectives):
                return _result(model, protocol, perspectives, witnesses, explored)
            frontier.append(nxt)
    return _result(model, protocol, perspectives, witnesses, explored)


def _judge(ex: Execution, perspectives, witnesses: dict, world: World) -> None:
    pending = [r for r in perspectives if r not in witnesses and any(s.role is r and s.done for s in ex.strands)]
    if not pending:
        return
    b = ex.bundle()
    for role in pending:
        if not goal1(b, role, ex.model, world=world):
            witnesses[role] = b


def _result(model, protocol, perspectives, witnesses, explored) -> SearchResult:
    verdicts = {}
    for role in perspectives:
        w = witnesses.get(role)
        status = Status.VIOLATED if w is not None else Status.SATISFIED
        verdicts[role] = Verdict(status, model, role, w, "search", explored)
    return SearchResult(model, protocol, verdicts, explored)


def search_counterexample(model: ModelId, perspective: Role, bounds: Bounds | None = None,
                          world: World | None = None) -> Verdict:
    protocol = perspective.protocol
    return explore(model, protocol, world, bounds, (perspective,)).verdicts[perspective]
