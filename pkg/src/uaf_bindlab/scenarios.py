"""Scripted adversary scenarios.

Scripts are s-expression data (see the ``attacks`` directory). Each step is
an adversary action; every message it delivers must be derivable from its
knowledge at that point, which the network checks.

Steps::

    (spawn-client SID PEER)     honest client strand intending to reach PEER
    (spawn-server SID)          honest server strand
    (relay-handshake CSID SSID) forward the TLS phase faithfully
    (open-tls MSID SSID)        adversary connects to a server as a TLS client
    (accept-tls CSID MSID)      adversary terminates a client's TLS as itself
    (leak SID pms)              the strand's premaster secret reaches the adversary
    (deliver SID EXPR)          synthesize EXPR and deliver it

Expressions are terms plus ``(key SESSION cwk|swk)``, ``(sent SID last|N)``
and ``(open KEY EXPR)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from importlib import resources

from .bundle import Bundle
from .errors import InapplicableScenario, ParseError
from .goals import goal1
from .network import Network, adversary_fresh
from .protocols import handshake
from .roles import Role, World, roles_for
from .sexpr import SList, String, Symbol, read_all
from .terms import AsymEnc, DhPublic, DhShared, Hash, Sig, SymEnc, Term, Tuple, from_sexpr, to_text
from .tls import (
    TlsSession,
    TlsVariant,
    client_hello,
    client_key_exchange,
    derive_session,
    read_client_hello,
    read_server_hello,
    server_hello,
)
from .uaf import BASELINE, ModelId, Protocol, VerificationPolicy


@dataclass(frozen=True)
class Scenario:
    id: str
    doc: str
    requires: frozenset
    target: str
    expect: tuple  # clauses: ("any",) | ("binding", names...) | ("policy", names...)
    steps: tuple = field(repr=False)

    def applicable(self, model: ModelId) -> bool:
        for req in self.requires:
            match req:
                case "uaf" if model.baseline:
                    return False
                case "baseline" if not model.baseline:
                    return False
                case "rsa" if model.tls is not TlsVariant.TLS12_RSA:
                    return False
        return True

    def expects_violation(self, model: ModelId, policy: VerificationPolicy) -> bool:
        for clause in self.expect:
            match clause:
                case ("any",):
                    return True
                case ("binding", *names) if model.binding.value in names and not model.baseline:
                    return True
                case ("policy", *names) if policy.value in names:
                    return True
        return False


def _sym(node, what: str) -> str:
    if not isinstance(node, Symbol):
        raise ParseError(f"expected {what}", node.line, node.column)
    return node.name


def parse_scenario(text: str) -> Scenario:
    forms = read_all(text)
    if len(forms) != 1 or not isinstance(forms[0], SList):
        raise ParseError("a scenario file holds exactly one (scenario ...) form", 1, 1)
    top = forms[0]
    items = top.items
    if len(items) < 2 or _sym(items[0], "'scenario'") != "scenario":
        raise ParseError("expected (scenario NAME ...)", top.line, top.column)
    sid = _sym(items[1], "a scenario name")
    doc, requires, target, expect, steps = "", set(), None, [], ()
    for clause in items[2:]:
        if not isinstance(clause, SList) or not clause.items:
            raise ParseError("expected a clause", clause.line, clause.column)
        head = _sym(clause.items[0], "a clause name")
        args = clause.items[1:]
        match head:
            case "doc":
                if len(args) != 1 or not isinstance(args[0], String):
                    raise ParseError("doc takes one string", clause.line, clause.column)
                doc = args[0].value
            case "requires":
                requires |= {_sym(a, "a requirement") for a in args}
            case "target":
                target = _sym(args[0], "a strand id")
            case "expect-violation":
                for a in args:
                    if not isinstance(a, SList) or not a.items:
                        raise ParseError("expected (any), (binding ...) or (policy ...)", a.line, a.column)
                    expect.append(tuple(_sym(x, "a symbol") for x in a.items))
            case "steps":
                steps = tuple(args)
            case _:
                raise ParseError(f"unknown scenario clause '{head}'", clause.line, clause.column)
    bad = requires - {"uaf", "rsa", "baseline"}
    if bad:
        raise ParseError(f"unknown requirement(s): {', '.join(sorted(bad))}", top.line, top.column)
    if target is None:
        raise ParseError("scenario needs a (target SID) clause", top.line, top.column)
    return Scenario(sid, doc, frozenset(requires), target, tuple(expect), steps)


def builtin_scenarios() -> dict[str, Scenario]:
    out = {}
    for entry in sorted(resources.files(__package__).joinpath("attacks").iterdir(), key=lambda p: p.name):
        if entry.name.endswith(".scn"):
            sc = parse_scenario(entry.read_text(encoding="utf-8"))
            out[sc.id] = sc
    return out


# ---------------------------------------------------------------------------
# interpreter


@dataclass
class ScenarioRun:
    scenario: Scenario
    model: ModelId
    network: Network
    protocol: Protocol
    sessions: dict = field(default_factory=dict)  # adversary-side TLS sessions by name
    log: list = field(default_factory=list)  # (step text, first event index, newly derived terms)

    @property
    def bundle(self) -> Bundle:
        return self.network.bundle()

    @property
    def target(self):
        return self.network.strand(self.scenario.target)

    @property
    def accepted(self) -> bool:
        return self.target.done

    @property
    def reason(self) -> str | None:
        return self.target.reason

    def violated(self, perspective: Role) -> bool:
        return not goal1(self.bundle, perspective, self.model, world=self.network.world)

    @property
    def server_violated(self) -> bool:
        return self.violated(roles_for(self.protocol)[1])


def _session_of(run: ScenarioRun, name: str) -> TlsSession:
    if name in run.sessions:
        return run.sessions[name]
    strand = run.network.strand(name)
    if strand.session is None:
        raise InapplicableScenario(f"{name} has no TLS session yet")
    return strand.session


def _eval(run: ScenarioRun, node) -> Term:
    if isinstance(node, SList) and node.items and isinstance(node.items[0], Symbol):
        head, args = node.items[0].name, node.items[1:]
        match head:
            case "key":
                session = _session_of(run, _sym(args[0], "a session name"))
                which = _sym(args[1], "cwk or swk")
                if which not in ("cwk", "swk"):
                    raise ParseError("key takes cwk or swk", args[1].line, args[1].column)
                return getattr(session, which)
            case "sent":
                msgs = run.network.state.sent(_sym(args[0], "a strand id"))
                which = _sym(args[1], "last or an index")
                return msgs[-1] if which == "last" else msgs[int(which)]
            case "open":
                key, ct = _eval(run, args[0]), _eval(run, args[1])
                match ct:
                    case SymEnc(k, payload) if k == key:
                        return payload
                raise ParseError(f"cannot open {to_text(ct)} with {to_text(key)}", node.line, node.column)
            case "senc":
                return SymEnc(_eval(run, args[0]), _eval(run, args[1]))
            case "aenc" | "sig":
                cls = AsymEnc if head == "aenc" else Sig
                return cls(_eval(run, args[0]), _eval(run, args[1]))
            case "tuple":
                return Tuple(tuple(_eval(run, a) for a in args))
            case "hash":
                return Hash(tuple(_eval(run, a) for a in args))
    return from_sexpr(node)


def _open_tls(run: ScenarioRun, msid: str, ssid: str) -> None:
    """Adversary acts as a TLS client of an honest server strand."""
    net, w = run.network, run.network.world
    v = run.model.tls
    server = net.strand(ssid).agent
    cr = adversary_fresh(w, "cr")
    x = adversary_fresh(w, "x") if v.uses_dh else None
    net.deliver(ssid, client_hello(v, cr, server, x))
    sr, cert, gy = read_server_hello(v, net.state.sent(ssid)[0], cr, server, w.ca, x)
    if v is TlsVariant.TLS12_RSA:
        pms = adversary_fresh(w, "pms")
        net.deliver(ssid, client_key_exchange(v, cert.key, pms=pms))
        secret = pms
    else:
        if v.has_key_exchange_message:
            net.deliver(ssid, client_key_exchange(v, cert.key, x=x))
        secret = DhShared(x, gy.exp)
    run.sessions[msid] = derive_session(v, cr, sr, secret, cert, server, x, gy)


def _accept_tls(run: ScenarioRun, csid: str, msid: str) -> None:
    """Adversary answers a client's hello with its own legitimate certificate."""
    net, w = run.network, run.network.world
    v = run.model.tls
    hello = net.state.sent(csid)[0]
    cr, gx = read_client_hello(v, hello, w.adversary)
    sr = adversary_fresh(w, "sr")
    y = adversary_fresh(w, "y") if v.uses_dh else None
    cert = w.certificate(w.adversary)
    net.deliver(csid, server_hello(v, sr, cert, cr, y, gx))
    if v is TlsVariant.TLS12_RSA:
        kx = net.state.sent(csid)[1]
        match kx:
            case Tuple((_, AsymEnc(_, pms))):
                secret = pms
            case _:
                raise InapplicableScenario("client did not send an RSA key exchange")
    else:
        if v.has_key_exchange_message:
            match net.state.sent(csid)[1]:
                case Tuple((_, DhPublic() as gx)):
                    pass
                case _:
                    raise InapplicableScenario("client did not send a DH key exchange")
        secret = DhShared(y, gx.exp)
    run.sessions[msid] = derive_session(v, cr, sr, secret, cert, None, y, gx)


def _step(run: ScenarioRun, node) -> None:
    if not isinstance(node, SList) or not node.items:
        raise ParseError("expected a step", node.line, node.column)
    head = _sym(node.items[0], "a step name")
    args = node.items[1:]
    net = run.network
    croles, sroles = roles_for(run.protocol)
    match head:
        case "spawn-client":
            net.spawn(croles, _sym(args[0], "a strand id"), _sym(args[1], "a peer name"))
        case "spawn-server":
            net.spawn(sroles, _sym(args[0], "a strand id"))
        case "relay-handshake":
            handshake(net, _sym(args[0], "a strand id"), _sym(args[1], "a strand id"))
        case "open-tls":
            _open_tls(run, _sym(args[0], "a session name"), _sym(args[1], "a strand id"))
        case "accept-tls":
            _accept_tls(run, _sym(args[0], "a strand id"), _sym(args[1], "a session name"))
        case "leak":
            net.leak(_sym(args[0], "a strand id"), _sym(args[1], "a variable"))
        case "deliver":
            net.deliver(_sym(args[0], "a strand id"), _eval(run, args[1]))
        case _:
            raise ParseError(f"unknown step '{head}'", node.line, node.column)


def step_text(node) -> str:
    match node:
        case SList(items):
            return "(" + " ".join(step_text(i) for i in items) + ")"
        case Symbol(name):
            return name
        case String(value):
            return '"' + value + '"'
    return str(node)


def run_scenario(scenario: Scenario, model: ModelId, policy: VerificationPolicy = VerificationPolicy.STRICT,
                 world: World | None = None) -> list[ScenarioRun]:
    """Run the script once per protocol of ``model`` (registration and authentication, or baseline)."""
    if not scenario.applicable(model):
        raise InapplicableScenario(f"scenario {scenario.id} does not apply to {model.name}")
    world = replace(world or World(), policy=policy)
    return [_run_one(scenario, model, world, p) for p in model.protocols]


def _run_one(scenario: Scenario, model: ModelId, world: World, protocol: Protocol) -> ScenarioRun:
    run = ScenarioRun(scenario, model, Network(world, model), protocol)
    for node in scenario.steps:
        before_events = len(run.network.state.events)
        before_kb = run.network.kb.terms
        _step(run, node)
        learned = sorted(t for t in run.network.kb.terms - before_kb if t.is_atom)
        run.log.append((step_text(node), before_events, learned))
    return run


def run_for_protocol(scenario: Scenario, model: ModelId, protocol: Protocol,
                     policy: VerificationPolicy = VerificationPolicy.STRICT, world: World | None = None) -> ScenarioRun:
    if not scenario.applicable(model):
        raise InapplicableScenario(f"scenario {scenario.id} does not apply to {model.name}")
    if protocol not in model.protocols:
        raise InapplicableScenario(f"{model.name} has no {protocol.value} protocol")
    return _run_one(scenario, model, replace(world or World(), policy=policy), protocol)


def _named(name: str) -> Scenario:
    return builtin_scenarios()[name]


def scenario_challenge_reissue(model: ModelId, protocol: Protocol = Protocol.AUTHENTICATION,
                               policy: VerificationPolicy = VerificationPolicy.STRICT) -> Bundle:
    return run_for_protocol(_named("challenge-reissue"), model, protocol, policy).bundle


def scenario_pms_compromise(model: ModelId, protocol: Protocol = Protocol.AUTHENTICATION,
                            policy: VerificationPolicy = VerificationPolicy.STRICT) -> Bundle:
    sc = _named("pms-compromise")
    if not sc.applicable(model):
        raise InapplicableScenario(f"pms-compromise needs a TLS1.2-RSA UAF model, not {model.name}")
    return run_for_protocol(sc, model, protocol, policy).bundle


def scenario_baseline_replay(policy: VerificationPolicy = VerificationPolicy.STRICT) -> Bundle:
    return run_for_protocol(_named("baseline-replay"), BASELINE, Protocol.BASELINE, policy).bundle
