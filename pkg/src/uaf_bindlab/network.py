"""The adversary-controlled network.

Every honest send goes straight into the adversary's knowledge base, and
every delivery is an adversary synthesis that must be derivable at that
moment. :class:`Execution` is immutable so the bounded search can branch on
it; :class:`Network` is a mutable convenience wrapper for scripted runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .bundle import ADVERSARY, Bundle, Event, StrandTrace
from .errors import NotDerivable, ProtocolReject, SecrecyViolation
from .knowledge import KnowledgeBase, derivable
from .roles import Role, Strand, World, fresh_atom, halt, receive, start
from .terms import DhExponent, PremasterSecret, Term, to_text
from .uaf import ModelId

ADVERSARY_FRESH_KINDS = ("cr", "sr", "ch", "n", "pms", "x", "y", "user")


def adversary_fresh(world: World, kind: str) -> Term:
    """The adversary's own fresh value of the given kind (one per kind suffices within bounds)."""
    return fresh_atom(world.adversary, kind)


def initial_kb(world: World) -> KnowledgeBase:
    own = [adversary_fresh(world, k) for k in ADVERSARY_FRESH_KINDS]
    return world.adversary_kb().add(*own)


@dataclass(frozen=True)
class Execution:
    world: World
    model: ModelId
    strands: tuple[Strand, ...] = ()
    kb: KnowledgeBase = field(default=None, repr=False)
    events: tuple[Event, ...] = ()
    edges: tuple[tuple[int, int], ...] = ()
    timeline: tuple[KnowledgeBase, ...] = field(default=(), repr=False)
    actions: tuple = ()
    compromised: frozenset = frozenset()
    monitor: bool = True

    @classmethod
    def begin(cls, world: World, model: ModelId, monitor: bool = True) -> Execution:
        kb = initial_kb(world)
        return cls(world, model, kb=kb, timeline=(kb,), monitor=monitor)

    # -- lookups ----------------------------------------------------------

    def strand(self, sid: str) -> Strand:
        for s in self.strands:
            if s.sid == sid:
                return s
        raise KeyError(f"no strand named {sid}")

    def has(self, sid: str) -> bool:
        return any(s.sid == sid for s in self.strands)

    def sent(self, sid: str) -> list[Term]:
        return [e.term for e in self.events if e.sid == sid and e.direction == "send"]

    def derivable(self, t: Term) -> bool:
        return derivable(self.kb, t)

    # -- actions ----------------------------------------------------------

    def spawn(self, role: Role, sid: str, peer: str | None = None) -> Execution:
        if self.has(sid):
            raise ValueError(f"strand {sid} already exists")
        agent = self.world.client if role.is_client else self.world.server
        strand, out = start(role, sid, self.model, agent, peer, self.world)
        ex = replace(self, strands=self.strands + (strand,), actions=self.actions + (("spawn", role.value, sid, peer),))
        return ex._emit(strand, out)

    def deliver(self, sid: str, msg: Term) -> Execution:
        """Deliver ``msg`` to strand ``sid``. A refusal halts the strand and is recorded, not raised."""
        if not derivable(self.kb, msg):
            raise NotDerivable(f"adversary cannot derive {to_text(msg)}")
        target = self.strand(sid)
        if not target.waiting:
            raise ValueError(f"strand {sid} is not waiting for a message")
        try:
            result = receive(target, self.world, msg)
        except ProtocolReject as err:
            result = halt(target, err), []
        return self.delivered(sid, msg, result)

    def delivered(self, sid: str, msg: Term, result: tuple[Strand, list[Term]]) -> Execution:
        """Record a delivery whose outcome ``(strand, sent messages)`` was already computed."""
        target = self.strand(sid)
        strand, out = result
        events, edges = list(self.events), list(self.edges)
        origin = next((e.index for e in reversed(events) if e.direction == "send" and e.term == msg), None)
        if origin is None:
            origin = len(events)
            events.append(Event(origin, ADVERSARY, ADVERSARY, "synth", msg))
        recv = Event(len(events), sid, target.role.value, "recv", msg, strand.vars)
        events.append(recv)
        edges.append((origin, recv.index))
        ex = replace(
            self,
            strands=tuple(strand if s.sid == sid else s for s in self.strands),
            events=tuple(events),
            edges=tuple(edges),
            actions=self.actions + (("deliver", sid, msg),),
        )
        return ex._emit(strand, out)

    def leak(self, sid: str, var: str = "pms") -> Execution:
        """Hand a strand's secret to the adversary (premaster reuse or compromise)."""
        value = self.strand(sid).var(var)
        if not isinstance(value, PremasterSecret):
            raise ValueError(f"strand {sid} has no premaster secret to leak")
        ev = Event(len(self.events), ADVERSARY, ADVERSARY, "leak", value)
        kb = self.kb.add(value)
        ex = replace(
            self,
            kb=kb,
            events=self.events + (ev,),
            timeline=self.timeline + (kb,),
            actions=self.actions + (("leak", sid, var),),
            compromised=self.compromised | {sid},
        )
        ex.check_secrecy()
        return ex

    def _emit(self, strand: Strand, out: list[Term]) -> Execution:
        if not out:
            self.check_secrecy()
            return self
        base = len(self.events)
        evs = tuple(
            Event(base + i, strand.sid, strand.role.value, "send", m, strand.vars) for i, m in enumerate(out)
        )
        kb = self.kb.add(*out)
        ex = replace(self, events=self.events + evs, kb=kb, timeline=self.timeline + (kb,))
        ex.check_secrecy()
        return ex

    # -- invariants -------------------------------------------------------

    def adversary_generated(self, t: Term) -> bool:
        return getattr(t, "id", "").startswith(self.world.adversary + ".")

    def session_secret(self, s: Strand) -> bool:
        """Whether this strand's write keys must stay out of the adversary's reach."""
        if s.session is None:
            return False
        if s.model.tls.uses_dh:
            x, y = s.var("x"), s.var("y")
            return isinstance(x, DhExponent) and isinstance(y, DhExponent) and not (
                self.adversary_generated(x) or self.adversary_generated(y)
            )
        pms = s.var("pms")
        if pms is None or self.adversary_generated(pms):
            return False
        owner = pms.id.rsplit(".", 1)[0]
        if owner in self.compromised or not self.has(owner):
            return False
        return self.strand(owner).peer != self.world.adversary

    def check_secrecy(self) -> None:
        if not self.monitor:
            return
        for s in self.strands:
            if self.session_secret(s):
                for key in (s.session.cwk, s.session.swk):
                    if derivable(self.kb, key):
                        raise SecrecyViolation(f"adversary derives a write key of honest session {s.sid}")

    # -- output -----------------------------------------------------------

    def bundle(self) -> Bundle:
        traces = tuple(
            StrandTrace(s.sid, s.role.value, s.agent, s.peer, s.height, s.full_height, s.vars, s.status, s.reason)
            for s in self.strands
        )
        return Bundle(
            model=self.model,
            strands=traces,
            events=self.events,
            edges=self.edges,
            kb_timeline=self.timeline,
            compromised=self.compromised,
            honest_agents=self.world.honest_principals,
            actions=self.actions,
        )


def replay(world: World, model: ModelId, actions) -> Execution:
    """Rebuild an execution from its action log."""
    ex = Execution.begin(world, model)
    for act in actions:
        match act:
            case ("spawn", role, sid, peer):
                ex = ex.spawn(Role(role), sid, peer)
            case ("deliver", sid, msg):
                ex = ex.deliver(sid, msg)
            case ("leak", sid, var):
                ex = ex.leak(sid, var)
            case _:
                raise ValueError(f"unknown action {act!r}")
    return ex


class Network:
    """Mutable handle on an execution, for scripts and honest runs."""

    def __init__(self, world: World, model: ModelId):
        self.state = Execution.begin(world, model)

    @property
    def world(self) -> World:
        return self.state.world

    @property
    def kb(self) -> KnowledgeBase:
        return self.state.kb

    def spawn(self, role: Role, sid: str, peer: str | None = None) -> Strand:
        self.state = self.state.spawn(role, sid, peer)
        return self.state.strand(sid)

    def deliver(self, sid: str, msg: Term) -> Strand:
        self.state = self.state.deliver(sid, msg)
        return self.state.strand(sid)

    def forward(self, src: str, dst: str, index: int = -1) -> Strand:
        return self.deliver(dst, self.state.sent(src)[index])

    def leak(self, sid: str, var: str = "pms") -> None:
        self.state = self.state.leak(sid, var)

    def strand(self, sid: str) -> Strand:
        return self.state.strand(sid)

    def bundle(self) -> Bundle:
        return self.state.bundle()
