"""Session-context agreement: successful completion, unique completion and Goal 1."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .bundle import Bundle, StrandTrace
from .roles import ROLE_HEIGHTS, Role, World
from .tls import TlsVariant
from .uaf import ModelId, Protocol


class ContextId(enum.Enum):
    TLS_RSA = "tls-rsa"
    TLS_DH = "tls-dh"
    BASELINE = "baseline"
    REGISTRATION = "registration"
    AUTHENTICATION = "authentication"


@dataclass(frozen=True)
class FactCheck:
    """Both strands bind ``var`` and bind it to the same term."""

    var: str

    def holds(self, a: StrandTrace, b: StrandTrace) -> bool:
        va, vb = a.var(self.var), b.var(self.var)
        return va is not None and va == vb


@dataclass(frozen=True)
class SessionContextSpec:
    id: ContextId
    facts: tuple[FactCheck, ...]

    def agree(self, a: StrandTrace, b: StrandTrace) -> bool:
        return all(f.holds(a, b) for f in self.facts)

    def with_fact(self, var: str) -> SessionContextSpec:
        return SessionContextSpec(self.id, self.facts + (FactCheck(var),))


def _facts(*names: str) -> tuple[FactCheck, ...]:
    return tuple(FactCheck(n) for n in names)


TLS_RSA_CTX = SessionContextSpec(ContextId.TLS_RSA, _facts("server", "ca", "cr", "sr", "pms"))
TLS_DH_CTX = SessionContextSpec(ContextId.TLS_DH, _facts("server", "ca", "cr", "sr", "x", "y"))

_APP_FACTS = {
    Protocol.BASELINE: (ContextId.BASELINE, ("username", "server", "pw")),
    Protocol.REGISTRATION: (ContextId.REGISTRATION, ("challenge", "username", "server", "appid")),
    Protocol.AUTHENTICATION: (ContextId.AUTHENTICATION, ("challenge", "server", "appid")),
}


def context_for(model: ModelId, protocol: Protocol) -> SessionContextSpec:
    tls = TLS_RSA_CTX if model.tls is TlsVariant.TLS12_RSA else TLS_DH_CTX
    cid, extra = _APP_FACTS[protocol]
    facts = tls.facts + tuple(FactCheck(v) for v in extra if FactCheck(v) not in tls.facts)
    return SessionContextSpec(cid, facts)


# ---------------------------------------------------------------------------
# perspective assumptions


@dataclass(frozen=True)
class ClientAssumptions:
    """The client's intended server is honest and its own randoms and premaster secret are fresh and secret."""

    adversary: str = World().adversary

    def admits(self, s: StrandTrace, bundle: Bundle) -> bool:
        return s.peer is not None and s.peer != self.adversary and s.sid not in bundle.compromised


@dataclass(frozen=True)
class ServerAssumptions:
    """The server's key is secret and it issues a fresh challenge per session.

    Both hold by construction for honest server strands; the client's
    premaster secret is not assumed fresh from this side.
    """

    def admits(self, s: StrandTrace, bundle: Bundle) -> bool:
        return True


def assumptions_for(role: Role, world: World | None = None):
    world = world or World()
    return ClientAssumptions(world.adversary) if role.is_client else ServerAssumptions()


# ---------------------------------------------------------------------------
# Definitions


def _candidates(bundle: Bundle, role_b: Role, j: int) -> list[StrandTrace]:
    # Partners are honest role strands; adversary behaviour has no strands here.
    return [s for s in bundle.of_role(role_b.value) if s.height >= j and s.agent in bundle.honest_agents]


def _subjects(bundle: Bundle, role_a: Role, assumptions, i: int) -> list[StrandTrace]:
    return [s for s in bundle.of_role(role_a.value) if s.height >= i and assumptions.admits(s, bundle)]


def successful_completion(bundle: Bundle, role_a: Role, role_b: Role, ctx: SessionContextSpec,
                          assumptions, i: int, j: int) -> bool:
    partners = _candidates(bundle, role_b, j)
    return all(any(ctx.agree(s, p) for p in partners) for s in _subjects(bundle, role_a, assumptions, i))


def unique_completion(bundle: Bundle, role_a: Role, ctx: SessionContextSpec, assumptions, i: int, j: int,
                      role_b: Role | None = None) -> bool:
    role_b = role_b or role_a.complement
    partners = _candidates(bundle, role_b, j)
    for s in _subjects(bundle, role_a, assumptions, i):
        if sum(1 for p in partners if ctx.agree(s, p)) > 1:
            return False
    return True


def goal1(bundle: Bundle, perspective: Role, model: ModelId, ctx: SessionContextSpec | None = None,
          world: World | None = None) -> bool:
    """Session context agreement from ``perspective``: some partner height j gives completion and uniqueness."""
    protocol = perspective.protocol
    ctx = ctx or context_for(model, protocol)
    role_b = perspective.complement
    assumptions = assumptions_for(perspective, world)
    i = ROLE_HEIGHTS[perspective, model.tls]
    for j in range(ROLE_HEIGHTS[role_b, model.tls] + 1):
        if successful_completion(bundle, perspective, role_b, ctx, assumptions, i, j) and unique_completion(
            bundle, perspective, ctx, assumptions, i, j, role_b
        ):
            return True
    return False


def violating_strands(bundle: Bundle, perspective: Role, model: ModelId, world: World | None = None) -> list[str]:
    """Completed, admissible perspective strands that have no unique partner at any height."""
    ctx = context_for(model, perspective.protocol)
    assumptions = assumptions_for(perspective, world)
    i = ROLE_HEIGHTS[perspective, model.tls]
    partners = _candidates(bundle, perspective.complement, 0)
    out = []
    for s in _subjects(bundle, perspective, assumptions, i):
        if sum(1 for p in partners if ctx.agree(s, p)) != 1:
            out.append(s.sid)
    return out


# ---------------------------------------------------------------------------
# verdicts and matrix columns


class Column(enum.Enum):
    CLIENT_REG = "client-reg"
    SERVER_REG = "server-reg"
    CLIENT_AUTH = "client-auth"
    SERVER_AUTH = "server-auth"

    def role_for(self, model: ModelId) -> Role:
        """Baseline has a single protocol; its client and server roles answer both reg and auth columns."""
        if model.baseline:
            return Role.CLIENT if self.value.startswith("client") else Role.SERVER
        return Role(self.value)


COLUMNS = tuple(Column)


class Status(enum.Enum):
    SATISFIED = "ok"
    VIOLATED = "violated"


@dataclass(frozen=True)
class Verdict:
    status: Status
    model: ModelId
    perspective: Role
    witness: Bundle | None = None
    source: str = ""  # scenario name or "search"
    explored: int = 0

    def __post_init__(self):
        if self.status is Status.VIOLATED and self.witness is None:
            raise ValueError("a violated verdict needs a witness bundle")

    @property
    def cell(self) -> tuple[ModelId, Role]:
        return self.model, self.perspective

    @property
    def violated(self) -> bool:
        return self.status is Status.VIOLATED

    def describe(self) -> str:
        if self.violated:
            return f"violated (witness from {self.source})"
        return "ok (no violation found within bounds)"
