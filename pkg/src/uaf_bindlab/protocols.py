"""Honest executions: the adversary forwards every message faithfully."""

from __future__ import annotations

from .bundle import Bundle
from .errors import reject_for
from .network import Network
from .roles import World, roles_for, tls_height
from .tls import TlsSession
from .uaf import BASELINE, ModelId, Protocol


def _relay(net: Network, a: str, b: str, stop) -> None:
    """Forward messages in order between strands ``a`` and ``b`` until ``stop()`` or quiescence."""
    while not stop():
        moved = False
        for dst, src in ((a, b), (b, a)):
            strand = net.strand(dst)
            consumed = sum(1 for e in net.state.events if e.sid == dst and e.direction == "recv")
            pending = net.state.sent(src)
            if strand.waiting and consumed < len(pending):
                strand = net.deliver(dst, pending[consumed])
                if strand.status == "halted":
                    raise reject_for(strand.reason, f"{dst} refused a faithfully forwarded message")
                moved = True
        if not moved:
            return


def handshake(net: Network, client: str, server: str) -> tuple[TlsSession, TlsSession]:
    """Run the TLS phase between two already spawned strands; returns (client session, server session)."""
    h = tls_height(net.state.model.tls)

    def established():
        return net.strand(client).pc >= h and net.strand(server).pc >= h

    _relay(net, client, server, established)
    c, s = net.strand(client), net.strand(server)
    if c.session is None or s.session is None:
        raise RuntimeError("handshake did not complete")
    return c.session, s.session


def run_honest(model: ModelId, protocol: Protocol, world: World | None = None) -> Bundle:
    world = world or World()
    croles, sroles = roles_for(protocol)
    net = Network(world, model)
    net.spawn(croles, "C1", world.server)
    net.spawn(sroles, "S1")
    handshake(net, "C1", "S1")
    _relay(net, "C1", "S1", lambda: net.strand("C1").done and net.strand("S1").done)
    if not (net.strand("C1").done and net.strand("S1").done):
        raise RuntimeError("honest run stalled")
    return net.bundle()


def run_baseline(world: World | None = None) -> Bundle:
    return run_honest(BASELINE, Protocol.BASELINE, world)


def run_registration(model: ModelId, world: World | None = None) -> Bundle:
    return run_honest(model, Protocol.REGISTRATION, world)


def run_authentication(model: ModelId, world: World | None = None) -> Bundle:
    return run_honest(model, Protocol.AUTHENTICATION, world)


def honest_bundles(model: ModelId, world: World | None = None) -> dict[Protocol, Bundle]:
    return {p: run_honest(model, p, world) for p in model.protocols}
