"""The 13 x 4 verdict matrix: scripted scenarios plus bounded search per cell."""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

from .errors import MatrixMismatch, NotDerivable, ProtocolReject, SecrecyViolation
from .goals import COLUMNS, Column, Status, Verdict, goal1
from .network import replay
from .roles import Role, World, roles_for, server_view
from .scenarios import Scenario, builtin_scenarios, run_scenario
from .search import Bounds, explore
from .terms import SymEnc
from .uaf import MODELS, ModelId, Protocol, VerificationPolicy, verify_assertion

OK, VIOLATED = Status.SATISFIED.value, Status.VIOLATED.value


_Y, _N = OK, VIOLATED

# Published verdicts; columns as in COLUMNS (client-reg, server-reg, client-auth, server-auth).
PUBLISHED_TABLE: dict[str, tuple[str, ...]] = {
    "Baseline-NoUAF": (_Y, _N, _Y, _N),
    "UAF-NoBinding-TLS1.2-RSA": (_Y, _N, _Y, _N),
    "UAF-TokenBinding-TLS1.2-RSA": (_Y, _N, _Y, _N),
    "UAF-ChannelId-TLS1.2-RSA": (_Y, _N, _Y, _N),
    "UAF-Endpoint-TLS1.2-RSA": (_Y, _N, _Y, _N),
    "UAF-ServerCert-TLS1.2-RSA": (_Y, _N, _Y, _N),
    "UAF-NoBinding-TLS1.2-DH": (_Y, _N, _Y, _N),
    "UAF-TokenBinding-TLS1.2-DH": (_Y, _N, _Y, _N),
    "UAF-ChannelId-TLS1.2-DH": (_Y, _N, _Y, _N),
    "UAF-Endpoint-TLS1.2-DH": (_Y, _Y, _Y, _Y),
    "UAF-ServerCert-TLS1.2-DH": (_Y, _Y, _Y, _Y),
    "UAF-NoBinding-TLS1.3": (_Y, _N, _Y, _N),
    "UAF-Exporter-TLS1.3": (_Y, _Y, _Y, _Y),
}


@dataclass
class Matrix:
    policy: VerificationPolicy
    bounds: Bounds
    world: World
    models: tuple[ModelId, ...]
    cells: dict = field(default_factory=dict)  # (ModelId, Column) -> Verdict
    scenario_verdicts: dict = field(default_factory=dict)  # (ModelId, Role) -> Verdict from a script
    search_verdicts: dict = field(default_factory=dict)  # (ModelId, Role) -> Verdict from search

    def status(self, model: ModelId, column: Column) -> str:
        return self.cells[model, column].status.value

    def row(self, model: ModelId) -> tuple[str, ...]:
        return tuple(self.status(model, c) for c in COLUMNS)

    def counts(self) -> dict[str, int]:
        out = {OK: 0, VIOLATED: 0}
        for v in self.cells.values():
            out[v.status.value] += 1
        return out

    def diff(self, expected: dict | None = None) -> list[tuple[str, str, str, str]]:
        expected = PUBLISHED_TABLE if expected is None else expected
        out = []
        for m in self.models:
            want = expected[m.name]
            for c, w, g in zip(COLUMNS, want, self.row(m)):
                if w != g:
                    out.append((m.name, c.value, w, g))
        return out

    def to_json(self, witnesses: bool = True) -> dict:
        rows = []
        for m in self.models:
            cells = {}
            for c in COLUMNS:
                v = self.cells[m, c]
                cell = {"status": v.status.value, "source": v.source, "explored": v.explored}
                if witnesses and v.witness is not None:
                    cell["witness"] = v.witness.to_json()
                cells[c.value] = cell
            rows.append({"model": m.name, "selector": m.selector, "cells": cells})
        return {
            "policy": self.policy.value,
            "bounds": asdict(self.bounds),
            "columns": [c.value for c in COLUMNS],
            "rows": rows,
            "summary": self.counts(),
            "mismatches": [dict(zip(("model", "column", "expected", "got"), d)) for d in self.diff()],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"

    def render(self) -> str:
        header = ("model",) + tuple(c.value for c in COLUMNS)
        body = [(m.name,) + self.row(m) for m in self.models]
        widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]

        def line(cells):
            return "  ".join(s.ljust(w) for s, w in zip(cells, widths)).rstrip()

        out = [line(header), line(tuple("-" * w for w in widths))]
        out.extend(line(r) for r in body)
        n = self.counts()
        b = self.bounds
        out.append("")
        out.append(f"policy {self.policy.value}: {n[VIOLATED]} violated, {n[OK]} ok")
        out.append(
            f"ok = no violation found within bounds ({b.clients} client and {b.servers} server sessions, "
            f"{b.compromised} compromised premaster secret, synthesis depth {b.depth})"
        )
        return "\n".join(out) + "\n"


def _columns_for(model: ModelId, role: Role) -> list[Column]:
    return [c for c in COLUMNS if c.role_for(model) is role]


def _explore_job(args):
    model, protocol, world, bounds = args
    return model, explore(model, protocol, world, bounds)


def run_matrix(policy: VerificationPolicy = VerificationPolicy.STRICT, models: tuple[ModelId, ...] = MODELS,
               scenarios: dict[str, Scenario] | None = None, search: bool = True, bounds: Bounds | None = None,
               world: World | None = None, jobs: int = 1) -> Matrix:
    """Fill every cell from the scripted scenarios and, when ``search`` is set, the bounded search.

    A cell is violated when any source produces a witness; the scenario witness
    is preferred since it is the shorter story.
    """
    scenarios = builtin_scenarios() if scenarios is None else scenarios
    bounds = bounds or Bounds()
    world = replace(world or World(), policy=policy)
    mx = Matrix(policy, bounds, world, tuple(models))

    for m in models:
        for sc in scenarios.values():
            if not sc.applicable(m):
                continue
            for run in run_scenario(sc, m, policy, world):
                for role in roles_for(run.protocol):
                    if (m, role) not in mx.scenario_verdicts and run.violated(role):
                        mx.scenario_verdicts[m, role] = Verdict(Status.VIOLATED, m, role, run.bundle, sc.id)

    if search:
        work = [(m, p, world, bounds) for m in models for p in m.protocols]
        if jobs > 1:
            with ProcessPoolExecutor(jobs) as pool:
                results = list(pool.map(_explore_job, work))
        else:
            results = [_explore_job(w) for w in work]
        for m, res in results:
            for role, v in res.verdicts.items():
                mx.search_verdicts[m, role] = v

    for m in models:
        for p in m.protocols:
            for role in roles_for(p):
                v = mx.scenario_verdicts.get((m, role)) or mx.search_verdicts.get((m, role))
                if v is None:
                    v = Verdict(Status.SATISFIED, m, role, None, "none")
                for c in _columns_for(m, role):
                    mx.cells[m, c] = v
    return mx


def check_matrix(mx: Matrix, expected: dict | None = None) -> None:
    diffs = mx.diff(expected)
    if diffs:
        raise MatrixMismatch(diffs)


def audit_witness(verdict: Verdict, world: World | None = None) -> list[str]:
    """Re-run a violated verdict's witness; returns the problems found (empty when it stands).

    The action log is replayed through the network, so every delivery is
    re-checked for derivability and every honest strand re-runs its checks.
    Goal 1 must fail on the replayed bundle, and each assertion a server
    accepted must verify again under the policy.
    """
    if verdict.witness is None:
        return ["verdict has no witness"]
    world = world or World()
    try:
        ex = replay(world, verdict.model, verdict.witness.actions)
    except (NotDerivable, SecrecyViolation, ValueError) as err:
        return [f"replay failed: {err}"]
    problems = []
    if goal1(ex.bundle(), verdict.perspective, verdict.model, world=world):
        problems.append("goal 1 holds on the replayed bundle")
    for s in ex.strands:
        if s.role.is_client or s.role.protocol is Protocol.BASELINE or not s.done:
            continue
        last = [e.term for e in ex.events if e.sid == s.sid and e.direction == "recv"][-1]
        try:
            if not (isinstance(last, SymEnc) and last.key == s.session.cwk):
                raise ProtocolReject("response is not under the session's client write key")
            verify_assertion(server_view(s, world), last.payload, world.policy)
        except ProtocolReject as err:
            problems.append(f"{s.sid} accepted an assertion that does not verify: {err}")
    return problems
