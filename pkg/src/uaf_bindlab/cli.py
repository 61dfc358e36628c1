"""Command-line front end: ``uaf-bindlab matrix|attack|derive|honest``.

Exit codes: 0 outcome matches expectation, 1 verdict differs, 2 search
budget exceeded, 3 scenario inapplicable to the model.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bundle import Bundle
from .errors import BoundsExceeded, InapplicableScenario, ParseError
from .goals import goal1
from .knowledge import KnowledgeBase, derivable, explain
from .matrix import PUBLISHED_TABLE, run_matrix
from .protocols import run_honest
from .roles import World, roles_for
from .scenarios import ScenarioRun, builtin_scenarios, run_for_protocol
from .search import Bounds, default_budget
from .terms import parse, parse_many, to_text
from .uaf import MODELS, Protocol, VerificationPolicy, model_from_selector

EXIT_OK, EXIT_DIFF, EXIT_BUDGET, EXIT_INAPPLICABLE = 0, 1, 2, 3


def _model(selector: str):
    try:
        return model_from_selector(selector)
    except KeyError as err:
        raise argparse.ArgumentTypeError(err.args[0]) from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uaf-bindlab", description="Symbolic lab for UAF channel binding over TLS.")
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("matrix", help="compute the verdict matrix and compare it with the published table")
    m.add_argument("--policy", choices=[v.value for v in VerificationPolicy], default="strict")
    m.add_argument("--model", type=_model, action="append", help="restrict to one model (repeatable)")
    m.add_argument("--output", choices=["text", "json"], default="text")
    m.add_argument("--out", type=Path, help="also write the JSON matrix here")
    m.add_argument("--search-budget", type=int, default=None, help="state budget per exploration")
    m.add_argument("--clients", type=int, default=Bounds.clients, help="honest client sessions in the search")
    m.add_argument("--servers", type=int, default=Bounds.servers, help="honest server sessions in the search")
    m.add_argument("--no-search", action="store_true", help="scripted scenarios only")
    m.add_argument("--jobs", type=int, default=1, help="explorations to run in parallel")

    a = sub.add_parser("attack", help="replay a scripted attack with an annotated trace")
    a.add_argument("scenario", choices=sorted(builtin_scenarios()))
    a.add_argument("--model", type=_model, required=True)
    a.add_argument("--policy", choices=[v.value for v in VerificationPolicy], default="strict")
    a.add_argument("--protocol", choices=["reg", "auth", "baseline"], help="run only this protocol")
    a.add_argument("--output", choices=["text", "json"], default="text")

    d = sub.add_parser("derive", help="ask whether a knowledge base derives a term")
    d.add_argument("kb_file", type=Path, help="file of terms, one s-expression each")
    d.add_argument("target", help="term in canonical syntax")

    h = sub.add_parser("honest", help="print an honest run (used to regenerate golden traces)")
    h.add_argument("--model", type=_model, required=True)
    h.add_argument("--protocol", choices=["reg", "auth", "baseline"], help="run only this protocol")
    h.add_argument("--output", choices=["text", "json"], default="json")
    return p


# ---------------------------------------------------------------------------
# rendering


def render_events(bundle: Bundle, start: int = 0, stop: int | None = None) -> list[str]:
    lines = []
    for e in bundle.events[start:stop]:
        who = "adversary" if e.sid == "adversary" else f"{e.sid} ({e.role})"
        lines.append(f"  [{e.index}] {who} {e.direction}: {to_text(e.term)}")
    return lines


def _verdict_line(run: ScenarioRun) -> str:
    what = "credentials" if run.protocol is Protocol.BASELINE else "assertion"
    goal = "Goal 1 VIOLATED" if run.server_violated else "Goal 1 holds"
    if run.accepted:
        return f"server ACCEPTED {what} from adversary session; {goal}"
    return f"server REJECTED: {run.reason or 'incomplete'}"


def render_attack(run: ScenarioRun) -> str:
    b = run.bundle
    out = [f"# {run.scenario.id} on {run.model.name} ({run.protocol.value}, policy {run.network.world.policy.value})"]
    starts = [first for _, first, _ in run.log] + [len(b.events)]
    for i, (step, first, learned) in enumerate(run.log):
        out.append(step)
        out.extend(render_events(b, first, starts[i + 1]))
        if learned:
            out.append("  adversary learns: " + ", ".join(to_text(t) for t in learned))
    for s in b.strands:
        state = "completed" if s.done else f"halted ({s.reason})" if s.status == "halted" else "waiting"
        out.append(f"strand {s.sid} {s.role} agent={s.agent} peer={s.peer}: height {s.height}/{s.full_height}, {state}")
    out.append(_verdict_line(run))
    return "\n".join(out) + "\n"


def render_honest(bundle: Bundle, protocol: Protocol) -> str:
    out = [f"# honest {protocol.value} run of {bundle.model.name}"]
    out.extend(render_events(bundle))
    for role in roles_for(protocol):
        ok = goal1(bundle, role, bundle.model)
        out.append(f"goal 1 from {role.value}: {'holds' if ok else 'VIOLATED'}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# commands


def _protocols(model, chosen: str | None):
    if chosen is None:
        return model.protocols
    p = Protocol(chosen)
    if p not in model.protocols:
        raise InapplicableScenario(f"{model.name} has no {p.value} protocol")
    return (p,)


def cmd_matrix(args, out) -> int:
    budget = args.search_budget if args.search_budget is not None else default_budget()
    bounds = Bounds(clients=args.clients, servers=args.servers, budget=budget)
    models = tuple(m for m in MODELS if m in args.model) if args.model else MODELS
    try:
        mx = run_matrix(VerificationPolicy(args.policy), models, search=not args.no_search, bounds=bounds,
                        jobs=args.jobs)
    except BoundsExceeded as err:
        print(f"search budget exceeded: {err}", file=sys.stderr)
        return EXIT_BUDGET
    if args.out:
        args.out.write_text(mx.dumps())
    if args.output == "json":
        out.write(mx.dumps())
    else:
        out.write(mx.render())
    diffs = mx.diff(PUBLISHED_TABLE)
    for model, column, want, got in diffs:
        print(f"differs from published table: {model} / {column}: expected {want}, got {got}", file=sys.stderr)
    return EXIT_DIFF if diffs else EXIT_OK


def cmd_attack(args, out) -> int:
    scenario = builtin_scenarios()[args.scenario]
    policy = VerificationPolicy(args.policy)
    try:
        runs = [run_for_protocol(scenario, args.model, p, policy) for p in _protocols(args.model, args.protocol)]
    except InapplicableScenario as err:
        print(f"inapplicable: {err}", file=sys.stderr)
        return EXIT_INAPPLICABLE
    expected = scenario.expects_violation(args.model, policy)
    if args.output == "json":
        doc = [{"protocol": r.protocol.value, "accepted": r.accepted, "reason": r.reason,
                "goal1_violated": r.server_violated, "bundle": r.bundle.to_json()} for r in runs]
        out.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    else:
        out.write("\n".join(render_attack(r) for r in runs))
    return EXIT_OK if all(r.server_violated == expected for r in runs) else EXIT_DIFF


def cmd_derive(args, out) -> int:
    try:
        terms = parse_many(args.kb_file.read_text())
    except ParseError as err:
        print(f"{args.kb_file}:{err}", file=sys.stderr)
        return EXIT_DIFF
    try:
        target = parse(args.target)
    except ParseError as err:
        print(f"<target>:{err}", file=sys.stderr)
        return EXIT_DIFF
    kb = KnowledgeBase(frozenset(terms))
    if not derivable(kb, target):
        out.write("not derivable\n")
        return EXIT_OK
    out.write("derivable\n")
    out.write(explain(kb, target).render() + "\n")
    return EXIT_OK


def cmd_honest(args, out) -> int:
    try:
        protocols = _protocols(args.model, args.protocol)
    except InapplicableScenario as err:
        print(f"inapplicable: {err}", file=sys.stderr)
        return EXIT_INAPPLICABLE
    bundles = [(p, run_honest(args.model, p, World())) for p in protocols]
    if args.output == "json":
        doc = {p.value: b.to_json() for p, b in bundles}
        out.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    else:
        out.write("\n".join(render_honest(b, p) for p, b in bundles))
    return EXIT_OK


COMMANDS = {"matrix": cmd_matrix, "attack": cmd_attack, "derive": cmd_derive, "honest": cmd_honest}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return COMMANDS[args.command](args, sys.stdout)


if __name__ == "__main__":
    sys.exit(main())
