"""Recorded executions: strand traces, events, causal edges and JSON traces."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .knowledge import KnowledgeBase
from .terms import Term, parse, to_text

ADVERSARY = "adversary"


@dataclass(frozen=True)
class Event:
    index: int
    sid: str
    role: str
    direction: str  # send | recv | synth | leak
    term: Term
    vars: tuple = ()

    def to_json(self) -> dict:
        return {
            "strand": self.sid,
            "role": self.role,
            "direction": self.direction,
            "term": to_text(self.term),
            "vars": {k: to_text(v) for k, v in self.vars},
        }

    @classmethod
    def from_json(cls, index: int, d: dict) -> Event:
        vars_ = tuple(sorted((k, parse(v)) for k, v in d["vars"].items()))
        return cls(index, d["strand"], d["role"], d["direction"], parse(d["term"]), vars_)


@dataclass(frozen=True)
class StrandTrace:
    sid: str
    role: str
    agent: str
    peer: str | None
    height: int
    full_height: int
    vars: tuple
    status: str
    reason: str | None = None

    def var(self, name: str, default=None):
        for k, v in self.vars:
            if k == name:
                return v
        return default

    @property
    def done(self) -> bool:
        return self.status == "done"


@dataclass(frozen=True)
class Bundle:
    model: object  # ModelId
    strands: tuple[StrandTrace, ...]
    events: tuple[Event, ...]
    edges: tuple[tuple[int, int], ...]
    kb_timeline: tuple[KnowledgeBase, ...] = field(repr=False, default=())
    compromised: frozenset = frozenset()  # sids whose pms was handed to the adversary
    honest_agents: frozenset = frozenset()
    actions: tuple = field(repr=False, default=())

    def strand(self, sid: str) -> StrandTrace:
        for s in self.strands:
            if s.sid == sid:
                return s
        raise KeyError(sid)

    def of_role(self, role: str) -> list[StrandTrace]:
        return [s for s in self.strands if s.role == role]

    @property
    def adversary_kb(self) -> KnowledgeBase | None:
        return self.kb_timeline[-1] if self.kb_timeline else None

    def to_json(self) -> dict:
        return {
            "model": self.model.selector,
            "strands": [
                {
                    "strand": s.sid,
                    "role": s.role,
                    "agent": s.agent,
                    "peer": s.peer,
                    "height": s.height,
                    "status": s.status,
                    "reason": s.reason,
                    "vars": {k: to_text(v) for k, v in s.vars},
                }
                for s in self.strands
            ],
            "events": [e.to_json() for e in self.events],
            "edges": [list(e) for e in self.edges],
            "compromised": sorted(self.compromised),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"


def events_from_json(doc: dict) -> list[Event]:
    return [Event.from_json(i, d) for i, d in enumerate(doc["events"])]
