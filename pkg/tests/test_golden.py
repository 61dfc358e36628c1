import json
from pathlib import Path

import pytest

from uaf_bindlab.bundle import events_from_json
from uaf_bindlab.protocols import run_honest
from uaf_bindlab.roles import World
from uaf_bindlab.terms import to_text
from uaf_bindlab.uaf import MODELS

GOLDEN = Path(__file__).parent / "fixtures" / "golden"


def test_golden_set_is_complete():
    assert sorted(p.stem for p in GOLDEN.glob("*.json")) == sorted(m.selector for m in MODELS)


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.selector)
def test_honest_trace_matches_golden(model):
    want = json.loads((GOLDEN / f"{model.selector}.json").read_text())
    got = {p.value: run_honest(model, p, World()).to_json() for p in model.protocols}
    assert got == want


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.selector)
def test_golden_events_parse_back(model):
    doc = json.loads((GOLDEN / f"{model.selector}.json").read_text())
    for p in model.protocols:
        bundle = run_honest(model, p)
        events = events_from_json(doc[p.value])
        assert [e.term for e in events] == [e.term for e in bundle.events]
        assert [to_text(e.term) for e in events] == [e["term"] for e in doc[p.value]["events"]]
