import json

import pytest

from uaf_bindlab.bundle import events_from_json
from uaf_bindlab.cli import build_parser, main
from uaf_bindlab.errors import MatrixMismatch
from uaf_bindlab.goals import COLUMNS, Status
from uaf_bindlab.matrix import PUBLISHED_TABLE, check_matrix, run_matrix
from uaf_bindlab.uaf import MODELS, VerificationPolicy, model_from_selector

FAST = (model_from_selector("uaf-nobinding-tls13"), model_from_selector("uaf-exporter-tls13"))


def test_published_table_totals():
    cells = [c for row in PUBLISHED_TABLE.values() for c in row]
    assert (cells.count("violated"), cells.count("ok")) == (20, 32)
    assert set(PUBLISHED_TABLE) == {m.name for m in MODELS}


def test_empty_scenarios_no_search_all_satisfied():
    mx = run_matrix(scenarios={}, search=False)
    assert mx.counts() == {"ok": 52, "violated": 0}
    assert all(v.status is Status.SATISFIED and v.source == "none" for v in mx.cells.values())
    with pytest.raises(MatrixMismatch) as err:
        check_matrix(mx)
    assert len(err.value.diffs) == 20


def test_matrix_fast_rows_and_json_round_trip():
    mx = run_matrix(models=FAST)
    assert mx.diff() == []
    check_matrix(mx)
    doc = json.loads(mx.dumps())
    assert doc["columns"] == [c.value for c in COLUMNS]
    assert doc["summary"] == {"ok": 6, "violated": 2}
    cell = doc["rows"][0]["cells"]["server-auth"]
    assert cell["status"] == "violated"
    events = events_from_json(cell["witness"])
    assert events and all(e.term is not None for e in events)
    ok = doc["rows"][1]["cells"]["server-auth"]
    assert ok["status"] == "ok" and "witness" not in ok


def test_matrix_render_states_bounds():
    text = run_matrix(models=FAST[1:], search=False).render()
    assert text.splitlines()[0].split() == ["model", "client-reg", "server-reg", "client-auth", "server-auth"]
    assert "no violation found within bounds" in text


def test_cli_matrix_single_model(capsys, tmp_path):
    out = tmp_path / "m.json"
    assert main(["matrix", "--model", "uaf-exporter-tls13", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    rows = [l for l in text.splitlines() if l.startswith("UAF-")]
    assert rows == [l for l in text.splitlines() if "Exporter" in l]
    assert len(rows) == 1
    assert json.loads(out.read_text())["rows"][0]["model"] == "UAF-Exporter-TLS1.3"


def test_cli_matrix_output_deterministic(capsys):
    main(["matrix", "--model", "uaf-nobinding-tls13", "--output", "json"])
    first = capsys.readouterr().out
    main(["matrix", "--model", "uaf-nobinding-tls13", "--output", "json"])
    assert capsys.readouterr().out == first


def test_cli_matrix_lenient_differs(capsys):
    assert main(["matrix", "--model", "uaf-exporter-tls13", "--policy", "lenient", "--no-search"]) == 1
    assert "differs from published table" in capsys.readouterr().err


def test_cli_matrix_budget(capsys):
    assert main(["matrix", "--model", "uaf-exporter-tls13", "--search-budget", "5"]) == 2
    assert "budget" in capsys.readouterr().err


def test_cli_attack_accept(capsys):
    assert main(["attack", "challenge-reissue", "--model", "uaf-nobinding-tls12-dh"]) == 0
    out = capsys.readouterr().out
    assert out.rstrip().endswith("server ACCEPTED assertion from adversary session; Goal 1 VIOLATED")


def test_cli_attack_reject(capsys):
    assert main(["attack", "challenge-reissue", "--model", "uaf-exporter-tls13"]) == 0
    assert capsys.readouterr().out.rstrip().endswith("server REJECTED: BindingMismatch")


def test_cli_attack_inapplicable(capsys):
    assert main(["attack", "pms-compromise", "--model", "uaf-nobinding-tls13"]) == 3


def test_cli_attack_json(capsys):
    assert main(["attack", "baseline-replay", "--model", "baseline-nouaf", "--output", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc[0]["goal1_violated"] is True and doc[0]["protocol"] == "baseline"


def test_cli_unknown_model_is_usage_error(capsys):
    with pytest.raises(SystemExit) as err:
        main(["attack", "challenge-reissue", "--model", "uaf-nope"])
    assert err.value.code == 2
    assert "valid names" in capsys.readouterr().err


@pytest.mark.parametrize(
    "kb, target, verdict",
    [
        ('(senc (symkey (nonce "k")) (nonce "m"))\n(symkey (nonce "k"))', '(nonce "m")', "derivable"),
        ('(senc (symkey (nonce "k")) (nonce "m"))', '(nonce "m")', "not derivable"),
        ('(dh-exp "x")\n(dh-pub (dh-exp "y"))', '(dh-shared (dh-exp "x") (dh-exp "y"))', "derivable"),
        ('; a comment\n(hash (nonce "c"))', '(nonce "c")', "not derivable"),
    ],
)
def test_cli_derive(tmp_path, capsys, kb, target, verdict):
    f = tmp_path / "kb.txt"
    f.write_text(kb)
    assert main(["derive", str(f), target]) == 0
    assert capsys.readouterr().out.splitlines()[0] == verdict


def test_cli_derive_parse_error_position(tmp_path, capsys):
    f = tmp_path / "kb.txt"
    f.write_text('(nonce "a")\n  (frob "b")')
    assert main(["derive", str(f), '(nonce "a")']) == 1
    assert f"{f}:2:4:" in capsys.readouterr().err


def test_cli_honest_text(capsys):
    assert main(["honest", "--model", "uaf-servercert-tls12-dh", "--protocol", "reg", "--output", "text"]) == 0
    out = capsys.readouterr().out
    assert "goal 1 from server-reg: holds" in out


def test_parser_defaults():
    args = build_parser().parse_args(["matrix"])
    assert args.policy == VerificationPolicy.STRICT.value
    assert (args.clients, args.servers, args.jobs) == (1, 2, 1)
