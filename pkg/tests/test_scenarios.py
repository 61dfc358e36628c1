import pytest

from uaf_bindlab.errors import BindingMismatch, InapplicableScenario, ParseError
from uaf_bindlab.goals import goal1
from uaf_bindlab.roles import Role
from uaf_bindlab.scenarios import (
    builtin_scenarios,
    parse_scenario,
    run_for_protocol,
    run_scenario,
    scenario_baseline_replay,
    scenario_challenge_reissue,
    scenario_pms_compromise,
)
from uaf_bindlab.uaf import BASELINE, MODELS, Protocol, VerificationPolicy, model_from_selector

REISSUE = builtin_scenarios()["challenge-reissue"]
LENIENT = VerificationPolicy.LENIENT


def m(sel):
    return model_from_selector(sel)


def test_builtin_scenarios_loaded():
    assert set(builtin_scenarios()) == {"challenge-reissue", "pms-compromise", "baseline-replay"}


@pytest.mark.parametrize("sel", ["uaf-nobinding-tls12-dh", "uaf-tokenbinding-tls12-dh", "uaf-channelid-tls12-rsa",
                                 "uaf-nobinding-tls13"])
def test_reissue_accepted_on_unbound_and_client_side_bindings(sel):
    b = scenario_challenge_reissue(m(sel))
    assert b.strand("S1").done
    assert not goal1(b, Role.SERVER_AUTH, m(sel))


@pytest.mark.parametrize("sel", ["uaf-servercert-tls12-dh", "uaf-endpoint-tls12-rsa", "uaf-exporter-tls13"])
def test_reissue_rejected_on_server_side_bindings(sel):
    b = scenario_challenge_reissue(m(sel))
    assert b.strand("S1").reason == BindingMismatch.reason
    assert goal1(b, Role.SERVER_AUTH, m(sel))


@pytest.mark.parametrize("sel", ["uaf-servercert-tls12-dh", "uaf-endpoint-tls12-dh"])
def test_reissue_accepted_under_lenient(sel):
    b = scenario_challenge_reissue(m(sel), policy=LENIENT)
    assert b.strand("S1").done
    assert not goal1(b, Role.SERVER_AUTH, m(sel))


def test_reissue_exporter_lenient_accepted():
    # lenient servers skip every binding check, exporter included
    b = scenario_challenge_reissue(m("uaf-exporter-tls13"), policy=LENIENT)
    assert b.strand("S1").done


@pytest.mark.parametrize("sel", ["uaf-servercert-tls12-rsa", "uaf-nobinding-tls12-rsa", "uaf-endpoint-tls12-rsa"])
def test_pms_compromise_violates_rsa_models(sel):
    for p in (Protocol.REGISTRATION, Protocol.AUTHENTICATION):
        b = scenario_pms_compromise(m(sel), p)
        assert b.strand("S2").done
        server = Role.SERVER_REG if p is Protocol.REGISTRATION else Role.SERVER_AUTH
        assert not goal1(b, server, m(sel))
        # the victim client is compromised, so its own perspective is not judged
        assert goal1(b, server.complement, m(sel))


@pytest.mark.parametrize("sel", ["uaf-exporter-tls13", "uaf-servercert-tls12-dh"])
def test_pms_compromise_inapplicable(sel):
    with pytest.raises(InapplicableScenario):
        scenario_pms_compromise(m(sel))


def test_baseline_replay():
    b = scenario_baseline_replay()
    assert b.strand("S1").done
    assert not goal1(b, Role.SERVER, BASELINE)
    assert goal1(b, Role.CLIENT, BASELINE)


def test_scenario_applicability():
    with pytest.raises(InapplicableScenario):
        run_scenario(REISSUE, BASELINE)
    with pytest.raises(InapplicableScenario):
        run_for_protocol(REISSUE, m("uaf-nobinding-tls13"), Protocol.BASELINE)


def test_expectations_match_outcomes_everywhere():
    for sc in builtin_scenarios().values():
        for model in MODELS:
            if not sc.applicable(model):
                continue
            for policy in VerificationPolicy:
                runs = run_scenario(sc, model, policy)
                want = sc.expects_violation(model, policy)
                assert all(r.server_violated == want for r in runs), (sc.id, model.name, policy)


def test_run_log_records_steps_and_learned_atoms():
    run = run_for_protocol(REISSUE, m("uaf-nobinding-tls12-dh"), Protocol.AUTHENTICATION)
    steps = [s for s, _, _ in run.log]
    assert steps[0] == "(spawn-server S1)"
    assert any(learned for _, _, learned in run.log)


def test_parse_scenario_errors_have_positions():
    with pytest.raises(ParseError) as err:
        parse_scenario("(scenario x (target S1) (frob))")
    assert (err.value.line, err.value.column) == (1, 25)
    with pytest.raises(ParseError):
        parse_scenario("(scenario x (requires quantum) (target S1))")
    with pytest.raises(ParseError):
        parse_scenario("(scenario x)")


def test_unknown_step_is_a_parse_error():
    sc = parse_scenario("(scenario x (target S1) (steps (teleport S1)))")
    with pytest.raises(ParseError):
        run_scenario(sc, m("uaf-nobinding-tls12-dh"))
