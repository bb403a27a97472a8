"""Scenario file parsing, validation addressing, and round trips."""

import math

import numpy as np
import pytest

from actinf.errors import ScenarioError
from actinf.scenario import (
    FALLBACK_POLICY,
    builtin_scenario_path,
    discretized_gaussian,
    load_scenario,
    resolve_scenario,
    save_scenario,
)

MINIMAL = """\
[states]
labels = ok bad

[channels]
indicator = fine odd

[actions]
labels = look ask_for_help
look.primitive = measure
look.observes = indicator
ask_for_help.primitive = ask_human
ask_for_help.observes = indicator

[A]
indicator.ok = 0.9 0.1
indicator.bad = 0.2 0.8

[B]
look = identity
ask_for_help.ok = 1.0 0.0
ask_for_help.bad = absorb

[C]
calm.channel = indicator
calm.weight = 0.9
calm.prefer = fine
calm.avoid = odd

[D]
initial = 0.7 0.3

[policies]
watch = look look
ask_human = ask_for_help look

[environment]
start_channel = indicator

[agent]
fallback_policy = ask_human
probe_channel = indicator
"""


@pytest.fixture()
def assay():
    return resolve_scenario("lab_assay")


def test_minimal_inline_scenario_loads():
    scenario = load_scenario(MINIMAL)
    assert scenario.name == "inline"
    assert scenario.model.states == ("ok", "bad")
    assert scenario.model.actions == ("look", "ask_for_help")
    assert [p.label for p in scenario.model.policies] == ["watch", FALLBACK_POLICY]
    assert scenario.actions["look"].observes == "indicator"
    assert scenario.env.start_channel == "indicator"
    # identity and absorb shorthands
    assert np.array_equal(scenario.model.b.matrix("look"), np.eye(2))
    assert np.array_equal(scenario.model.b.matrix("ask_for_help")[1], [0.0, 1.0])


def test_load_from_path_names_after_the_file(tmp_path):
    path = tmp_path / "bench_demo.ini"
    path.write_text(MINIMAL, encoding="utf-8")
    scenario = load_scenario(str(path))
    assert scenario.name == "bench_demo"


def test_missing_section_is_addressed():
    broken = MINIMAL.replace("[D]\ninitial = 0.7 0.3\n", "")
    with pytest.raises(ScenarioError, match=r"missing \[D\] section"):
        load_scenario(broken)


def test_wrong_row_width_is_addressed():
    broken = MINIMAL.replace("indicator.ok = 0.9 0.1", "indicator.ok = 0.9")
    with pytest.raises(ScenarioError, match=r"\[A\] indicator.ok: expected 2 entries"):
        load_scenario(broken)


def test_non_normalized_row_fails_model_validation():
    broken = MINIMAL.replace("indicator.ok = 0.9 0.1", "indicator.ok = 0.6 0.3")
    with pytest.raises(ScenarioError, match="invalid model"):
        load_scenario(broken)


def test_unknown_observed_channel_is_addressed():
    broken = MINIMAL.replace("look.observes = indicator", "look.observes = nope")
    with pytest.raises(ScenarioError, match=r"\[actions\] look.observes: unknown channel"):
        load_scenario(broken)


def test_unknown_agent_key_is_addressed():
    broken = MINIMAL + "mystery = 3\n"
    with pytest.raises(ScenarioError, match=r"\[agent\] mystery: unknown AgentConfig field"):
        load_scenario(broken)


def test_missing_fallback_policy_is_rejected():
    broken = MINIMAL.replace("ask_human = ask_for_help look", "helpline = ask_for_help look")
    with pytest.raises(ScenarioError, match="must declare the 'ask_human' fallback"):
        load_scenario(broken)


def test_policy_with_unknown_action_is_rejected():
    broken = MINIMAL.replace("watch = look look", "watch = look shake")
    with pytest.raises(ScenarioError, match="unknown action 'shake'"):
        load_scenario(broken)


def test_duplicate_keys_are_rejected():
    broken = MINIMAL.replace("[D]\ninitial = 0.7 0.3", "[D]\ninitial = 0.7 0.3\ninitial = 1 0")
    with pytest.raises(ScenarioError):
        load_scenario(broken)


def test_bad_gauss_spec_is_addressed():
    numeric = (
        MINIMAL.replace("indicator = fine odd", "indicator = 1.0 2.0")
        .replace("calm.prefer = fine", "calm.prefer = 1.0")
        .replace("calm.avoid = odd", "calm.avoid = 2.0")
    )
    broken = numeric.replace("indicator.ok = 0.9 0.1", "indicator.ok = gauss 7.4")
    with pytest.raises(ScenarioError, match=r"\[A\] indicator.ok: bad gauss spec"):
        load_scenario(broken)
    okay = numeric.replace("indicator.ok = 0.9 0.1", "indicator.ok = gauss 1.0 0.3")
    assert load_scenario(okay).model.a.matrices["indicator"][0].sum() == pytest.approx(1.0)


def test_gauss_on_textual_channel_is_rejected():
    broken = MINIMAL.replace("indicator.ok = 0.9 0.1", "indicator.ok = gauss 7.4 0.2")
    with pytest.raises(ScenarioError, match="non-numeric"):
        load_scenario(broken)


def test_span_shorthand_builds_numeric_grids(assay):
    probe = assay.model.channels["phProbe"]
    assert len(probe) == 31
    assert probe[0] == "5.5" and probe[-1] == "8.5"
    fluor = assay.model.channels["fluorescence"]
    assert len(fluor) == 23
    assert fluor[0] == "0" and fluor[1] == "5" and fluor[-1] == "110"
    temp = assay.model.channels["tempProbe"]
    assert len(temp) == 121
    assert temp[0] == "15.0" and temp[-1] == "75.0"


def test_discretized_gaussian_sums_to_one_with_tail_absorption():
    values = np.arange(5.5, 8.55, 0.1)
    row = discretized_gaussian(values, mu=7.4, sigma=0.15)
    assert math.isclose(row.sum(), 1.0, abs_tol=1e-12)
    assert values[int(np.argmax(row))] == pytest.approx(7.4)
    # an off-grid mean pushes its mass into the nearest edge bin
    skewed = discretized_gaussian(values, mu=3.0, sigma=0.2)
    assert skewed[0] == pytest.approx(1.0)


def test_discretized_gaussian_rejects_bad_sigma():
    with pytest.raises(ScenarioError):
        discretized_gaussian(np.array([1.0, 2.0]), mu=1.5, sigma=0.0)


def test_uniform_shorthand(assay):
    spill_row = assay.model.a.matrices["phProbe"][2]  # spill state
    assert np.allclose(spill_row, 1.0 / 31)


def test_bundled_assay_shape(assay):
    model = assay.model
    assert model.states == ("ph_ok", "ph_acidic", "spill", "restarted")
    assert len(model.channels) == 5
    assert len(model.actions) == 6
    assert [p.label for p in model.policies] == [
        "measure_then_titrate",
        "add_base_immediately",
        "ask_human",
        "discard_restart",
    ]
    assert all(p.horizon == 2 for p in model.policies)
    assert np.array_equal(model.d.probs, [0.85, 0.15, 0.0, 0.0])
    assert {e.weight for e in model.c.entries} == {0.95, 0.90, 0.85, 0.80, 0.75}
    assert assay.agent.fallback_policy == "ask_human"
    assert assay.actions["titrate_NaOH_careful"].params["volume_ul"] == "auto"
    assert assay.actions["titrate_NaOH_careful"].observes == "indicatorColor"
    assert assay.actions["measure_pH"].observes == "phProbe"


def test_numeric_predicates_expand_to_outcome_sets(assay):
    by_name = {e.name: e for e in assay.model.c.entries}
    assert by_name["enzyme_integrity"].prefer == ("90", "95", "100", "105", "110")
    assert by_name["probe_in_band"].avoid == ("8.0", "8.1", "8.2", "8.3", "8.4", "8.5")
    assert by_name["no_alkaline_overshoot"].avoid == ("blue",)
    assert by_name["temp_stability"].prefer == ("21.5", "22.0", "22.5")


def test_predicate_with_unknown_literal_is_addressed():
    broken = MINIMAL.replace("calm.avoid = odd", "calm.avoid = weird")
    with pytest.raises(ScenarioError, match=r"\[C\] calm.avoid: unknown outcome 'weird'"):
        load_scenario(broken)


def test_compiled_preferences_downweight_avoided_outcomes(assay):
    indicator = assay.model.c.channel_priors["indicatorColor"]
    assert indicator.prob("blue") < 0.01
    assert indicator.prob("green") == indicator.prob("yellow")  # neither preferred
    assert math.isclose(float(np.sum(indicator.probs)), 1.0, abs_tol=1e-12)
    fluor = assay.model.c.channel_priors["fluorescence"]
    assert fluor.prob("100") > fluor.prob("0")  # bright readings preferred
    spill = assay.model.c.channel_priors["spillDetector"]
    assert spill.prob("positive") < 0.01


def test_save_load_round_trip_is_exact(assay):
    text = save_scenario(assay)
    again = load_scenario(text, name=assay.name)
    assert again.model.states == assay.model.states
    for ch in assay.model.channels:
        assert np.array_equal(again.model.a.matrices[ch], assay.model.a.matrices[ch])
    for action in assay.model.actions:
        assert np.array_equal(again.model.b.matrix(action), assay.model.b.matrix(action))
    assert np.array_equal(again.model.d.probs, assay.model.d.probs)
    for ch in assay.model.channels:
        assert np.array_equal(
            again.model.c.channel_priors[ch].probs,
            assay.model.c.channel_priors[ch].probs,
        )
    assert [p.label for p in again.model.policies] == [p.label for p in assay.model.policies]
    assert again.env == assay.env
    assert again.agent == assay.agent
    assert save_scenario(again) == text


def test_save_to_file(tmp_path, assay):
    path = tmp_path / "out.ini"
    text = save_scenario(assay, path=str(path))
    assert path.read_text(encoding="utf-8") == text


def test_resolve_bundled_and_unknown_names():
    assert resolve_scenario("lab_assay").name == "lab_assay"
    assert builtin_scenario_path("lab_assay").endswith("lab_assay.ini")
    with pytest.raises(ScenarioError, match="no bundled scenario named 'nope'"):
        resolve_scenario("nope")


def test_missing_file_path_is_reported():
    with pytest.raises(ScenarioError, match="cannot read scenario"):
        load_scenario("/no/such/place.ini")
