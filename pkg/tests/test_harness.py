import csv
import io
import json

import numpy as np
import pytest

from envelope_voting import ConfigError, ScenarioError, scale_param, settle_round
from envelope_voting.harness import (
    GeneratorConfig,
    RunReport,
    _envelopes_for,
    generate_scenario,
    load_scenario,
    run_scenario,
    scenario_from_dict,
    worked_example_scenario,
)


def test_generate_is_deterministic():
    cfg = GeneratorConfig(n=4, m=3)
    assert generate_scenario(cfg, 7).to_json() == generate_scenario(cfg, 7).to_json()
    assert generate_scenario(cfg, 7).to_json() != generate_scenario(cfg, 8).to_json()


def test_generate_small_shape():
    s = generate_scenario(GeneratorConfig(n=1, m=2), 0)
    assert s.n == 1
    b = s.players[0].belief
    assert b.p0.size == 2 and b.p0.sum() == pytest.approx(1.0)


def test_generated_scenarios_satisfy_invariants():
    rng = np.random.default_rng(0)
    for k in range(2000):
        cfg = GeneratorConfig(n=int(rng.integers(1, 21)), m=int(rng.integers(2, 7)),
                              omega=float(rng.uniform(1, 200)), sybil_probability=0.2)
        s = generate_scenario(cfg, 123, k)
        s.validate()
        # the JSON form validates too
        scenario_from_dict(json.loads(s.to_json()))


@pytest.mark.parametrize("cfg", [GeneratorConfig(n=0, m=3), GeneratorConfig(n=2, m=1),
                                 GeneratorConfig(n=2, m=3, omega=0.0),
                                 GeneratorConfig(n=2, m=3, sybil_probability=2.0)])
def test_generator_config_errors(cfg):
    with pytest.raises(ConfigError):
        generate_scenario(cfg, 0)


def test_worked_example_scenario_end_to_end():
    report = run_scenario(worked_example_scenario())
    assert report.selected == 1
    assert report.scale == 2.25
    assert [p.refunded for p in report.players] == pytest.approx([36.0, 20.25])
    assert report.surplus == pytest.approx(6.75)
    assert report.players[0].expected_utility is None


def test_indifferent_players():
    raw = {"m": 3, "omega": 10, "players": [
        {"valuations": [4, 4, 4], "belief": {"p0": [0.2, 0.3, 0.5], "p": 1e-3}},
        {"valuations": [7, 7, 7]},
    ]}
    report = run_scenario(scenario_from_dict(raw))
    assert report.selected == 0
    assert report.surplus == pytest.approx(0.0, abs=1e-12)
    assert report.players[0].expected_utility == pytest.approx(0.2 * 4 + 0.3 * 4 + 0.5 * 4)


def test_run_surplus_matches_settle_round():
    s = generate_scenario(GeneratorConfig(n=6, m=4), 5)
    report = run_scenario(s)
    D = np.array([np.asarray(p.valuations) * 1.5 for p in s.players])
    assert report.surplus == settle_round(D).surplus


def test_sybil_player_expands_into_envelopes():
    s = generate_scenario(GeneratorConfig(n=3, m=3, sybil_probability=1.0, max_envelopes=2), 1)
    report = run_scenario(s)
    assert report.envelopes == 6
    assert all(p.envelopes == 2 for p in report.players)
    assert all(p.expected_utility is not None for p in report.players)


def test_sybil_strategies_are_honoured():
    raw = {"m": 2, "omega": 10, "players": [
        {"valuations": [10, 0], "sybil": {"split": [[5, 0], [5, 0]],
                                          "strategies": [[1.0, -1.0], [0.5, -0.5]]}},
        {"valuations": [0, 4]},
    ]}
    s = scenario_from_dict(raw)
    report = run_scenario(s)
    assert report.envelopes == 3 and report.players[0].envelopes == 2
    a_h = scale_param(3)
    D = np.vstack([_envelopes_for(p, a_h) for p in s.players])
    np.testing.assert_allclose(settle_round(D).votes[:2], [[1.0, -1.0], [0.5, -0.5]], atol=1e-12)


@pytest.mark.parametrize("mutate, msg", [
    (lambda r: r.pop("players"), "missing"),
    (lambda r: r.update(m=1), "m must be"),
    (lambda r: r.update(m="three"), "m must be"),
    (lambda r: r.update(omega=-1), "omega"),
    (lambda r: r.update(tie_break="random"), "tie-break"),
    (lambda r: r["players"][0].update(valuations=[1, 2]), "expected 3 valuations"),
    (lambda r: r["players"][0].update(valuations=[1, 2, 300]), "omega"),
    (lambda r: r["players"][0].update(belief={"p0": [0.5, 0.5, 0.5], "p": 0.001}), "sum"),
    (lambda r: r["players"][0].update(belief={"p0": [0.2, 0.3, 0.5], "p": 10.0}), "feasible"),
    (lambda r: r["players"][0].update(colour="red"), "unknown fields"),
    (lambda r: r["players"][0].update(sybil={"split": [[1, 1, 1], [1, 1, 1]]}), "add up"),
    (lambda r: r["players"].append({}), "needs valuations"),
])
def test_invalid_scenarios_rejected(mutate, msg):
    raw = {"m": 3, "omega": 100, "players": [
        {"valuations": [10, 4, 1], "belief": {"p0": [0.2, 0.3, 0.5], "p": 0.001}}]}
    mutate(raw)
    with pytest.raises(ScenarioError, match=msg):
        scenario_from_dict(raw)


def test_load_scenario_errors(tmp_path):
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ScenarioError, match="malformed"):
        load_scenario(bad)


def test_report_json_round_trip():
    report = run_scenario(generate_scenario(GeneratorConfig(n=3, m=4), 2))
    again = RunReport.from_dict(json.loads(report.to_json()))
    assert again == report


def test_csv_and_json_carry_identical_values():
    report = run_scenario(generate_scenario(GeneratorConfig(n=4, m=3), 3))
    data = report.to_dict()
    rows = list(csv.DictReader(io.StringIO(report.to_csv())))
    assert len(rows) == len(data["players"])
    for row, player in zip(rows, data["players"]):
        assert row["scenario_digest"] == data["scenario_digest"]
        assert int(row["selected"]) == data["selected"]
        assert float(row["surplus"]) == data["surplus"]
        assert float(row["scale"]) == data["scale"]
        assert row["player"] == player["name"]
        for key in ("deposited", "refunded", "realized_utility", "expected_utility"):
            assert float(row[key]) == player[key]


def test_runs_are_byte_identical():
    s = generate_scenario(GeneratorConfig(n=5, m=5, sybil_probability=0.5), 11)
    assert run_scenario(s).to_json() == run_scenario(s).to_json()
