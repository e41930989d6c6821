import json
import math
import os
import pathlib

import pytest

import boad

ROOT = pathlib.Path(os.environ.get("BOAD_SOURCE_DIR", pathlib.Path(__file__).resolve().parents[2]))
FIXTURES = ROOT / "fixtures"


def test_ucb_score_examples():
    assert math.isinf(boad.ucb_score(None, 0, 5))
    assert boad.ucb_score(0.0, 1, 1) == 0.0
    assert boad.ucb_score(0.5, 4, 10) == pytest.approx(0.5 + math.sqrt(2 * math.log(10) / 4), rel=1e-12)
    with pytest.raises(boad.ContractError):
        boad.ucb_score(0.5, 4, 0)


def test_select_top_k_prefers_unsampled_arms():
    stats = [("a", 0, 0.0, 1), ("b", 5, 4.5, 0), ("c", 5, 3.5, 0)]
    assert boad.select_top_k(stats, 6, 2) == ["a", "b"]


def test_crp_decision_and_growth():
    assert boad.crp_expansion_decision(2, 8, 0.19)
    assert not boad.crp_expansion_decision(2, 8, 0.21)
    assert boad.simulate_crp_growth(2, 3, 100, 1) == boad.simulate_crp_growth(2, 3, 100, 1)


def test_reference_archive_ranking():
    text = (FIXTURES / "reference_archive.json").read_text()
    assert boad.rank_arms(text, "helpfulness", 2) == ["issue_analyzer", "code_navigator"]
    bundle = boad.export_top_k(text, 5)
    assert len(bundle["subagents"]) == 5


def test_templates_render_single_pass():
    assert len(boad.template_ids()) == 5
    out = boad.render_template("helpful_judge_v1", {"TRAJECTORIES": "{{TOOL_NAME}}", "TOOL_NAME": "x"})
    assert "TRAJECTORIES:\n{{TOOL_NAME}}\n" in out
    with pytest.raises(boad.ContractError):
        boad.render_template("helpful_judge_v1", {"TRAJECTORIES": "t"})


def test_parsers():
    helpful, reasoning = boad.parse_judge_response("```yaml\nhelpful: false\nreasoning: |\n  Not called.\n```")
    assert helpful is False and reasoning == "Not called."
    with pytest.raises(boad.ParseError):
        boad.parse_judge_response("```yaml\nhelpful: maybe\n```")
    assert boad.parse_updates("```yaml\nupdates: {}\n```") == {}


def test_worlds():
    world = boad.calibrated_world()
    assert world == json.loads((FIXTURES / "calibrated_world.json").read_text())
    team = ["issue_analyzer", "code_navigator", "issue_reproducer"]
    expected = (1 - 0.018 * 0.5) * (1 - 0.067 * 0.5) * (1 - 0.232 * 0.5) * 0.25
    assert boad.expected_team_success(world, team) == pytest.approx(expected)
    counts = boad.simulate_bandit(world, rounds=300, seed=2)
    assert sum(counts.values()) == 300 * 3


def test_optimize_and_resume(tmp_path):
    config = {"budget": 4, "seed": 3, "design_set_size": 4, "world": boad.calibrated_world()}
    full = boad.run_optimize(config, tmp_path / "full.jsonl")
    boad.run_optimize(config, tmp_path / "part.jsonl", stop_after_round=2)
    resumed = boad.resume(tmp_path / "part.jsonl")
    assert resumed == full
    assert (tmp_path / "part.jsonl").read_bytes() == (tmp_path / "full.jsonl").read_bytes()
    assert full["round_cursor"] == 4


def test_unknown_config_key_is_rejected(tmp_path):
    with pytest.raises(boad.SchemaError):
        boad.run_optimize({"budgett": 3}, tmp_path / "x.jsonl")
