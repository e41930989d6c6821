"""Bandit optimization of sub-agent teams (bindings to the C++ core)."""

import json as _json

from ._boad import (  # noqa: F401
    BoadError,
    ContractError,
    LogError,
    ParseError,
    SchemaError,
    crp_expansion_decision,
    parse_judge_response,
    parse_tool_document,
    parse_updates,
    rank_arms,
    render_template,
    select_top_k,
    simulate_crp_growth,
    template_ids,
    ucb_score,
)
from . import _boad


def calibrated_world():
    return _json.loads(_boad.calibrated_world())


def free_rider_world():
    return _json.loads(_boad.free_rider_world())


def export_top_k(snapshot, k, metric="helpfulness"):
    return _json.loads(_boad.export_top_k(snapshot, k, metric))


def run_optimize(config, events_path, stop_after_round=None):
    """Run the optimizer; `config` is a dict of RunConfig fields. Returns the final archive."""
    text = _boad.run_optimize(_json.dumps(config), str(events_path), stop_after_round)
    return _json.loads(text)


def resume(events_path):
    return _json.loads(_boad.resume(str(events_path)))


def _world_text(world):
    if world is None:
        return ""
    return world if isinstance(world, str) else _json.dumps(world)


def expected_team_success(world, subset):
    return _boad.expected_team_success(_world_text(world), list(subset))


def simulate_bandit(world=None, policy="ucb", rounds=2000, k=3, seed=0):
    """Selection counts per arm after a bandit run on a simulated world."""
    return _boad.simulate_bandit(_world_text(world), policy, rounds, k, seed)
