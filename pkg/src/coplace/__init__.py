"""Cooperative tabletop constraint-placement game: generation, play, analysis."""

from .domain import (
    Action,
    Ask,
    Bin,
    Constraint,
    DESTINATION_BINS,
    Grounding,
    Move,
    Observation,
    PASS,
    PairRule,
    Pass,
    Player,
    Relation,
    Share,
    compose,
    pair_rule,
    parse_action_text,
    parse_constraint,
    reachable_bins,
    relation_between,
)
from .engine import ActionSpace, GameState, Outcome, Status, apply, legal_actions, new_game
from .puzzles import PuzzleInstance, fixture_p0, generate_puzzle

__all__ = [
    "Action",
    "ActionSpace",
    "Ask",
    "Bin",
    "Constraint",
    "DESTINATION_BINS",
    "GameState",
    "Grounding",
    "Move",
    "Observation",
    "Outcome",
    "PASS",
    "PairRule",
    "Pass",
    "Player",
    "PuzzleInstance",
    "Relation",
    "Share",
    "Status",
    "apply",
    "compose",
    "fixture_p0",
    "generate_puzzle",
    "legal_actions",
    "new_game",
    "pair_rule",
    "parse_action_text",
    "parse_constraint",
    "reachable_bins",
    "relation_between",
]
