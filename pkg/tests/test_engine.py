"""State machine semantics: turns, acceptance, locking, asks, replay."""

import pytest

from coplace.domain import Ask, Bin, Move, PASS, Player, Share, pair_rule, Relation
from coplace.engine import (
    ActionSpace,
    IllegalAction,
    NotYourTurn,
    Outcome,
    Status,
    apply,
    apply_noop,
    legal_actions,
    new_game,
    replay,
    subgoal_fraction,
    write_event_log,
)
from coplace.engine import TurnRecord
from coplace.puzzles import fixture_p0, generate_puzzle


def _p0(config=ActionSpace.PROVIDE_AND_SEEK):
    return new_game(fixture_p0(), {p: config for p in Player})


def test_initial_state():
    state = _p0()
    assert state.turn is Player.P1
    assert state.step_count == 0
    assert state.status is Status.RUNNING
    assert subgoal_fraction(state) == 0.0


def test_turns_alternate_and_count():
    state = _p0()
    state, _ = apply(state, PASS)
    assert state.turn is Player.P2
    assert state.step_count == 1
    state, _ = apply(state, PASS)
    assert state.turn is Player.P1
    assert state.step_count == 2


def test_correct_placement_accepted():
    state = _p0()
    state, outcome = apply(state, Move("A", Bin.AREA_P1, Bin.BOTTOM_LEFT))
    assert outcome is Outcome.ACCEPTED
    assert state.location_of("A") is Bin.BOTTOM_LEFT
    assert subgoal_fraction(state) == 0.5


def test_wrong_placement_rejected_but_consumes_turn():
    state = _p0()
    state, outcome = apply(state, Move("A", Bin.AREA_P1, Bin.BOTTOM_RIGHT))
    assert outcome is Outcome.REJECTED_PLACEMENT
    assert state.location_of("A") is Bin.AREA_P1  # object stays put
    assert state.step_count == 1
    assert state.turn is Player.P2


def test_locked_after_destination():
    state = _p0()
    state, _ = apply(state, Move("A", Bin.AREA_P1, Bin.BOTTOM_LEFT))
    state, _ = apply(state, PASS)
    with pytest.raises(IllegalAction) as exc:
        apply(state, Move("A", Bin.BOTTOM_LEFT, Bin.COMMON))
    assert exc.value.code == "source_unreachable"
    assert state.step_count == 2  # illegal attempt consumed nothing


def test_affordance_violations_raise_without_consuming():
    state = _p0()
    cases = [
        (Move("B", Bin.AREA_P2, Bin.COMMON), "source_unreachable"),
        (Move("A", Bin.COMMON, Bin.BOTTOM_LEFT), "obj_not_in_source"),
        (Move("A", Bin.AREA_P1, Bin.TOP_LEFT), "dest_unreachable"),
        (Move("A", Bin.AREA_P1, Bin.AREA_P1), "source_equals_dest"),
    ]
    for action, code in cases:
        with pytest.raises(IllegalAction) as exc:
            apply(state, action)
        assert exc.value.code == code
        assert state.step_count == 0


def test_config_forbidden_communication():
    state = _p0(ActionSpace.NONE)
    with pytest.raises(IllegalAction) as exc:
        apply(state, Ask("B"))
    assert exc.value.code == "ask_forbidden"
    with pytest.raises(IllegalAction) as exc:
        apply(state, Share(fixture_p0().grounding))
    assert exc.value.code == "share_forbidden"


def test_cannot_share_partner_constraint():
    state = _p0()
    # p1 holds only the grounding; the pair rule belongs to p2
    with pytest.raises(IllegalAction) as exc:
        apply(state, Share(pair_rule("A", "B", Relation.SAME_ROW)))
    assert exc.value.code == "share_forbidden"


def test_seek_only_share_requires_pending_ask():
    state = _p0(ActionSpace.SEEK_ONLY)
    state, _ = apply(state, Ask("B"))
    # p2 may now answer with a constraint involving B
    state, outcome = apply(state, Share(pair_rule("A", "B", Relation.SAME_ROW)))
    assert outcome is Outcome.ACCEPTED
    assert state.pending_ask is None


def test_pending_ask_set_and_cleared():
    state = _p0()
    state, _ = apply(state, Ask("B"))
    assert state.pending_ask == (Player.P1, "B")
    state, _ = apply(state, Share(pair_rule("A", "B", Relation.SAME_ROW)))
    assert state.pending_ask is None


def test_pending_ask_survives_irrelevant_turns():
    state = _p0()
    state, _ = apply(state, Ask("B"))
    state, _ = apply(state, PASS)
    assert state.pending_ask == (Player.P1, "B")


def test_legal_actions_menu():
    state = _p0()
    menu = legal_actions(state, Player.P1)
    assert PASS in menu
    assert Move("A", Bin.AREA_P1, Bin.BOTTOM_LEFT) in menu
    assert Ask("B") in menu
    assert Share(fixture_p0().grounding) in menu
    # everything on the menu must actually be applicable
    for action in menu:
        apply(state, action)
    with pytest.raises(NotYourTurn):
        legal_actions(state, Player.P2)


def test_step_limit_terminates():
    state = new_game(fixture_p0(), step_limit=4)
    for _ in range(4):
        state, _ = apply(state, PASS)
    assert state.status is Status.LIMIT_REACHED
    with pytest.raises(IllegalAction):
        apply(state, PASS)


def test_solved_detection():
    state = _p0()
    state, _ = apply(state, Move("A", Bin.AREA_P1, Bin.BOTTOM_LEFT))
    state, _ = apply(state, Move("B", Bin.AREA_P2, Bin.COMMON))
    state, _ = apply(state, Move("B", Bin.COMMON, Bin.BOTTOM_RIGHT))
    assert state.status is Status.SOLVED
    assert state.step_count == 3
    assert subgoal_fraction(state) == 1.0


def test_apply_noop_consumes_step():
    state = _p0()
    state = apply_noop(state, Ask("B"), "format_following")
    assert state.step_count == 1
    assert state.history[-1].outcome is Outcome.ILLEGAL_NOOP
    assert state.turn is Player.P2


def test_event_log_and_replay_round_trip(tmp_path):
    import json

    puzzle = generate_puzzle(4, 5)
    configs = {p: ActionSpace.PROVIDE_AND_SEEK for p in Player}
    from coplace.planning import PlannerAgent

    state = new_game(puzzle, configs)
    agent = PlannerAgent(ActionSpace.PROVIDE_AND_SEEK)
    while state.status is Status.RUNNING:
        state, _ = apply(state, agent.choose(state, state.turn))
    path = tmp_path / "log.jsonl"
    write_event_log(state, str(path))
    records = [TurnRecord.from_json(json.loads(l)) for l in path.read_text().splitlines()]
    rebuilt = replay(puzzle, configs, records)
    assert rebuilt == state
