"""Turn-based state machine: legality, placement acceptance, termination.

The environment accepts a destination placement only when it matches the
puzzle's ground-truth goal; a rejected placement still consumes the turn.
Objects are locked once placed in a destination bin.  Affordance-illegal
actions raise without consuming the turn; callers decide the retry policy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum

from .domain import (
    Action,
    Ask,
    Bin,
    Constraint,
    CoplaceError,
    DESTINATION_BINS,
    Grounding,
    Move,
    PASS,
    Pass,
    Player,
    Share,
    parse_action_text,
    reachable_bins,
)
from .puzzles import PuzzleInstance

DEFAULT_STEP_LIMIT = 30


class NotYourTurn(CoplaceError):
    pass


class IllegalAction(CoplaceError):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class ActionSpace(str, Enum):
    PROVIDE_AND_SEEK = "provide_and_seek"
    PROVIDE_ONLY = "provide_only"
    SEEK_ONLY = "seek_only"
    NONE = "none"

    @property
    def can_ask(self) -> bool:
        return self in (ActionSpace.PROVIDE_AND_SEEK, ActionSpace.SEEK_ONLY)

    @property
    def can_share_freely(self) -> bool:
        return self in (ActionSpace.PROVIDE_AND_SEEK, ActionSpace.PROVIDE_ONLY)

    @property
    def can_share_on_ask(self) -> bool:
        return self is not ActionSpace.NONE


class Status(str, Enum):
    RUNNING = "running"
    SOLVED = "solved"
    LIMIT_REACHED = "limit_reached"


class Outcome(str, Enum):
    ACCEPTED = "accepted"
    REJECTED_PLACEMENT = "rejected_placement"
    ILLEGAL_NOOP = "illegal_noop"


@dataclass(frozen=True)
class TurnRecord:
    index: int
    actor: Player
    action: Action
    outcome: Outcome
    error_code: str | None = None
    candidates: tuple[str, ...] = ()  # raw sampled texts, filled by the harness
    corrected: bool = False
    labels: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "actor": self.actor.value,
            "action": str(self.action),
            "outcome": self.outcome.value,
            "error_code": self.error_code,
            "candidates": list(self.candidates),
            "corrected": self.corrected,
            "labels": list(self.labels),
        }

    @classmethod
    def from_json(cls, data: dict) -> "TurnRecord":
        return cls(
            index=data["index"],
            actor=Player(data["actor"]),
            action=parse_action_text(data["action"]),
            outcome=Outcome(data["outcome"]),
            error_code=data.get("error_code"),
            candidates=tuple(data.get("candidates", ())),
            corrected=data.get("corrected", False),
            labels=tuple(data.get("labels", ())),
        )


@dataclass(frozen=True)
class GameState:
    puzzle: PuzzleInstance
    configs: dict[Player, ActionSpace]
    placements: tuple[tuple[str, Bin], ...]
    turn: Player
    step_count: int
    step_limit: int
    history: tuple[TurnRecord, ...]
    pending_ask: tuple[Player, str] | None
    status: Status

    @property
    def placement_map(self) -> dict[str, Bin]:
        return dict(self.placements)

    def location_of(self, obj: str) -> Bin:
        return self.placement_map[obj]

    def shared_constraints(self) -> list[Constraint]:
        """All constraints shared so far, in order."""
        return [
            rec.action.constraint
            for rec in self.history
            if isinstance(rec.action, Share) and rec.outcome is Outcome.ACCEPTED
        ]


def new_game(
    puzzle: PuzzleInstance,
    configs: dict[Player, ActionSpace] | None = None,
    step_limit: int = DEFAULT_STEP_LIMIT,
) -> GameState:
    configs = configs or {p: ActionSpace.PROVIDE_AND_SEEK for p in Player}
    state = GameState(
        puzzle=puzzle,
        configs=dict(configs),
        placements=puzzle.initial_layout,
        turn=Player.P1,
        step_count=0,
        step_limit=step_limit,
        history=(),
        pending_ask=None,
        status=Status.RUNNING,
    )
    return replace(state, status=_compute_status(state))


def _compute_status(state: GameState) -> Status:
    goal = state.puzzle.goal_map
    if all(loc is goal[obj] for obj, loc in state.placements):
        return Status.SOLVED
    if state.step_count >= state.step_limit:
        return Status.LIMIT_REACHED
    return Status.RUNNING


def subgoal_fraction(state: GameState) -> float:
    goal = state.puzzle.goal_map
    placed = sum(1 for obj, loc in state.placements if loc is goal[obj])
    return placed / len(state.placements)


def is_terminal(state: GameState) -> Status:
    return state.status


def _share_legal(state: GameState, player: Player, constraint: Constraint) -> bool:
    config = state.configs[player]
    if constraint not in state.puzzle.constraints_of(player):
        return False
    if config.can_share_freely:
        return True
    if config.can_share_on_ask and state.pending_ask is not None:
        asker, obj = state.pending_ask
        return asker is player.other and constraint.involves(obj)
    return False


def _affordance_error(state: GameState, player: Player, action: Action) -> tuple[str, str] | None:
    """The first affordance violation for a Move, or None.  Communication and
    Pass never fail affordance."""
    if not isinstance(action, Move):
        return None
    placement = state.placement_map
    if placement.get(action.obj) is not action.src:
        return ("obj_not_in_source", f"{action.obj} is not in {action.src.value}")
    reach = reachable_bins(player)
    if action.src not in reach or action.src in DESTINATION_BINS:
        # Destination bins lock their contents, so they are never a usable source.
        return ("source_unreachable", f"{player.value} cannot move from {action.src.value}")
    if action.dst not in reach:
        return ("dest_unreachable", f"{player.value} cannot reach {action.dst.value}")
    if action.src is action.dst:
        return ("source_equals_dest", "source and destination are the same bin")
    return None


def legal_actions(state: GameState, player: Player) -> list[Action]:
    """The menu of actions offered to the acting player."""
    if player is not state.turn:
        raise NotYourTurn(f"it is {state.turn.value}'s turn")
    config = state.configs[player]
    goal_bins_locked = set(DESTINATION_BINS)
    reach = reachable_bins(player)
    out: list[Action] = []
    for obj, loc in state.placements:
        if loc in goal_bins_locked or loc not in reach:
            continue
        for dst in sorted(reach, key=lambda b: b.value):
            if dst is not loc:
                out.append(Move(obj, loc, dst))
    if config.can_share_freely:
        out.extend(Share(c) for c in state.puzzle.constraints_of(player))
    elif config.can_share_on_ask and state.pending_ask is not None:
        asker, obj = state.pending_ask
        if asker is player.other:
            out.extend(
                Share(c)
                for c in state.puzzle.constraints_of(player)
                if c.involves(obj)
            )
    if config.can_ask:
        placement = state.placement_map
        out.extend(
            Ask(obj)
            for obj in state.puzzle.objects
            if placement[obj] not in goal_bins_locked
        )
    out.append(PASS)
    return out


def apply(state: GameState, action: Action) -> tuple[GameState, Outcome]:
    """Consume one turn.  Raises IllegalAction without consuming the turn for
    affordance violations and config-forbidden communication."""
    if state.status is not Status.RUNNING:
        raise IllegalAction("game_over", f"game is {state.status.value}")
    player = state.turn
    err = _affordance_error(state, player, action)
    if err is not None:
        raise IllegalAction(err[0], err[1])

    outcome = Outcome.ACCEPTED
    placements = state.placement_map
    pending_ask = state.pending_ask

    if isinstance(action, Move):
        if action.dst in DESTINATION_BINS:
            if state.puzzle.goal_map[action.obj] is action.dst:
                placements[action.obj] = action.dst
            else:
                outcome = Outcome.REJECTED_PLACEMENT
        else:
            placements[action.obj] = action.dst
    elif isinstance(action, Share):
        if not _share_legal(state, player, action.constraint):
            raise IllegalAction(
                "share_forbidden",
                f"{player.value} may not share {action.constraint} now",
            )
        if pending_ask is not None:
            asker, obj = pending_ask
            if asker is player.other and action.constraint.involves(obj):
                pending_ask = None
    elif isinstance(action, Ask):
        if not state.configs[player].can_ask:
            raise IllegalAction("ask_forbidden", f"{player.value} may not ask")
        pending_ask = (player, action.obj)
    elif isinstance(action, Pass):
        pass
    else:
        raise IllegalAction("unknown_action", f"unrecognized action: {action!r}")

    record = TurnRecord(
        index=state.step_count,
        actor=player,
        action=action,
        outcome=outcome,
        error_code=None if outcome is Outcome.ACCEPTED else "wrong_bin",
    )
    new_state = replace(
        state,
        placements=tuple((o, placements[o]) for o in state.puzzle.objects),
        turn=player.other,
        step_count=state.step_count + 1,
        history=state.history + (record,),
        pending_ask=pending_ask,
    )
    new_state = replace(new_state, status=_compute_status(new_state))
    return new_state, outcome


def apply_noop(state: GameState, action: Action, error_code: str) -> GameState:
    """Consume the turn as an IllegalNoOp (harness policy for unfixable output)."""
    record = TurnRecord(
        index=state.step_count,
        actor=state.turn,
        action=action,
        outcome=Outcome.ILLEGAL_NOOP,
        error_code=error_code,
    )
    new_state = replace(
        state,
        turn=state.turn.other,
        step_count=state.step_count + 1,
        history=state.history + (record,),
    )
    return replace(new_state, status=_compute_status(new_state))


def annotate_last(state: GameState, candidates: tuple[str, ...], corrected: bool,
                  labels: tuple[str, ...]) -> GameState:
    """Attach verifier metadata to the most recent TurnRecord."""
    last = state.history[-1]
    updated = replace(last, candidates=candidates, corrected=corrected, labels=labels)
    return replace(state, history=state.history[:-1] + (updated,))


def write_event_log(state: GameState, path: str) -> None:
    with open(path, "w") as fh:
        for rec in state.history:
            fh.write(json.dumps(rec.to_json(), sort_keys=True) + "\n")


def replay(puzzle: PuzzleInstance, configs: dict[Player, ActionSpace],
           records: list[TurnRecord], step_limit: int = DEFAULT_STEP_LIMIT) -> GameState:
    """Rebuild the final state from an event log."""
    state = new_game(puzzle, configs, step_limit)
    for rec in records:
        if rec.outcome is Outcome.ILLEGAL_NOOP:
            state = apply_noop(state, rec.action, rec.error_code or "illegal")
        else:
            state, _ = apply(state, rec.action)
        state = annotate_last(state, rec.candidates, rec.corrected, rec.labels)
    return state
