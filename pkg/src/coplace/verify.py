"""Environment-based verifiers, best-of-n filtering and error classification.

Three verifiers form a cumulative stack: affordance (physical executability),
communication (redundant shares, useless asks) and reasoning (consistency
with the actor's inferred knowledge).  best_of_n picks the first sampled
candidate that clears the configured stack.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from .domain import (
    Action,
    Ask,
    Bin,
    DESTINATION_BINS,
    Move,
    PASS,
    ParseError,
    Pass,
    Share,
    parse_action_text,
    reachable_bins,
)
from .engine import GameState, Outcome, _affordance_error
from .knowledge import (
    ConstraintShared,
    KnowledgeGraph,
    MoveAccepted,
    MoveRejected,
    assimilate,
    entails,
    expand,
    goal_of,
    init_knowledge,
)


class ErrorLabel(str, Enum):
    FORMAT_FOLLOWING = "format_following"
    OBJ_NOT_IN_SOURCE = "obj_not_in_source"
    SOURCE_UNREACHABLE = "source_unreachable"
    DEST_UNREACHABLE = "dest_unreachable"
    SOURCE_EQUALS_DEST = "source_equals_dest"
    REDUNDANT_SHARE = "redundant_share"
    NO_SHARE_AFTER_SEEK = "no_share_after_seek"
    WRONG_SHARE_AFTER_SEEK = "wrong_share_after_seek"
    SEEK_KNOWN_OBJECT = "seek_known_object"
    WRONG_RULE_UNDERSTANDING = "wrong_rule_understanding"
    WRONG_RANDOM_GUESS = "wrong_random_guess"


VERIFIER_STACKS = ("none", "affordance", "communication", "reasoning")


@dataclass(frozen=True)
class Verdict:
    passed: bool
    labels: tuple[ErrorLabel, ...] = ()

    def __bool__(self) -> bool:
        return self.passed


def _fail(*labels: ErrorLabel) -> Verdict:
    assert labels
    return Verdict(False, labels)


_PASS_VERDICT = Verdict(True)


def verify_affordance(state: GameState, action: Action) -> Verdict:
    """Physical executability for the acting player; communication passes."""
    err = _affordance_error(state, state.turn, action)
    if err is None:
        return _PASS_VERDICT
    return _fail(ErrorLabel(err[0]))


def _already_shared(state: GameState, constraint) -> bool:
    return constraint in state.shared_constraints()


def verify_communication(state: GameState, action: Action) -> Verdict:
    """Flags shares already in the dialogue and asks about settled objects."""
    if isinstance(action, Share):
        if _already_shared(state, action.constraint):
            return _fail(ErrorLabel.REDUNDANT_SHARE)
    elif isinstance(action, Ask):
        if state.placement_map[action.obj] in DESTINATION_BINS:
            return _fail(ErrorLabel.SEEK_KNOWN_OBJECT)
        if state.pending_ask == (state.turn, action.obj):
            return _fail(ErrorLabel.SEEK_KNOWN_OBJECT)
    return _PASS_VERDICT


def public_knowledge(state: GameState) -> KnowledgeGraph:
    """What the partner provably has: communicated constraints + board events."""
    from .domain import Player
    from .planning import _kg_from_events, _public_events

    # the actor argument does not influence graph content; fix it for caching
    return _kg_from_events((), state.puzzle.objects, Player.P1, _public_events(state))


def _deduced_move_exists(state: GameState, kg: KnowledgeGraph, exclude: str) -> bool:
    """Is there a productive move for some known-goal object other than
    ``exclude``: a direct placement or a handover toward the partner?"""
    closure = expand(kg)
    if not closure.consistent:
        return False
    reach = reachable_bins(state.turn)
    placement = state.placement_map
    for obj in state.puzzle.objects:
        if obj == exclude:
            continue
        loc = placement[obj]
        if loc in DESTINATION_BINS or loc not in reach:
            continue
        target = goal_of(kg, obj, closure)
        if target is None:
            continue
        if target in reach:
            return True  # direct placement available
        if loc is not Bin.COMMON:
            return True  # handover through the common bin is productive
    return False


def verify_reasoning(state: GameState, kg: KnowledgeGraph, action: Action) -> Verdict:
    """Cumulative check: affordance + communication + knowledge consistency."""
    labels: list[ErrorLabel] = []
    labels.extend(verify_affordance(state, action).labels)
    labels.extend(verify_communication(state, action).labels)

    closure = expand(kg)
    negatives = kg.negative_map()
    if closure.consistent:
        if isinstance(action, Move) and action.dst in DESTINATION_BINS and not labels:
            known = goal_of(kg, action.obj, closure)
            if known is not None and known is not action.dst:
                labels.append(ErrorLabel.WRONG_RULE_UNDERSTANDING)
            elif action.dst in negatives.get(action.obj, set()):
                labels.append(ErrorLabel.WRONG_RULE_UNDERSTANDING)
            elif known is None and _deduced_move_exists(state, kg, action.obj):
                labels.append(ErrorLabel.WRONG_RANDOM_GUESS)
        elif isinstance(action, Ask):
            if goal_of(kg, action.obj, closure) is not None:
                labels.append(ErrorLabel.SEEK_KNOWN_OBJECT)
        elif isinstance(action, Share):
            if ErrorLabel.REDUNDANT_SHARE not in labels and entails(
                public_knowledge(state), action.constraint
            ):
                labels.append(ErrorLabel.REDUNDANT_SHARE)
    seen: list[ErrorLabel] = []
    for lab in labels:
        if lab not in seen:
            seen.append(lab)
    return Verdict(not seen, tuple(seen))


def verify(state: GameState, kg: KnowledgeGraph, action: Action, stack: str) -> Verdict:
    if stack == "none":
        return _PASS_VERDICT
    if stack == "affordance":
        return verify_affordance(state, action)
    if stack == "communication":
        aff = verify_affordance(state, action)
        comm = verify_communication(state, action)
        labels = aff.labels + tuple(l for l in comm.labels if l not in aff.labels)
        return Verdict(not labels, labels)
    if stack == "reasoning":
        return verify_reasoning(state, kg, action)
    raise ValueError(f"unknown verifier stack: {stack!r}")


_THINK_RE = re.compile(r"<THINK>.*?</THINK>", re.DOTALL)
_ACTION_RE = re.compile(r"<ACTION>(.*?)</ACTION>", re.DOTALL)


def parse_action(text: str) -> Action:
    """Parse a policy output: optional THINK block, one required ACTION block."""
    stripped = _THINK_RE.sub("", text)
    blocks = _ACTION_RE.findall(stripped)
    if len(blocks) != 1:
        raise ParseError(f"expected exactly one ACTION block, got {len(blocks)}")
    return parse_action_text(blocks[0].strip())


def best_of_n(
    state: GameState,
    kg: KnowledgeGraph,
    candidates: list[str],
    stack: str,
) -> tuple[Action, bool, tuple[ErrorLabel, ...]]:
    """Choose the first candidate passing the stack.

    If all fail, fall back to the first affordance-legal candidate, else Pass.
    corrected is True whenever the chosen action is not the first sample.
    """
    assert candidates
    parsed: list[Action | None] = []
    all_labels: list[ErrorLabel] = []
    for idx, text in enumerate(candidates):
        try:
            action = parse_action(text)
        except ParseError:
            parsed.append(None)
            if ErrorLabel.FORMAT_FOLLOWING not in all_labels:
                all_labels.append(ErrorLabel.FORMAT_FOLLOWING)
            continue
        parsed.append(action)
        verdict = verify(state, kg, action, stack)
        if verdict.passed:
            return action, idx > 0, tuple(all_labels)
        for lab in verdict.labels:
            if lab not in all_labels:
                all_labels.append(lab)
    for action in parsed:
        if action is not None and verify_affordance(state, action).passed:
            return action, True, tuple(all_labels)
    return PASS, True, tuple(all_labels)


def classify_errors(
    state: GameState,
    kg: KnowledgeGraph,
    action: Action,
    outcome: Outcome | None = None,
) -> set[ErrorLabel]:
    """Post-hoc multi-label classification of one attempted action.

    ``outcome`` enables the ground-truth-aware labels (a rejected blind guess
    is wrong_random_guessing even if no better action was deducible).
    """
    labels: set[ErrorLabel] = set(verify_reasoning(state, kg, action).labels)

    if state.pending_ask is not None:
        asker, asked_obj = state.pending_ask
        if asker is state.turn.other:
            relevant = [
                c
                for c in state.puzzle.constraints_of(state.turn)
                if c.involves(asked_obj) and not _already_shared(state, c)
            ]
            answered = isinstance(action, Share) and action.constraint.involves(asked_obj)
            if relevant and not answered:
                if isinstance(action, Share):
                    labels.add(ErrorLabel.WRONG_SHARE_AFTER_SEEK)
                labels.add(ErrorLabel.NO_SHARE_AFTER_SEEK)
            elif isinstance(action, Share) and not answered:
                labels.add(ErrorLabel.WRONG_SHARE_AFTER_SEEK)

    if (
        outcome is Outcome.REJECTED_PLACEMENT
        and isinstance(action, Move)
        and expand(kg).consistent
        and goal_of(kg, action.obj) is None
    ):
        labels.add(ErrorLabel.WRONG_RANDOM_GUESS)
    return labels
