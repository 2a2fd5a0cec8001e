"""Batch self-play, metric aggregation, error tables and SFT export."""

from __future__ import annotations

import json
import math
import statistics
from dataclasses import dataclass, field

from .domain import Ask, Move, Pass, Player, Share
from .engine import (
    ActionSpace,
    GameState,
    IllegalAction,
    Outcome,
    Status,
    TurnRecord,
    annotate_last,
    apply,
    apply_noop,
    new_game,
    replay,
)
from .planning import (
    AgentPolicy,
    Trajectory,
    knowledge_for,
    observation_for,
    plan_optimal,
    render_observation_text,
)
from .puzzles import PuzzleInstance
from .verify import best_of_n, classify_errors
from .domain import CoplaceError


class EmptyBatch(CoplaceError):
    pass


@dataclass(frozen=True)
class EpisodeRecord:
    puzzle: PuzzleInstance
    configs: dict[Player, ActionSpace] = field(compare=False)
    verifier_stack: str = "none"
    records: tuple[TurnRecord, ...] = ()
    status: Status = Status.RUNNING
    step_count: int = 0
    optimal_steps: int = 1
    subgoal: float = 0.0
    valid: bool = True

    def to_json(self) -> dict:
        return {
            "puzzle": self.puzzle.to_json(),
            "configs": {p.value: c.value for p, c in self.configs.items()},
            "verifier_stack": self.verifier_stack,
            "records": [r.to_json() for r in self.records],
            "status": self.status.value,
            "step_count": self.step_count,
            "optimal_steps": self.optimal_steps,
            "subgoal": self.subgoal,
            "valid": self.valid,
        }

    @classmethod
    def from_json(cls, data: dict) -> "EpisodeRecord":
        return cls(
            puzzle=PuzzleInstance.from_json(data["puzzle"]),
            configs={Player(p): ActionSpace(c) for p, c in data["configs"].items()},
            verifier_stack=data["verifier_stack"],
            records=tuple(TurnRecord.from_json(r) for r in data["records"]),
            status=Status(data["status"]),
            step_count=data["step_count"],
            optimal_steps=data["optimal_steps"],
            subgoal=data["subgoal"],
            valid=data.get("valid", True),
        )


def run_episode(
    puzzle: PuzzleInstance,
    policies: dict[Player, AgentPolicy],
    configs: dict[Player, ActionSpace],
    verifier_stack: str = "none",
    step_limit: int = 30,
    optimal_steps: int | None = None,
) -> EpisodeRecord:
    """Drive one game: sample candidates, best-of-n filter, apply, classify."""
    from .engine import subgoal_fraction

    state = new_game(puzzle, configs, step_limit)
    while state.status is Status.RUNNING:
        player = state.turn
        texts = policies[player].step(state, player)
        kg = knowledge_for(state, player)
        action, corrected, _rejected = best_of_n(state, kg, texts, verifier_stack)
        before = state
        try:
            state, outcome = apply(state, action)
        except IllegalAction as exc:
            labels = classify_errors(before, kg, action)
            state = apply_noop(state, action, exc.code)
            state = annotate_last(
                state, tuple(texts), corrected, tuple(sorted(l.value for l in labels))
            )
            continue
        labels = classify_errors(before, kg, action, outcome)
        state = annotate_last(
            state, tuple(texts), corrected, tuple(sorted(l.value for l in labels))
        )

    if optimal_steps is None:
        optimal_steps = plan_optimal(puzzle, configs, step_limit).step_count
    return EpisodeRecord(
        puzzle=puzzle,
        configs=configs,
        verifier_stack=verifier_stack,
        records=state.history,
        status=state.status,
        step_count=state.step_count,
        optimal_steps=max(1, optimal_steps),
        subgoal=subgoal_fraction(state),
    )


def _mean_se(values: list[float]) -> tuple[float, float]:
    if not values:
        return float("nan"), float("nan")
    mean = statistics.fmean(values)
    se = statistics.stdev(values) / math.sqrt(len(values)) if len(values) > 1 else 0.0
    return mean, se


@dataclass(frozen=True)
class MetricsReport:
    n_episodes: int
    sr: float  # percent
    sr_se: float
    subr: float  # percent
    subr_se: float
    stepr: float | None  # mean executed/optimal over solved episodes
    stepr_se: float | None
    corr: float | None  # percent of consumed steps corrected by the verifier
    corr_se: float | None
    by_object_count: dict[int, "MetricsReport"] = field(default_factory=dict, compare=False)

    def to_json(self) -> dict:
        out = {
            "n": self.n_episodes,
            "sr": self.sr,
            "sr_se": self.sr_se,
            "subr": self.subr,
            "subr_se": self.subr_se,
            "stepr": self.stepr,
            "stepr_se": self.stepr_se,
            "corr": self.corr,
            "corr_se": self.corr_se,
        }
        if self.by_object_count:
            out["by_object_count"] = {
                str(k): v.to_json() for k, v in self.by_object_count.items()
            }
        return out


def compute_metrics(records: list[EpisodeRecord], breakdown: bool = True) -> MetricsReport:
    valid = [r for r in records if r.valid]
    if not valid:
        raise EmptyBatch("no valid episodes")
    solved_flags = [100.0 if r.status is Status.SOLVED else 0.0 for r in valid]
    sub = [100.0 * r.subgoal for r in valid]
    steprs = [
        r.step_count / r.optimal_steps for r in valid if r.status is Status.SOLVED
    ]
    sr, sr_se = _mean_se(solved_flags)
    subr, subr_se = _mean_se(sub)
    stepr, stepr_se = _mean_se(steprs) if steprs else (None, None)

    corr = corr_se = None
    with_verifier = [r for r in valid if r.verifier_stack != "none"]
    if with_verifier:
        rates = []
        for r in with_verifier:
            if r.records:
                rates.append(
                    100.0 * sum(1 for t in r.records if t.corrected) / len(r.records)
                )
        corr, corr_se = _mean_se(rates) if rates else (None, None)

    by_count: dict[int, MetricsReport] = {}
    if breakdown:
        counts = sorted({len(r.puzzle.objects) for r in valid})
        if len(counts) > 1:
            for n in counts:
                subset = [r for r in valid if len(r.puzzle.objects) == n]
                by_count[n] = compute_metrics(subset, breakdown=False)
    return MetricsReport(
        n_episodes=len(valid),
        sr=sr,
        sr_se=sr_se,
        subr=subr,
        subr_se=subr_se,
        stepr=stepr,
        stepr_se=stepr_se,
        corr=corr,
        corr_se=corr_se,
        by_object_count=by_count,
    )


# Labels whose denominator is the move count; the rest are communication
# labels measured against share+ask counts.  format_following is reported
# against total steps only.
_MOVE_LABELS = {
    "obj_not_in_source",
    "source_unreachable",
    "dest_unreachable",
    "source_equals_dest",
    "wrong_rule_understanding",
    "wrong_random_guess",
}
_COMM_LABELS = {
    "redundant_share",
    "no_share_after_seek",
    "wrong_share_after_seek",
    "seek_known_object",
}

ERROR_TABLE_ROWS = (
    "format_following",
    "obj_not_in_source",
    "source_unreachable",
    "dest_unreachable",
    "source_equals_dest",
    "redundant_share",
    "no_share_after_seek",
    "wrong_share_after_seek",
    "seek_known_object",
    "wrong_rule_understanding",
    "wrong_random_guess",
)


def error_table(records: list[EpisodeRecord]) -> dict:
    """Two-ratio error breakdown: per total steps and per relevant action type."""
    turns: list[TurnRecord] = [t for r in records for t in r.records]
    total = len(turns)
    if total == 0:
        return {"total_actions": 0, "rows": {}, "no_error_pct": None}
    moves = sum(1 for t in turns if isinstance(t.action, Move))
    comms = sum(1 for t in turns if isinstance(t.action, (Share, Ask)))
    rows = {}
    for label in ERROR_TABLE_ROWS:
        count = sum(1 for t in turns if label in t.labels)
        if label in _MOVE_LABELS:
            denom = moves
        elif label in _COMM_LABELS:
            denom = comms
        else:
            denom = None
        rows[label] = {
            "count": count,
            "pct_total": 100.0 * count / total,
            "pct_relevant": (100.0 * count / denom) if denom else None,
        }
    clean = sum(1 for t in turns if not t.labels)
    return {
        "total_actions": total,
        "moves": moves,
        "comm_actions": comms,
        "rows": rows,
        "no_error_pct": 100.0 * clean / total,
    }


_SYSTEM_TEXT = {
    ActionSpace.PROVIDE_AND_SEEK: (
        "You are one of two players placing objects into four destination "
        "bins on a shared table. You may move objects, share your "
        "constraints, ask about objects, or pass."
    ),
    ActionSpace.PROVIDE_ONLY: (
        "You are one of two players placing objects into four destination "
        "bins on a shared table. You may move objects, share your "
        "constraints, or pass. You cannot ask for information."
    ),
    ActionSpace.SEEK_ONLY: (
        "You are one of two players placing objects into four destination "
        "bins on a shared table. You may move objects, ask about objects, "
        "or pass. You may share a constraint only after your partner asks "
        "about an object it involves."
    ),
    ActionSpace.NONE: (
        "You are one of two players placing objects into four destination "
        "bins on a shared table. You may move objects or pass. No "
        "communication is allowed."
    ),
}


def export_sft(
    trajectories: list[Trajectory],
    with_rationale: bool = False,
    step_limit: int = 30,
) -> list[dict]:
    """One chat-format training sample per turn of each trajectory."""
    samples = []
    for traj in trajectories:
        state = new_game(traj.puzzle, traj.configs, step_limit)
        for i, (player, action) in enumerate(traj.steps):
            if state.turn is not player:
                raise CoplaceError(
                    f"trajectory does not replay: expected {state.turn}, got {player}"
                )
            obs = observation_for(state, player)
            rationale = traj.rationales[i] if i < len(traj.rationales) else None
            if with_rationale and rationale:
                assistant = f"<THINK>{rationale}</THINK><ACTION>{action}</ACTION>"
            else:
                assistant = f"<ACTION>{action}</ACTION>"
            samples.append(
                {
                    "messages": [
                        {"role": "system", "content": _SYSTEM_TEXT[traj.configs[player]]},
                        {"role": "user", "content": render_observation_text(obs)},
                        {"role": "assistant", "content": assistant},
                    ]
                }
            )
            state, _ = apply(state, action)
        if state.status is not traj.status:
            raise CoplaceError("trajectory replay ended in unexpected status")
    return samples


MATRIX_EQUIVALENCES = {
    (ActionSpace.PROVIDE_ONLY, ActionSpace.NONE): (
        ActionSpace.PROVIDE_AND_SEEK,
        ActionSpace.NONE,
    ),
    (ActionSpace.SEEK_ONLY, ActionSpace.NONE): (ActionSpace.NONE, ActionSpace.NONE),
}


def run_matrix(
    pool: list[PuzzleInstance],
    pairings: list[tuple[ActionSpace, ActionSpace]],
    stacks: list[str],
    policy_factory,
) -> list[dict]:
    """Every (pairing, stack) cell over the pool, both seatings averaged."""
    out = []
    for mode_a, mode_b in pairings:
        note = None
        equiv = MATRIX_EQUIVALENCES.get((mode_a, mode_b)) or MATRIX_EQUIVALENCES.get(
            (mode_b, mode_a)
        )
        if equiv is not None:
            note = f"functionally equivalent to {equiv[0].value} vs {equiv[1].value}"
        for stack in stacks:
            episodes = []
            for puzzle in pool:
                for cfg in (
                    {Player.P1: mode_a, Player.P2: mode_b},
                    {Player.P1: mode_b, Player.P2: mode_a},
                ):
                    policies = {p: policy_factory(cfg[p]) for p in Player}
                    episodes.append(
                        run_episode(puzzle, policies, cfg, verifier_stack=stack)
                    )
            out.append(
                {
                    "pairing": (mode_a.value, mode_b.value),
                    "stack": stack,
                    "note": note,
                    "report": compute_metrics(episodes),
                }
            )
    return out


def write_episodes(records: list[EpisodeRecord], path: str) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(r.to_json(), sort_keys=True) + "\n")


def read_episodes(path: str) -> list[EpisodeRecord]:
    out = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                out.append(EpisodeRecord.from_json(json.loads(line)))
    return out
