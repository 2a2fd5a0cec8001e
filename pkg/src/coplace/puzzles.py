"""Puzzle generation: goals, exhaustive rules, minimal subsets, splits.

A puzzle is a goal assignment of objects to the four destination bins, a
random minimal set of pair rules C (always a spanning tree of the object
graph), one grounding constraint, and an asymmetric split of C between the
two players such that neither player can determine the goal alone.
"""

from __future__ import annotations

import itertools
import json
import random
from dataclasses import dataclass, field

from .domain import (
    Bin,
    Constraint,
    DESTINATION_BINS,
    Grounding,
    InvalidInput,
    CoplaceError,
    PairRule,
    Player,
    pair_rule,
    parse_constraint,
    relation_between,
)

DEFAULT_OBJECT_NAMES = ("A", "B", "C", "D", "E", "F", "G", "H")

MAX_OBJECTS = 8  # 4^8 enumeration cap


class CapacityExceeded(CoplaceError):
    pass


class SplitInfeasible(CoplaceError):
    pass


GoalConfig = dict[str, Bin]


@dataclass(frozen=True)
class PuzzleInstance:
    objects: tuple[str, ...]
    goal: tuple[tuple[str, Bin], ...]
    rules: tuple[PairRule, ...]
    grounding: Grounding
    split_p1: tuple[Constraint, ...]  # includes the grounding if p1 owns it
    split_p2: tuple[Constraint, ...]
    initial_layout: tuple[tuple[str, Bin], ...]
    seed: int

    @property
    def goal_map(self) -> GoalConfig:
        return dict(self.goal)

    @property
    def initial_map(self) -> dict[str, Bin]:
        return dict(self.initial_layout)

    def constraints_of(self, player: Player) -> tuple[Constraint, ...]:
        return self.split_p1 if player is Player.P1 else self.split_p2

    @property
    def grounding_owner(self) -> Player:
        return Player.P1 if self.grounding in self.split_p1 else Player.P2

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "objects": list(self.objects),
            "goal": {o: b.value for o, b in self.goal},
            "rules": [str(r) for r in self.rules],
            "grounding": str(self.grounding),
            "split": {
                "p1": [str(c) for c in self.split_p1],
                "p2": [str(c) for c in self.split_p2],
            },
            "initial": {o: b.value for o, b in self.initial_layout},
        }

    @classmethod
    def from_json(cls, data: dict) -> "PuzzleInstance":
        objects = tuple(data["objects"])
        rules = tuple(parse_constraint(r) for r in data["rules"])
        grounding = parse_constraint(data["grounding"])
        assert isinstance(grounding, Grounding)
        return cls(
            objects=objects,
            goal=tuple((o, Bin(data["goal"][o])) for o in objects),
            rules=rules,
            grounding=grounding,
            split_p1=tuple(parse_constraint(c) for c in data["split"]["p1"]),
            split_p2=tuple(parse_constraint(c) for c in data["split"]["p2"]),
            initial_layout=tuple((o, Bin(data["initial"][o])) for o in objects),
            seed=data["seed"],
        )


def sample_goal(objects: list[str], seed: int) -> GoalConfig:
    """Assign each object a destination bin i.i.d. uniform under the seed."""
    if not objects:
        raise InvalidInput("need at least one object")
    rng = random.Random(f"goal:{seed}")
    return {o: rng.choice(DESTINATION_BINS) for o in objects}


def exhaustive_rules(goal: GoalConfig) -> set[PairRule]:
    """The single true pair rule for every unordered object pair."""
    return {
        pair_rule(a, b, relation_between(goal[a], goal[b]))
        for a, b in itertools.combinations(sorted(goal), 2)
    }


def enumerate_satisfying(
    rules: set[PairRule] | frozenset[PairRule] | tuple[PairRule, ...],
    grounding: Grounding | None = None,
    objects: list[str] | None = None,
) -> list[GoalConfig]:
    """Brute-force all assignments satisfying every rule (and grounding).

    Canonical order: objects sorted, bins in declaration order, odometer style.
    """
    if objects is None:
        names: set[str] = set()
        for r in rules:
            names.update((r.a, r.b))
        if grounding is not None:
            names.add(grounding.obj)
        objects = sorted(names)
    else:
        objects = sorted(objects)
    if len(objects) > MAX_OBJECTS:
        raise CapacityExceeded(f"{len(objects)} objects exceed the 4^{MAX_OBJECTS} cap")
    out: list[GoalConfig] = []
    for combo in itertools.product(DESTINATION_BINS, repeat=len(objects)):
        cfg = dict(zip(objects, combo))
        if grounding is not None and cfg[grounding.obj] is not grounding.bin:
            continue
        if all(relation_between(cfg[r.a], cfg[r.b]) is r.relation for r in rules):
            out.append(cfg)
    return out


def _violated_by_single_moves(
    rules: set[PairRule], grounding: Grounding, goal: GoalConfig
) -> bool:
    """True iff every single-object deviation from goal breaks some constraint."""
    for obj, true_bin in goal.items():
        for alt in DESTINATION_BINS:
            if alt is true_bin:
                continue
            moved = dict(goal)
            moved[obj] = alt
            ok = all(
                relation_between(moved[r.a], moved[r.b]) is r.relation for r in rules
            ) and moved[grounding.obj] is grounding.bin
            if ok:
                return False
    return True


def minimize_rules(
    exhaustive: set[PairRule], goal: GoalConfig, grounding: Grounding, seed: int
) -> set[PairRule]:
    """Greedily drop rules (seeded order) while uniqueness is preserved.

    The result C satisfies: C + grounding has exactly one satisfying config;
    removing any rule admits more; every single-object move from the goal
    violates C + grounding.
    """
    objects = sorted(goal)
    rng = random.Random(f"minimize:{seed}")
    current = set(exhaustive)
    order = sorted(current, key=str)
    rng.shuffle(order)
    for rule in order:
        trial = current - {rule}
        if len(enumerate_satisfying(trial, grounding, objects)) == 1:
            current = trial
    assert _violated_by_single_moves(current, grounding, goal)
    return current


def split_constraints(
    rules: set[PairRule],
    grounding: Grounding,
    goal: GoalConfig,
    seed: int,
    max_tries: int = 64,
) -> tuple[set[Constraint], set[Constraint]]:
    """Partition rules + grounding so neither side alone pins the goal."""
    if not rules:
        raise SplitInfeasible("no pair rules to split")
    objects = sorted(goal)
    rng = random.Random(f"split:{seed}")
    ordered = sorted(rules, key=str)
    for _ in range(max_tries):
        p1: set[Constraint] = set()
        p2: set[Constraint] = set()
        for r in ordered:
            (p1 if rng.random() < 0.5 else p2).add(r)
        (p1 if rng.random() < 0.5 else p2).add(grounding)
        if _holding_solves(p1, objects) or _holding_solves(p2, objects):
            continue
        return p1, p2
    raise SplitInfeasible("no valid split found within retry budget")


def _holding_solves(holding: set[Constraint], objects: list[str]) -> bool:
    rules = {c for c in holding if isinstance(c, PairRule)}
    grounding = next((c for c in holding if isinstance(c, Grounding)), None)
    return len(enumerate_satisfying(rules, grounding, objects)) == 1


def generate_puzzle(
    n_objects: int, seed: int, object_names: tuple[str, ...] = DEFAULT_OBJECT_NAMES
) -> PuzzleInstance:
    """Deterministically generate one valid puzzle for (n_objects, seed)."""
    if not 2 <= n_objects <= MAX_OBJECTS:
        raise InvalidInput(f"n_objects must be in [2, {MAX_OBJECTS}], got {n_objects}")
    objects = list(object_names[:n_objects])
    for attempt in range(64):
        sub_seed = seed * 1000 + attempt
        goal = sample_goal(objects, sub_seed)
        rules_all = exhaustive_rules(goal)
        rng = random.Random(f"grounding:{sub_seed}")
        grounded_obj = rng.choice(objects)
        grounding = Grounding(grounded_obj, goal[grounded_obj])
        rules = minimize_rules(rules_all, goal, grounding, sub_seed)
        try:
            p1, p2 = split_constraints(rules, grounding, goal, sub_seed)
        except SplitInfeasible:
            continue
        layout_rng = random.Random(f"layout:{sub_seed}")
        initial = {
            o: (Bin.AREA_P1 if layout_rng.random() < 0.5 else Bin.AREA_P2)
            for o in objects
        }
        key = str  # stable serialization order within splits
        return PuzzleInstance(
            objects=tuple(objects),
            goal=tuple((o, goal[o]) for o in objects),
            rules=tuple(sorted(rules, key=key)),
            grounding=grounding,
            split_p1=tuple(sorted(p1, key=key)),
            split_p2=tuple(sorted(p2, key=key)),
            initial_layout=tuple((o, initial[o]) for o in objects),
            seed=seed,
        )
    raise SplitInfeasible(f"could not generate a splittable puzzle for seed {seed}")


def fixture_p0() -> PuzzleInstance:
    """The two-object reference puzzle used across the test suite."""
    grounding = Grounding("A", Bin.BOTTOM_LEFT)
    rule = pair_rule("A", "B", relation_between(Bin.BOTTOM_LEFT, Bin.BOTTOM_RIGHT))
    return PuzzleInstance(
        objects=("A", "B"),
        goal=(("A", Bin.BOTTOM_LEFT), ("B", Bin.BOTTOM_RIGHT)),
        rules=(rule,),
        grounding=grounding,
        split_p1=(grounding,),
        split_p2=(rule,),
        initial_layout=(("A", Bin.AREA_P1), ("B", Bin.AREA_P2)),
        seed=0,
    )


def write_jsonl(puzzles: list[PuzzleInstance], path: str) -> None:
    with open(path, "w") as fh:
        for p in puzzles:
            fh.write(json.dumps(p.to_json(), sort_keys=True) + "\n")


def read_jsonl(path: str) -> list[PuzzleInstance]:
    out = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                out.append(PuzzleInstance.from_json(json.loads(line)))
    return out
