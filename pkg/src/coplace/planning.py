"""Joint BFS planning, scripted agents and the text protocol.

The offline planner searches joint action sequences where each turn's
candidates are generated only from the acting player's knowledge (own
constraints, dialogue so far, public board).  Guessing configs use
lucky-guess semantics: a blind placement is assumed to succeed first try.
The online greedy agent applies the same candidate rules one turn at a
time and falls back to guessing when communication is exhausted.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache

from .domain import (
    Action,
    Ask,
    Bin,
    Constraint,
    CoplaceError,
    DESTINATION_BINS,
    Grounding,
    Move,
    Observation,
    PASS,
    PairRule,
    Pass,
    Player,
    Share,
    reachable_bins,
)
from .engine import (
    ActionSpace,
    GameState,
    Outcome,
    Status,
    apply,
    new_game,
)
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
from .puzzles import PuzzleInstance
from .verify import parse_action, public_knowledge

BIN_GUESS_ORDER = (Bin.TOP_LEFT, Bin.TOP_RIGHT, Bin.BOTTOM_LEFT, Bin.BOTTOM_RIGHT)


class Unsolvable(CoplaceError):
    pass


def _public_events(state: GameState) -> tuple:
    """The knowledge-relevant public events, as a hashable tuple."""
    out = []
    for rec in state.history:
        if isinstance(rec.action, Share) and rec.outcome is Outcome.ACCEPTED:
            out.append(("share", rec.action.constraint))
        elif isinstance(rec.action, Move):
            if rec.outcome is Outcome.ACCEPTED:
                out.append(("acc", rec.action.obj, rec.action.dst))
            elif rec.outcome is Outcome.REJECTED_PLACEMENT:
                out.append(("rej", rec.action.obj, rec.action.dst))
    return tuple(out)


@lru_cache(maxsize=65536)
def _kg_from_events(
    constraints: tuple, objects: tuple, player: Player, events: tuple
) -> KnowledgeGraph:
    kg = init_knowledge(constraints, objects, player)
    for ev in events:
        if ev[0] == "share":
            kg = assimilate(kg, ConstraintShared(ev[1]))
        elif ev[0] == "acc":
            kg = assimilate(kg, MoveAccepted(ev[1], ev[2]))
        else:
            kg = assimilate(kg, MoveRejected(ev[1], ev[2]))
    return kg


def knowledge_for(state: GameState, player: Player) -> KnowledgeGraph:
    """The player's full knowledge: own constraints plus all public events."""
    return _kg_from_events(
        state.puzzle.constraints_of(player),
        state.puzzle.objects,
        player,
        _public_events(state),
    )


def render_observation_text(obs: Observation) -> str:
    """Deterministic prompt rendering of one player's view."""
    lines = [f"You are {obs.player.value}. Step {obs.step_count} of {obs.step_limit}."]
    lines.append("Board:")
    for obj, loc in obs.placements:
        lines.append(f"  {obj}: {loc.value}")
    lines.append("Your constraints:")
    for c in obs.own_constraints:
        lines.append(f"  {c}")
    lines.append("History:")
    for entry in obs.history:
        lines.append(f"  {entry}")
    if obs.pending_ask is not None:
        asker, obj = obs.pending_ask
        lines.append(f"Pending question: {asker.value} asked about {obj}.")
    lines.append(
        "Reply with one action: move(obj, from, to), share(constraint), "
        "ask(obj), or pass."
    )
    return "\n".join(lines)


def observation_for(state: GameState, player: Player) -> Observation:
    rendered = tuple(
        f"{rec.actor.value}: {rec.action} -> {rec.outcome.value}" for rec in state.history
    )
    return Observation(
        player=player,
        placements=state.placements,
        own_constraints=state.puzzle.constraints_of(player),
        history=rendered,
        step_count=state.step_count,
        step_limit=state.step_limit,
        pending_ask=state.pending_ask,
    )


# --------------------------------------------------------------------------
# Candidate generation shared by the offline planner and the greedy agent.
# --------------------------------------------------------------------------


def _deduced_moves(state: GameState, player: Player, kg: KnowledgeGraph) -> list[Move]:
    closure = expand(kg)
    if not closure.consistent:
        return []
    reach = reachable_bins(player)
    out: list[Move] = []
    for obj in state.puzzle.objects:
        loc = state.location_of(obj)
        if loc in DESTINATION_BINS or loc not in reach:
            continue
        target = goal_of(kg, obj, closure)
        if target is None:
            continue
        if target in reach:
            out.append(Move(obj, loc, target))
        elif loc is not Bin.COMMON:
            out.append(Move(obj, loc, Bin.COMMON))
    return out


def _share_candidates(state: GameState, player: Player) -> list[Share]:
    """Held constraints worth sharing: not yet communicated and not derivable
    from what the partner provably has."""
    config = state.configs[player]
    shared = set(map(str, state.shared_constraints()))
    held = [c for c in state.puzzle.constraints_of(player) if str(c) not in shared]
    if held:
        pub = public_knowledge(state)
        held = [c for c in held if not entails(pub, c)]
    if config.can_share_freely:
        return [Share(c) for c in held]
    if config.can_share_on_ask and state.pending_ask is not None:
        asker, obj = state.pending_ask
        if asker is player.other:
            return [Share(c) for c in held if c.involves(obj)]
    return []


def _ask_candidates(state: GameState, player: Player, kg: KnowledgeGraph) -> list[Ask]:
    if not state.configs[player].can_ask:
        return []
    closure = expand(kg)
    if not closure.consistent:
        return []
    out = []
    for obj in state.puzzle.objects:
        if state.location_of(obj) in DESTINATION_BINS:
            continue
        if goal_of(kg, obj, closure) is None and state.pending_ask != (player, obj):
            out.append(Ask(obj))
    return out


def _lucky_guesses(state: GameState, player: Player, kg: KnowledgeGraph) -> list[Move]:
    """Blind placements assumed to succeed first try (planner semantics)."""
    closure = expand(kg)
    reach = reachable_bins(player)
    goal = state.puzzle.goal_map
    out: list[Move] = []
    for obj in state.puzzle.objects:
        loc = state.location_of(obj)
        if loc in DESTINATION_BINS or loc not in reach:
            continue
        if closure.consistent and goal_of(kg, obj, closure) is not None:
            continue  # known goals are handled by deduced moves
        target = goal[obj]
        if target in reach:
            out.append(Move(obj, loc, target))
        elif loc is not Bin.COMMON:
            out.append(Move(obj, loc, Bin.COMMON))
    return out


def planner_candidates(state: GameState, player: Player) -> list[Action]:
    """Knowledge-grounded candidates, in deterministic priority order.

    Lucky guesses appear only once every other avenue is exhausted; pass is
    always last.
    """
    kg = knowledge_for(state, player)
    moves = sorted(_deduced_moves(state, player, kg), key=str)
    shares = sorted(_share_candidates(state, player), key=str)
    asks = sorted(_ask_candidates(state, player, kg), key=str)
    out: list[Action] = [*moves, *shares, *asks]
    if not out:
        out.extend(sorted(_lucky_guesses(state, player, kg), key=str))
    out.append(PASS)
    return out


# --------------------------------------------------------------------------
# Offline joint search.
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Trajectory:
    puzzle: PuzzleInstance
    configs: dict[Player, ActionSpace] = field(compare=False)
    steps: tuple[tuple[Player, Action], ...] = ()
    rationales: tuple[str | None, ...] = ()
    status: Status = Status.SOLVED

    @property
    def step_count(self) -> int:
        return len(self.steps)

    def replay(self, step_limit: int = 30) -> GameState:
        state = new_game(self.puzzle, self.configs, step_limit)
        for player, action in self.steps:
            assert state.turn is player
            state, _ = apply(state, action)
        return state

    def to_json(self) -> dict:
        return {
            "puzzle": self.puzzle.to_json(),
            "configs": {p.value: c.value for p, c in self.configs.items()},
            "steps": [[p.value, str(a)] for p, a in self.steps],
            "rationales": list(self.rationales) if self.rationales else None,
            "status": self.status.value,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Trajectory":
        from .domain import parse_action_text

        rationales = data.get("rationales")
        steps = tuple(
            (Player(p), parse_action_text(a)) for p, a in data["steps"]
        )
        return cls(
            puzzle=PuzzleInstance.from_json(data["puzzle"]),
            configs={Player(p): ActionSpace(c) for p, c in data["configs"].items()},
            steps=steps,
            rationales=tuple(rationales) if rationales else (None,) * len(steps),
            status=Status(data["status"]),
        )


def _state_key(state: GameState) -> tuple:
    shared = frozenset(map(str, state.shared_constraints()))
    last_pass = bool(state.history) and isinstance(state.history[-1].action, Pass)
    return (state.placements, state.turn, shared, state.pending_ask, last_pass)


def _expand_edges(state: GameState) -> list[tuple[Action, GameState]]:
    """Successors under planner candidate semantics (lucky-guess world)."""
    player = state.turn
    out = []
    last_pass = bool(state.history) and isinstance(state.history[-1].action, Pass)
    for action in planner_candidates(state, player):
        if isinstance(action, Pass) and last_pass:
            continue  # two consecutive passes never help
        nxt, outcome = apply(state, action)
        assert outcome is not Outcome.REJECTED_PLACEMENT, "planner guesses are lucky"
        out.append((action, nxt))
    return out


def plan_optimal(
    puzzle: PuzzleInstance,
    configs: dict[Player, ActionSpace] | None = None,
    step_limit: int = 30,
) -> Trajectory:
    """Minimum-step joint trajectory under perspective-taking candidates."""
    configs = configs or {p: ActionSpace.PROVIDE_AND_SEEK for p in Player}
    start = new_game(puzzle, configs, step_limit)
    if start.status is Status.SOLVED:
        return Trajectory(puzzle, configs, (), (), Status.SOLVED)
    seen = {_state_key(start)}
    queue: deque[tuple[GameState, tuple[tuple[Player, Action], ...]]] = deque(
        [(start, ())]
    )
    while queue:
        state, path = queue.popleft()
        if state.step_count >= step_limit:
            continue
        for action, nxt in _expand_edges(state):
            new_path = path + ((state.turn, action),)
            if nxt.status is Status.SOLVED:
                return Trajectory(
                    puzzle, configs, new_path, (None,) * len(new_path), Status.SOLVED
                )
            key = _state_key(nxt)
            if key in seen:
                continue
            seen.add(key)
            queue.append((nxt, new_path))
    raise Unsolvable(f"no solution within {step_limit} steps")


def _random_rollout(start: GameState, rng: random.Random) -> Trajectory | None:
    """One randomized greedy trajectory in the lucky-guess world.

    Keeps the planner's priority gating (moves before shares before asks,
    guesses last) but breaks ties randomly within the chosen tier.
    """
    state = start
    steps: list[tuple[Player, Action]] = []
    while state.status is Status.RUNNING and state.step_count < state.step_limit:
        player = state.turn
        kg = knowledge_for(state, player)
        last_pass = bool(state.history) and isinstance(state.history[-1].action, Pass)
        tiers = [
            _deduced_moves(state, player, kg),
            _share_candidates(state, player),
            _ask_candidates(state, player, kg),
        ]
        if not any(tiers):
            tiers.append(_lucky_guesses(state, player, kg))
        action: Action | None = None
        for tier in tiers:
            if tier:
                action = rng.choice(sorted(tier, key=str))
                break
        if action is None:
            if last_pass:
                return None
            action = PASS
        steps.append((player, action))
        state, outcome = apply(state, action)
        assert outcome is not Outcome.REJECTED_PLACEMENT
    if state.status is not Status.SOLVED:
        return None
    return Trajectory(
        start.puzzle, dict(start.configs), tuple(steps), (None,) * len(steps), Status.SOLVED
    )


def sample_trajectories(
    puzzle: PuzzleInstance,
    configs: dict[Player, ActionSpace] | None = None,
    k: int = 5,
    seed: int = 0,
    rollouts: int = 40,
    slack: int = 3,
    step_limit: int = 30,
) -> list[Trajectory]:
    """Up to k distinct short trajectories from randomized greedy rollouts.

    Much cheaper than exhaustive enumeration on larger boards; kept within
    best-found-length + slack rather than provably optimal + slack.
    """
    configs = configs or {p: ActionSpace.PROVIDE_AND_SEEK for p in Player}
    start = new_game(puzzle, configs, step_limit)
    rng = random.Random(f"rollouts:{seed}")
    found: dict[tuple, Trajectory] = {}
    for _ in range(rollouts):
        traj = _random_rollout(start, rng)
        if traj is not None:
            found.setdefault(traj.steps, traj)
    if not found:
        raise Unsolvable(f"no rollout solved within {step_limit} steps")
    ranked = sorted(found.values(), key=lambda t: (t.step_count, str(t.steps)))
    best = ranked[0].step_count
    kept = [t for t in ranked if t.step_count <= best + slack]
    return kept[:k]


def _greedy_lucky_length(start: GameState) -> int:
    """Length of one greedy lucky-world trajectory; an upper bound on optimal."""
    state = start
    while state.status is Status.RUNNING and state.step_count < state.step_limit:
        last_pass = bool(state.history) and isinstance(state.history[-1].action, Pass)
        chosen = None
        for action in planner_candidates(state, state.turn):
            if isinstance(action, Pass) and last_pass:
                continue
            chosen = action
            break
        if chosen is None:
            return state.step_limit
        state, _ = apply(state, chosen)
    if state.status is not Status.SOLVED:
        return state.step_limit
    return state.step_count


def plan_near_optimal(
    puzzle: PuzzleInstance,
    configs: dict[Player, ActionSpace] | None = None,
    slack: int = 2,
    k: int = 5,
    seed: int = 0,
    step_limit: int = 30,
    search_cap: int = 400,
) -> list[Trajectory]:
    """Up to k distinct solving trajectories within optimal + slack steps.

    Seeded sampling keeps both share-led and ask-led strategies represented
    when both exist within the bound.
    """
    configs = configs or {p: ActionSpace.PROVIDE_AND_SEEK for p in Player}

    # Layered forward pass: discover the optimal depth on the fly, then keep
    # expanding until optimal + slack.  An admissible remaining-step bound
    # (each unplaced object needs one move, two when it must pass through the
    # common bin) prunes the frontier; a greedy lucky-world rollout seeds the
    # global bound so pruning is active before the first solution is found.
    start = new_game(puzzle, configs, step_limit)
    depth = {_state_key(start): 0}
    states = {_state_key(start): start}
    edges: dict[tuple, list[tuple[Action, tuple]]] = {}
    greedy_len = _greedy_lucky_length(start)
    bound = min(step_limit, greedy_len + slack)
    frontier = [start]
    d = 0

    goal = puzzle.goal_map

    def _h(state: GameState) -> int:
        need = 0
        for obj, b in state.placements:
            if b in DESTINATION_BINS:
                continue
            if b is Bin.COMMON:
                need += 1
            elif goal[obj] in reachable_bins(
                Player.P1 if b is Bin.AREA_P1 else Player.P2
            ):
                need += 1
            else:
                need += 2  # handover through the common bin first
        return need

    while frontier and d < bound:
        next_frontier = []
        for state in frontier:
            key = _state_key(state)
            if state.status is not Status.RUNNING or d + _h(state) > bound:
                continue
            succ = []
            for action, nxt in _expand_edges(state):
                nkey = _state_key(nxt)
                succ.append((action, nkey))
                if nkey not in depth:
                    depth[nkey] = d + 1
                    states[nkey] = nxt
                    if nxt.status is Status.SOLVED:
                        bound = min(bound, d + 1 + slack)
                    elif d + 1 + _h(nxt) <= bound:
                        next_frontier.append(nxt)
            edges[key] = succ
        frontier = next_frontier
        d += 1

    if not any(states[k].status is Status.SOLVED for k in states):
        raise Unsolvable(f"no solution within {step_limit} steps")

    # Backward pass: exact remaining distance to a solved state.
    remaining = {
        key: 0 for key, st in states.items() if st.status is Status.SOLVED
    }
    changed = True
    while changed:
        changed = False
        for key, succ in edges.items():
            best = min(
                (remaining[nkey] + 1 for _, nkey in succ if nkey in remaining),
                default=None,
            )
            if best is not None and remaining.get(key, bound + 1) > best:
                remaining[key] = best
                changed = True

    collected: list[Trajectory] = []

    def dfs(key: tuple, path: tuple[tuple[Player, Action], ...]) -> None:
        if len(collected) >= search_cap:
            return
        state = states[key]
        if state.status is Status.SOLVED:
            collected.append(
                Trajectory(puzzle, configs, path, (None,) * len(path), Status.SOLVED)
            )
            return
        for action, nkey in edges.get(key, ()):
            if nkey not in remaining:
                continue
            if len(path) + 1 + remaining[nkey] > bound:
                continue
            dfs(nkey, path + ((state.turn, action),))

    dfs(_state_key(start), ())

    rng = random.Random(f"near_optimal:{seed}")
    rng.shuffle(collected)

    def has_ask(t: Trajectory) -> bool:
        return any(isinstance(a, Ask) for _, a in t.steps)

    def has_share(t: Trajectory) -> bool:
        return any(isinstance(a, Share) for _, a in t.steps)

    picked: list[Trajectory] = []
    for pred in (has_ask, has_share):
        for t in collected:
            if pred(t) and t not in picked:
                picked.append(t)
                break
    for t in collected:
        if len(picked) >= k:
            break
        if t not in picked:
            picked.append(t)
    return picked[:k]


# --------------------------------------------------------------------------
# Online agents.
# --------------------------------------------------------------------------


class AgentPolicy:
    """A policy produces one or more candidate action texts per turn."""

    config: ActionSpace

    def step(self, state: GameState, player: Player) -> list[str]:
        raise NotImplementedError


def _wrap(action: Action) -> str:
    return f"<ACTION>{action}</ACTION>"


def _futile_asks(state: GameState, player: Player) -> set[str]:
    """Objects this player asked about without receiving a relevant share."""
    futile: set[str] = set()
    history = state.history
    for i, rec in enumerate(history):
        if rec.actor is not player or not isinstance(rec.action, Ask):
            continue
        answered = False
        for later in history[i + 1 :]:
            if later.actor is player.other and isinstance(later.action, Share):
                if later.action.constraint.involves(rec.action.obj):
                    answered = True
                break
            if later.actor is player.other:
                break  # partner did something else first
        if not answered and (i + 1) < len(history):
            futile.add(rec.action.obj)
    return futile


def guessing_policy(
    state: GameState,
    player: Player,
    kg: KnowledgeGraph,
    rng: random.Random | None = None,
) -> Action | None:
    """Trial placement for the first guessable object, or a handover to the
    common bin when every remaining candidate is across the table."""
    closure = expand(kg)
    if not closure.consistent:
        return None
    reach = reachable_bins(player)
    for obj in state.puzzle.objects:
        loc = state.location_of(obj)
        if loc in DESTINATION_BINS or loc not in reach:
            continue
        cands = closure.candidates.get(obj, frozenset(DESTINATION_BINS))
        reachable_cands = [b for b in BIN_GUESS_ORDER if b in cands and b in reach]
        if reachable_cands:
            target = rng.choice(reachable_cands) if rng is not None else reachable_cands[0]
            return Move(obj, loc, target)
        if cands and loc is not Bin.COMMON:
            return Move(obj, loc, Bin.COMMON)
    return None


class PlannerAgent(AgentPolicy):
    """Greedy one-step agent applying the planner's candidate priorities."""

    def __init__(self, config: ActionSpace, guess_rng: random.Random | None = None):
        self.config = config
        self.guess_rng = guess_rng

    def choose(self, state: GameState, player: Player) -> Action:
        kg = knowledge_for(state, player)
        moves = sorted(_deduced_moves(state, player, kg), key=str)
        if moves:
            return moves[0]

        shares = _share_candidates(state, player)
        if state.pending_ask is not None and state.pending_ask[0] is player.other:
            answers = [s for s in shares if s.constraint.involves(state.pending_ask[1])]
            if answers:
                return sorted(answers, key=str)[0]
        if shares:
            return sorted(shares, key=str)[0]

        futile = _futile_asks(state, player)
        asks = [a for a in _ask_candidates(state, player, kg) if a.obj not in futile]
        if asks:
            return sorted(asks, key=str)[0]

        guess = guessing_policy(state, player, kg, self.guess_rng)
        if guess is not None:
            return guess
        return PASS

    def step(self, state: GameState, player: Player) -> list[str]:
        return [_wrap(self.choose(state, player))]


class NoisyPlannerAgent(PlannerAgent):
    """Planner agent whose samples are randomly corrupted with probability p.

    A corrupted sample is a uniformly drawn affordance-legal action; used to
    measure the verifier's directional benefit.
    """

    def __init__(
        self,
        config: ActionSpace,
        noise: float,
        seed: int,
        n_samples: int = 4,
    ):
        super().__init__(config)
        self.noise = noise
        self.n_samples = n_samples
        self.rng = random.Random(f"noisy:{seed}")

    def step(self, state: GameState, player: Player) -> list[str]:
        from .engine import legal_actions

        good = self.choose(state, player)
        menu = legal_actions(state, player)
        out = []
        for _ in range(self.n_samples):
            if self.rng.random() < self.noise:
                out.append(_wrap(self.rng.choice(menu)))
            else:
                out.append(_wrap(good))
        return out


def planner_agent_step(
    state: GameState, player: Player, config: ActionSpace
) -> Action:
    """Convenience single-call form of the greedy agent."""
    return PlannerAgent(config).choose(state, player)
