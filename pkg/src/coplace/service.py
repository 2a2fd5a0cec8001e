"""Session service hosting human-vs-agent games over HTTP.

The human always sits as p1; the agent's action-space configuration and
verifier stack are never serialized into human-visible payloads.  Every
consumed turn and submitted survey is appended to a per-session JSON-lines
event log, from which the exact session state can be rebuilt.
"""

from __future__ import annotations

import asyncio
import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import StreamingResponse
from pydantic import BaseModel

from .domain import ParseError, Player, parse_action_text
from .engine import (
    ActionSpace,
    GameState,
    IllegalAction,
    Outcome,
    Status,
    annotate_last,
    apply,
    apply_noop,
    new_game,
)
from .planning import PlannerAgent, knowledge_for
from .puzzles import PuzzleInstance, generate_puzzle
from .verify import best_of_n, classify_errors

SURVEY_QUESTIONS = (
    "Did you find the information communicated by the bot useful?",
    "Did the bot make effective use of the information you shared?",
    "Were you ever confused by the bot's behavior?",
)


@dataclass
class GameSpec:
    puzzle: PuzzleInstance
    agent_config: ActionSpace
    verifier_stack: str = "reasoning"
    practice: bool = False

    def to_json(self) -> dict:
        return {
            "puzzle": self.puzzle.to_json(),
            "agent_config": self.agent_config.value,
            "verifier_stack": self.verifier_stack,
            "practice": self.practice,
        }

    @classmethod
    def from_json(cls, data: dict) -> "GameSpec":
        return cls(
            puzzle=PuzzleInstance.from_json(data["puzzle"]),
            agent_config=ActionSpace(data["agent_config"]),
            verifier_stack=data["verifier_stack"],
            practice=data["practice"],
        )


def default_game_list(seed: int = 7) -> list[GameSpec]:
    """One practice game plus 9 study games (3 each of 4/5/6 objects)."""
    games = [GameSpec(generate_puzzle(4, seed), ActionSpace.PROVIDE_AND_SEEK, practice=True)]
    configs = list(ActionSpace)
    i = 0
    for n in (4, 5, 6):
        for j in range(3):
            games.append(
                GameSpec(
                    generate_puzzle(n, seed + 100 + i),
                    configs[i % len(configs)],
                )
            )
            i += 1
    return games


@dataclass
class Session:
    session_id: str
    participant_id: str
    games: list[GameSpec]
    game_index: int = 0
    state: GameState | None = None
    feedback: list[list[int]] = field(default_factory=list)
    complete: bool = False
    lock: threading.Lock = field(default_factory=threading.Lock)
    listeners: list[asyncio.Queue] = field(default_factory=list)

    @property
    def current(self) -> GameSpec:
        return self.games[self.game_index]


def _human_view(session: Session) -> dict:
    """Everything the participant may see; never the agent's constraints."""
    state = session.state
    assert state is not None
    spec = session.current
    return {
        "session_id": session.session_id,
        "game_index": session.game_index,
        "game_count": len(session.games),
        "practice": spec.practice,
        "status": state.status.value,
        "step_count": state.step_count,
        "step_limit": state.step_limit,
        "turn": state.turn.value,
        "board": {o: b.value for o, b in state.placements},
        "objects": list(state.puzzle.objects),
        "your_constraints": [str(c) for c in state.puzzle.constraints_of(Player.P1)],
        "pending_ask": (
            {"asker": state.pending_ask[0].value, "object": state.pending_ask[1]}
            if state.pending_ask
            else None
        ),
        "survey_questions": list(SURVEY_QUESTIONS),
        "complete": session.complete,
    }


def _history_view(session: Session) -> list[dict]:
    assert session.state is not None
    return [_record_view(rec) for rec in session.state.history]


def _record_view(rec) -> dict:
    return {
        "index": rec.index,
        "actor": rec.actor.value,
        "action": str(rec.action),
        "outcome": rec.outcome.value,
    }


class CreateSessionBody(BaseModel):
    game_list_id: str = "default"
    participant_id: str


class ActionBody(BaseModel):
    action: str


class FeedbackBody(BaseModel):
    answers: list[int]


class SessionStore:
    """In-memory sessions backed by append-only per-session event logs."""

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        (self.data_dir / "sessions").mkdir(parents=True, exist_ok=True)
        self.sessions: dict[str, Session] = {}
        self.game_lists: dict[str, list[GameSpec]] = {"default": default_game_list()}

    def register_game_list(self, list_id: str, games: list[GameSpec]) -> None:
        self.game_lists[list_id] = games

    def _log_path(self, session_id: str) -> Path:
        return self.data_dir / "sessions" / f"{session_id}.jsonl"

    def _append(self, session_id: str, event: dict) -> None:
        with open(self._log_path(session_id), "a") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")

    def create(self, game_list_id: str, participant_id: str) -> Session:
        if game_list_id not in self.game_lists:
            raise KeyError(game_list_id)
        session = Session(
            session_id=uuid.uuid4().hex,
            participant_id=participant_id,
            games=self.game_lists[game_list_id],
        )
        session.state = new_game(
            session.current.puzzle,
            {
                Player.P1: ActionSpace.PROVIDE_AND_SEEK,
                Player.P2: session.current.agent_config,
            },
        )
        self.sessions[session.session_id] = session
        self._append(
            session.session_id,
            {
                "type": "session_created",
                "participant_id": participant_id,
                "game_list_id": game_list_id,
                "games": [g.to_json() for g in session.games],
            },
        )
        return session

    def get(self, session_id: str) -> Session:
        if session_id not in self.sessions:
            loaded = self.load(session_id)
            if loaded is None:
                raise KeyError(session_id)
            self.sessions[session_id] = loaded
        return self.sessions[session_id]

    def load(self, session_id: str) -> Session | None:
        """Rebuild a session by replaying its event log."""
        path = self._log_path(session_id)
        if not path.exists():
            return None
        session: Session | None = None
        with open(path) as fh:
            for line in fh:
                event = json.loads(line)
                if event["type"] == "session_created":
                    session = Session(
                        session_id=session_id,
                        participant_id=event["participant_id"],
                        games=[GameSpec.from_json(g) for g in event["games"]],
                    )
                    session.state = self._fresh_state(session)
                elif event["type"] == "turn":
                    assert session is not None and session.state is not None
                    action = parse_action_text(event["action"])
                    if event["outcome"] == Outcome.ILLEGAL_NOOP.value:
                        session.state = apply_noop(session.state, action, "illegal")
                    else:
                        session.state, _ = apply(session.state, action)
                elif event["type"] == "feedback":
                    assert session is not None
                    session.feedback.append(event["answers"])
                    self._advance_locked(session, log=False)
        return session

    def _fresh_state(self, session: Session) -> GameState:
        spec = session.current
        return new_game(
            spec.puzzle,
            {Player.P1: ActionSpace.PROVIDE_AND_SEEK, Player.P2: spec.agent_config},
        )

    def log_turn(self, session: Session, rec) -> None:
        self._append(
            session.session_id,
            {"type": "turn", **_record_view(rec)},
        )
        self.notify(session, {"type": "turn", **_record_view(rec)})

    def notify(self, session: Session, event: dict) -> None:
        for queue in list(session.listeners):
            try:
                queue.put_nowait(event)
            except asyncio.QueueFull:
                pass

    def _advance_locked(self, session: Session, log: bool = True) -> None:
        if session.game_index + 1 < len(session.games):
            session.game_index += 1
            session.state = self._fresh_state(session)
        else:
            session.complete = True
        if log:
            self._append(
                session.session_id,
                {"type": "advanced", "game_index": session.game_index,
                 "complete": session.complete},
            )

    def submit_feedback(self, session: Session, answers: list[int]) -> None:
        self._append(session.session_id, {"type": "feedback", "answers": answers})
        session.feedback.append(answers)
        self._advance_locked(session)
        self.notify(session, {"type": "advanced", "game_index": session.game_index})


def _agent_turn(store: SessionStore, session: Session) -> list[dict]:
    """Drive the agent's reply after a human turn; returns its record views."""
    out = []
    state = session.state
    assert state is not None
    spec = session.current
    if state.status is not Status.RUNNING or state.turn is not Player.P2:
        return out
    agent = PlannerAgent(spec.agent_config)
    texts = agent.step(state, Player.P2)
    kg = knowledge_for(state, Player.P2)
    action, corrected, _ = best_of_n(state, kg, texts, spec.verifier_stack)
    before = state
    state, outcome = apply(state, action)
    labels = classify_errors(before, kg, action, outcome)
    state = annotate_last(
        state, tuple(texts), corrected, tuple(sorted(l.value for l in labels))
    )
    session.state = state
    rec = state.history[-1]
    store.log_turn(session, rec)
    out.append(_record_view(rec))
    return out


def create_app(data_dir: str | Path = "coplace_data") -> FastAPI:
    app = FastAPI(title="coplace session service")
    # the browser client is served from its own origin
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    store = SessionStore(data_dir)
    app.state.store = store

    @app.post("/sessions")
    def create_session(body: CreateSessionBody):
        try:
            session = store.create(body.game_list_id, body.participant_id)
        except KeyError:
            raise HTTPException(404, f"unknown game list: {body.game_list_id}")
        return _human_view(session)

    @app.get("/sessions/{session_id}/state")
    def get_state(session_id: str):
        session = _get(session_id)
        return _human_view(session)

    @app.get("/sessions/{session_id}/history")
    def get_history(session_id: str):
        session = _get(session_id)
        return {"history": _history_view(session)}

    @app.post("/sessions/{session_id}/action")
    def submit_action(session_id: str, body: ActionBody):
        session = _get(session_id)
        with session.lock:
            state = session.state
            assert state is not None
            if state.status is not Status.RUNNING:
                raise HTTPException(409, "game is not running")
            if state.turn is not Player.P1:
                raise HTTPException(409, "not your turn")
            try:
                action = parse_action_text(body.action)
            except ParseError as exc:
                raise HTTPException(400, f"malformed action: {exc}")
            try:
                new_state, outcome = apply(state, action)
            except IllegalAction as exc:
                # Affordance errors are free for humans: no step consumed.
                raise HTTPException(422, str(exc))
            session.state = new_state
            human_rec = new_state.history[-1]
            store.log_turn(session, human_rec)
            agent_records = _agent_turn(store, session)
            terminal = session.state.status is not Status.RUNNING
            return {
                "human": _record_view(human_rec),
                "agent": agent_records,
                "state": _human_view(session),
                "survey_due": terminal,
            }

    @app.post("/sessions/{session_id}/feedback")
    def submit_feedback(session_id: str, body: FeedbackBody):
        session = _get(session_id)
        with session.lock:
            assert session.state is not None
            if session.state.status is Status.RUNNING:
                raise HTTPException(412, "game is not finished yet")
            if len(body.answers) != len(SURVEY_QUESTIONS):
                raise HTTPException(400, f"expected {len(SURVEY_QUESTIONS)} answers")
            if any(not 1 <= a <= 5 for a in body.answers):
                raise HTTPException(400, "answers must be on the 1-5 scale")
            store.submit_feedback(session, body.answers)
            return {"ok": True, "state": _human_view(session)}

    @app.get("/sessions/{session_id}/events")
    async def events(session_id: str):
        session = _get(session_id)
        queue: asyncio.Queue = asyncio.Queue(maxsize=256)
        session.listeners.append(queue)

        async def stream():
            try:
                while True:
                    event = await queue.get()
                    yield f"data: {json.dumps(event)}\n\n"
            finally:
                session.listeners.remove(queue)

        return StreamingResponse(stream(), media_type="text/event-stream")

    def _get(session_id: str) -> Session:
        try:
            return store.get(session_id)
        except KeyError:
            raise HTTPException(404, f"unknown session: {session_id}")

    return app
