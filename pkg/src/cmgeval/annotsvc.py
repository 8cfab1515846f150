"""HTTP service for labeling sessions over a corpus of machine drafts.

Each session walks its own seeded shuffle of the commits. The browser sends
editor change events (position, deleted length, inserted text) in contiguous
batches; the service appends them to a durable log and only accepts a final
submission when replaying the logged events over the draft reproduces the
submitted text byte for byte. Export produces corpus-format JSONL plus the
full event stream, so every accepted edit can be reproduced offline.

Suspicious submissions are flagged, not blocked: a zero-edit submission, or a
single large insertion copied from the commit summary pane.
"""

import json
import threading
import time
from dataclasses import asdict, dataclass
from pathlib import Path

from . import corpus as cp

HELP_TEXT = (
    "Edit the draft commit message until you would be comfortable committing"
    " it as-is. Type your changes; avoid pasting text from elsewhere."
)

PASTE_FLAG_MIN_CHARS = 30


@dataclass(frozen=True)
class EditEvent:
    event_index: int
    timestamp: int
    position: int
    deleted_len: int
    inserted_text: str


class SessionNotFound(KeyError):
    pass


class ConflictError(ValueError):
    """Request is well-formed but inconsistent with session state."""

    def __init__(self, payload: dict):
        super().__init__(json.dumps(payload, sort_keys=True))
        self.payload = payload


def apply_events(base_text: str, events) -> str:
    """Fold editor change events over the starting text."""
    text = base_text
    for ev in events:
        if ev.position < 0 or ev.position > len(text):
            raise ValueError(f"event {ev.event_index}: position out of range")
        if ev.deleted_len < 0 or ev.position + ev.deleted_len > len(text):
            raise ValueError(f"event {ev.event_index}: deletes past end of text")
        text = (
            text[: ev.position]
            + ev.inserted_text
            + text[ev.position + ev.deleted_len :]
        )
    return text


def first_divergence(a: str, b: str) -> int:
    for i, (x, y) in enumerate(zip(a, b)):
        if x != y:
            return i
    return min(len(a), len(b))


def _event_from_dict(obj: dict) -> EditEvent:
    try:
        return EditEvent(
            event_index=int(obj["event_index"]),
            timestamp=int(obj["timestamp"]),
            position=int(obj["position"]),
            deleted_len=int(obj["deleted_len"]),
            inserted_text=str(obj["inserted_text"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConflictError({"error": f"malformed event: {exc}"}) from exc


@dataclass
class _Session:
    session_id: str
    annotator_id: str
    task_order: list[str]
    started_at: float
    actions: list[dict]

    @property
    def cursor(self) -> int:
        return len(self.actions)


class AnnotationService:
    """Stateful core behind the HTTP API; safe for concurrent callers."""

    def __init__(self, corpus, data_dir, seed: int = 0):
        self._corpus = list(corpus)
        self._dir = Path(data_dir)
        self._dir.mkdir(parents=True, exist_ok=True)
        self._seed = seed
        self._lock = threading.Lock()
        self._sessions: dict[str, _Session] = {}
        self._events: dict[tuple[str, str], list[EditEvent]] = {}
        self._event_lines: list[dict] = []

        self._task_commits = [
            record.commit_id
            for record in self._corpus
            if self._draft_node(record) is not None
        ]
        if not self._task_commits:
            raise ValueError("corpus has no commits with a model draft")
        self._by_commit = {r.commit_id: r for r in self._corpus}
        self._load_logs()

    # --- persistence -----------------------------------------------------

    def _path(self, name: str) -> Path:
        return self._dir / name

    def _append(self, name: str, obj: dict) -> None:
        line = json.dumps(obj, sort_keys=True, ensure_ascii=False)
        with self._path(name).open("a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()

    def _read_log(self, name: str):
        path = self._path(name)
        if not path.exists():
            return
        with path.open(encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    yield json.loads(line)

    def _load_logs(self) -> None:
        for obj in self._read_log("sessions.jsonl"):
            self._sessions[obj["session_id"]] = _Session(
                session_id=obj["session_id"],
                annotator_id=obj["annotator_id"],
                task_order=list(obj["task_order"]),
                started_at=obj["started_at"],
                actions=[],
            )
        for obj in self._read_log("events.jsonl"):
            key = (obj["session_id"], obj["message_id"])
            self._events.setdefault(key, []).append(_event_from_dict(obj["event"]))
            self._event_lines.append(obj)
        for obj in self._read_log("actions.jsonl"):
            self._sessions[obj["session_id"]].actions.append(obj)

    # --- helpers -----------------------------------------------------------

    @staticmethod
    def _draft_node(record: cp.CommitRecord):
        for node in record.nodes:
            if node.kind == cp.KIND_GENERATED and node.source == cp.SOURCE_MODEL:
                return node
        return None

    def _session(self, session_id: str) -> _Session:
        try:
            return self._sessions[session_id]
        except KeyError:
            raise SessionNotFound(session_id) from None

    def _active_task(self, sess: _Session):
        if sess.cursor >= len(sess.task_order):
            raise ConflictError({"error": "session has no active task"})
        record = self._by_commit[sess.task_order[sess.cursor]]
        return record, self._draft_node(record)

    def _shuffle(self, session_id: str) -> list[str]:
        import hashlib
        import random

        digest = hashlib.sha256(f"{self._seed}:{session_id}".encode()).digest()
        rng = random.Random(int.from_bytes(digest, "big"))
        order = list(self._task_commits)
        rng.shuffle(order)
        return order

    # --- operations ---------------------------------------------------------

    def create_session(self, annotator_id: str) -> dict:
        if not annotator_id:
            raise ConflictError({"error": "annotator_id must be non-empty"})
        with self._lock:
            session_id = f"s{len(self._sessions) + 1:04d}"
            sess = _Session(
                session_id=session_id,
                annotator_id=annotator_id,
                task_order=self._shuffle(session_id),
                started_at=time.time(),
                actions=[],
            )
            self._sessions[session_id] = sess
            self._append(
                "sessions.jsonl",
                {
                    "session_id": session_id,
                    "annotator_id": annotator_id,
                    "task_order": sess.task_order,
                    "started_at": sess.started_at,
                },
            )
            return {
                "session_id": session_id,
                "annotator_id": annotator_id,
                "task_count": len(sess.task_order),
            }

    def current_task(self, session_id: str) -> dict:
        with self._lock:
            sess = self._session(session_id)
            if sess.cursor >= len(sess.task_order):
                return {
                    "done": True,
                    "completed": sess.cursor,
                    "total": len(sess.task_order),
                }
            record, draft = self._active_task(sess)
            return {
                "done": False,
                "commit_id": record.commit_id,
                "message_id": draft.node_id,
                "diff": record.diff,
                "summary": record.summary,
                "generated_text": draft.text,
                "help_text": HELP_TEXT,
                "position": sess.cursor,
                "total": len(sess.task_order),
            }

    def record_events(self, session_id: str, message_id: str, events) -> dict:
        with self._lock:
            sess = self._session(session_id)
            record, draft = self._active_task(sess)
            if message_id != draft.node_id:
                raise ConflictError(
                    {"error": "not the active message", "active": draft.node_id}
                )
            key = (session_id, message_id)
            stored = self._events.setdefault(key, [])
            scratch = apply_events(draft.text, stored)
            parsed = [_event_from_dict(e) for e in events]

            fresh: list[EditEvent] = []
            next_index = len(stored)
            for ev in parsed:
                if ev.event_index < next_index:
                    if stored[ev.event_index] != ev:
                        raise ConflictError(
                            {
                                "error": "resent event differs from accepted log",
                                "first_bad_index": ev.event_index,
                            }
                        )
                    continue
                if ev.event_index != next_index + len(fresh):
                    raise ConflictError(
                        {
                            "error": "event index gap",
                            "first_bad_index": ev.event_index,
                            "expected": next_index + len(fresh),
                        }
                    )
                try:
                    scratch = apply_events(scratch, [ev])
                except ValueError as exc:
                    raise ConflictError(
                        {"error": str(exc), "first_bad_index": ev.event_index}
                    ) from exc
                fresh.append(ev)

            for ev in fresh:
                line = {
                    "session_id": session_id,
                    "message_id": message_id,
                    "event": asdict(ev),
                }
                self._append("events.jsonl", line)
                self._event_lines.append(line)
            stored.extend(fresh)
            return {"accepted_through": len(stored) - 1}

    def submit(self, session_id: str, message_id: str, final_text: str) -> dict:
        with self._lock:
            sess = self._session(session_id)
            record, draft = self._active_task(sess)
            if message_id != draft.node_id:
                raise ConflictError(
                    {"error": "not the active message", "active": draft.node_id}
                )
            stored = self._events.get((session_id, message_id), [])
            replayed = apply_events(draft.text, stored)
            if replayed != final_text:
                raise ConflictError(
                    {
                        "error": "final text does not match event replay",
                        "divergence": first_divergence(replayed, final_text),
                    }
                )

            flags = []
            if final_text == draft.text:
                flags.append("zero-edit")
            if record.summary:
                for ev in stored:
                    if (
                        len(ev.inserted_text) >= PASTE_FLAG_MIN_CHARS
                        and ev.inserted_text in record.summary
                    ):
                        flags.append("paste-from-summary")
                        break

            node_id = f"{message_id}.{session_id}"
            action = {
                "type": "submit",
                "session_id": session_id,
                "annotator_id": sess.annotator_id,
                "commit_id": record.commit_id,
                "message_id": message_id,
                "node_id": node_id,
                "final_text": final_text,
                "flags": flags,
                "event_count": len(stored),
            }
            self._append("actions.jsonl", action)
            sess.actions.append(action)
            return {
                "node_id": node_id,
                "commit_id": record.commit_id,
                "flags": flags,
                "cursor": sess.cursor,
            }

    def skip(self, session_id: str) -> dict:
        with self._lock:
            sess = self._session(session_id)
            record, _ = self._active_task(sess)
            action = {
                "type": "skip",
                "session_id": session_id,
                "annotator_id": sess.annotator_id,
                "commit_id": record.commit_id,
            }
            self._append("actions.jsonl", action)
            sess.actions.append(action)
            return {"skipped": record.commit_id, "cursor": sess.cursor}

    def export(self) -> dict:
        with self._lock:
            additions: dict[str, tuple[list, list]] = {}
            for sess in self._sessions.values():
                for action in sess.actions:
                    if action["type"] != "submit":
                        continue
                    nodes, edges = additions.setdefault(
                        action["commit_id"], ([], [])
                    )
                    nodes.append(
                        cp.MessageNode(
                            action["node_id"],
                            cp.KIND_EDITED,
                            cp.SOURCE_EXPERT,
                            action["final_text"],
                        )
                    )
                    edges.append(
                        cp.DerivationEdge(
                            action["message_id"],
                            action["node_id"],
                            cp.METHOD_HUMAN_EDIT,
                        )
                    )

            lines = []
            for record in self._corpus:
                extra = additions.get(record.commit_id)
                if extra:
                    from dataclasses import replace

                    record = replace(
                        record,
                        nodes=list(record.nodes) + extra[0],
                        edges=list(record.edges) + extra[1],
                    )
                    cp.validate_record(record)
                lines.append(cp.dumps_record(record))
            corpus_jsonl = "".join(line + "\n" for line in lines)
            events_jsonl = "".join(
                json.dumps(obj, sort_keys=True, ensure_ascii=False) + "\n"
                for obj in self._event_lines
            )
            return {"corpus_jsonl": corpus_jsonl, "events_jsonl": events_jsonl}


def build_app(service: AnnotationService):
    """Wrap the service in a FastAPI app; imported lazily by the CLI."""
    from fastapi import FastAPI, HTTPException
    from fastapi.middleware.cors import CORSMiddleware
    from pydantic import BaseModel

    class CreateSessionBody(BaseModel):
        annotator_id: str

    class EventBody(BaseModel):
        event_index: int
        timestamp: int
        position: int
        deleted_len: int
        inserted_text: str

    class EventsBody(BaseModel):
        message_id: str
        events: list[EventBody]

    class SubmitBody(BaseModel):
        message_id: str
        final_text: str

    app = FastAPI(title="annotation service")
    # the browser frontend is served as a static page from another origin
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def run(fn, *args):
        try:
            return fn(*args)
        except SessionNotFound as exc:
            raise HTTPException(404, detail="unknown session") from exc
        except ConflictError as exc:
            raise HTTPException(409, detail=exc.payload) from exc

    @app.post("/sessions")
    def create_session(body: CreateSessionBody):
        return run(service.create_session, body.annotator_id)

    @app.get("/sessions/{session_id}/task")
    def get_task(session_id: str):
        return run(service.current_task, session_id)

    @app.post("/sessions/{session_id}/events")
    def post_events(session_id: str, body: EventsBody):
        events = [e.model_dump() for e in body.events]
        return run(service.record_events, session_id, body.message_id, events)

    @app.post("/sessions/{session_id}/submit")
    def post_submit(session_id: str, body: SubmitBody):
        return run(service.submit, session_id, body.message_id, body.final_text)

    @app.post("/sessions/{session_id}/skip")
    def post_skip(session_id: str):
        return run(service.skip, session_id)

    @app.get("/export")
    def export():
        return service.export()

    return app
