"""Session lifecycle around search workers: state machine, events, streams.

One session owns at most one live search worker.  The worker pushes
incumbents through a callback that appends to the persistent event log and
fans out to live subscribers; it never takes the session lock, so control
calls (which hold the lock while waiting for worker acknowledgements)
cannot deadlock against the pump.

States follow created -> running <-> paused -> stopped.  Directive patches
require the paused state and apply atomically: the patch is validated
against the instance in full before anything is persisted or handed to the
worker.  Request edits amend the instance itself, so they orphan the
current worker and the next resume grounds a fresh one on the amended
instance; plain cell directives reach the paused worker in place.

Every worker generation gets a tag.  Stale generations (after a rebuild or
an explicit stop) are ignored by both the event pump and the outcome
monitor, which keeps one writer per session log at all times.
"""

from __future__ import annotations

import json
import queue
import threading
import uuid
from typing import Any, Iterator

from ..constraints import ConfigError, evaluate, violation_report
from ..model import (
    Instance,
    InstanceError,
    parse_instance,
    roster_to_document,
    serialize_instance,
)
from ..search import (
    CellDirectives,
    ControlError,
    DirectiveError,
    SearchConfig,
    SearchWorker,
    directives_to_document,
    incumbent_record,
    parse_directives,
)
from .store import SessionStore

COMMANDS = ("start", "pause", "resume", "stop", "soften")


class ServiceError(Exception):
    """Base for errors that map onto one HTTP error body."""

    status = 500
    code = "internal"

    def __init__(self, message: str, details: dict[str, Any] | None = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}


class NotFound(ServiceError):
    status = 404
    code = "not_found"


class Conflict(ServiceError):
    status = 409
    code = "conflict"


class Invalid(ServiceError):
    status = 422
    code = "validation_error"


class _Subscriber:
    """Bounded live feed; overflow marks the reader as lagged."""

    def __init__(self, maxsize: int):
        self.queue: queue.Queue = queue.Queue(maxsize=maxsize)
        self.lagged = False

    def drain(self) -> None:
        while True:
            try:
                self.queue.get_nowait()
            except queue.Empty:
                return


class Broadcaster:
    def __init__(self, queue_size: int):
        self._queue_size = queue_size
        self._subs: dict[str, list[_Subscriber]] = {}
        self._lock = threading.Lock()

    def subscribe(self, session_id: str) -> _Subscriber:
        sub = _Subscriber(self._queue_size)
        with self._lock:
            self._subs.setdefault(session_id, []).append(sub)
        return sub

    def unsubscribe(self, session_id: str, sub: _Subscriber) -> None:
        with self._lock:
            subs = self._subs.get(session_id, [])
            if sub in subs:
                subs.remove(sub)

    def publish(self, session_id: str, kind: str, payload: dict[str, Any]) -> None:
        with self._lock:
            subs = list(self._subs.get(session_id, ()))
        for sub in subs:
            try:
                sub.queue.put_nowait((kind, payload))
            except queue.Full:
                # slow reader: it recovers via a gap marker plus snapshot
                sub.lagged = True


class _Session:
    def __init__(
        self,
        session_id: str,
        instance: Instance,
        config_doc: dict[str, Any],
        directives: CellDirectives,
        soften: bool,
        state: str,
        stop_reason: str | None,
        revision: int,
        next_sequence: int,
    ):
        self.id = session_id
        self.instance = instance
        self.config_doc = config_doc
        self.directives = directives
        self.soften = soften
        self.state = state
        self.stop_reason = stop_reason
        self.revision = revision
        self.next_sequence = next_sequence
        self.worker: SearchWorker | None = None
        self.gen = 0
        self.lock = threading.RLock()


class SessionManager:
    def __init__(
        self,
        store: SessionStore,
        *,
        stream_queue_size: int = 256,
        poll_interval: float = 0.25,
    ):
        self._store = store
        self._poll_interval = poll_interval
        self._broadcaster = Broadcaster(stream_queue_size)
        self._sessions: dict[str, _Session] = {}
        self._map_lock = threading.Lock()
        self._closing = False
        store.recover()
        for row in store.load_sessions():
            session = _Session(
                row["id"],
                parse_instance(row["instance_json"]),
                json.loads(row["config_json"]),
                parse_directives(row["directives_json"]),
                bool(row["soften"]),
                row["state"],
                row["stop_reason"],
                row["revision"],
                store.event_count(row["id"]) + 1,
            )
            self._sessions[row["id"]] = session

    # -- lookup ------------------------------------------------------------------

    def _get(self, session_id: str) -> _Session:
        with self._map_lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise NotFound(f"no session {session_id!r}")
        return session

    def ensure_session(self, session_id: str) -> None:
        self._get(session_id)

    def session_count(self) -> int:
        with self._map_lock:
            return len(self._sessions)

    # -- creation ----------------------------------------------------------------

    def create(
        self,
        instance_doc: dict[str, Any],
        config_kwargs: dict[str, Any],
        directives_doc: dict[str, Any] | None = None,
    ) -> str:
        try:
            instance = parse_instance(instance_doc)
        except InstanceError as exc:
            raise Invalid("instance rejected", {"report": str(exc)}) from exc
        try:
            config = SearchConfig(**config_kwargs)
        except ConfigError as exc:
            raise Invalid("config rejected", {"report": str(exc)}) from exc
        try:
            directives = (
                parse_directives(directives_doc)
                if directives_doc is not None
                else CellDirectives.empty()
            )
            directives.validate(instance)
        except DirectiveError as exc:
            raise Invalid("directives rejected", {"report": str(exc)}) from exc

        session_id = uuid.uuid4().hex
        self._store.create_session(
            session_id,
            serialize_instance(instance),
            json.dumps(config_kwargs, sort_keys=True),
            json.dumps(directives_to_document(directives), sort_keys=True),
            config.soften_hard,
        )
        session = _Session(
            session_id,
            instance,
            dict(config_kwargs),
            directives,
            config.soften_hard,
            "created",
            None,
            0,
            1,
        )
        with self._map_lock:
            self._sessions[session_id] = session
        return session_id

    # -- worker plumbing ---------------------------------------------------------

    def _build_worker(self, session: _Session) -> None:
        kwargs = dict(session.config_doc)
        kwargs["soften_hard"] = session.soften
        config = SearchConfig(**kwargs)
        gen = session.gen
        worker = SearchWorker(
            session.instance,
            config,
            directives=session.directives,
            on_event=lambda kind, payload: self._on_worker_event(session, gen, kind, payload),
        )
        session.worker = worker
        worker.start()
        threading.Thread(
            target=self._watch,
            args=(session, gen, worker),
            daemon=True,
            name=f"wardroster-monitor-{session.id[:8]}",
        ).start()

    def _on_worker_event(self, session: _Session, gen: int, kind: str, payload: dict) -> None:
        # Runs on the worker thread; must never touch session.lock.
        if kind != "incumbent" or session.gen != gen:
            return
        self._record_incumbent(session, payload["incumbent"])

    def _record_incumbent(self, session: _Session, inc) -> None:
        sequence = session.next_sequence
        session.next_sequence = sequence + 1
        record = incumbent_record(
            inc, roster_ref=f"/sessions/{session.id}/events?from_sequence={sequence}"
        )
        record["sequence"] = sequence
        report = violation_report(
            evaluate(inc.roster, session.instance, soften_hard=session.soften)
        )
        event = {
            "record": record,
            "roster": roster_to_document(inc.roster),
            "violations": report,
        }
        self._store.append_event(session.id, sequence, event)
        self._broadcaster.publish(session.id, "incumbent", event)

    def _watch(self, session: _Session, gen: int, worker: SearchWorker) -> None:
        try:
            outcome = worker.outcome(wait=True)
            reason = outcome.reason if outcome is not None else "stopped"
        except Exception as exc:
            reason = f"error: {exc}"
        with session.lock:
            if session.gen != gen or session.state == "stopped" or self._closing:
                return
            session.state = "stopped"
            session.stop_reason = reason
            self._store.update_session(session.id, state="stopped", stop_reason=reason)
        self._publish_state(session)

    def _publish_state(self, session: _Session) -> None:
        self._broadcaster.publish(
            session.id,
            "state",
            {
                "state": session.state,
                "reason": session.stop_reason,
                "revision": session.revision,
                "soften": session.soften,
            },
        )

    def _orphan_worker(self, session: _Session) -> SearchWorker | None:
        """Detach the current worker so its monitor and pump go quiet."""
        worker = session.worker
        session.worker = None
        session.gen += 1
        return worker

    # -- control -----------------------------------------------------------------

    def control(self, session_id: str, command: str, flag: bool | None = None) -> str:
        session = self._get(session_id)
        if command not in COMMANDS:
            raise Invalid(f"unknown command {command!r}; expected one of {COMMANDS}")
        if command == "soften":
            if flag is None:
                raise Invalid("soften requires a boolean flag")
        elif flag is not None:
            raise Invalid("flag applies to the soften command only")

        with session.lock:
            handler = getattr(self, f"_cmd_{command}")
            state = handler(session, flag)
            self._store.update_session(
                session.id,
                state=session.state,
                stop_reason=session.stop_reason,
                soften=session.soften,
            )
        self._publish_state(session)
        return state

    def _cmd_start(self, session: _Session, flag: bool | None) -> str:
        if session.state != "created":
            raise Conflict(f"cannot start a session in state {session.state!r}")
        session.state = "running"
        self._build_worker(session)
        return session.state

    def _cmd_pause(self, session: _Session, flag: bool | None) -> str:
        if session.state != "running":
            raise Conflict(f"cannot pause a session in state {session.state!r}")
        worker = session.worker
        if worker is None or worker.state() == "finished":
            self._mark_finished(session)
            raise Conflict(f"session already stopped ({session.stop_reason})")
        try:
            worker.pause()
        except ControlError as exc:
            self._mark_finished(session)
            raise Conflict(f"session already stopped ({session.stop_reason})") from exc
        session.state = "paused"
        return session.state

    def _cmd_resume(self, session: _Session, flag: bool | None) -> str:
        if session.state != "paused":
            raise Conflict(f"cannot resume a session in state {session.state!r}")
        if session.worker is None or session.worker.state() == "finished":
            self._orphan_worker(session)
            session.state = "running"
            self._build_worker(session)
            return session.state
        try:
            session.worker.resume()
        except ControlError as exc:
            self._mark_finished(session)
            raise Conflict(f"session already stopped ({session.stop_reason})") from exc
        session.state = "running"
        return session.state

    def _cmd_stop(self, session: _Session, flag: bool | None) -> str:
        if session.state == "stopped":
            raise Conflict("session already stopped")
        worker = self._orphan_worker(session)
        if worker is not None:
            worker.stop()
            worker.join(timeout=10.0)
        session.state = "stopped"
        session.stop_reason = "stopped"
        return session.state

    def _cmd_soften(self, session: _Session, flag: bool | None) -> str:
        flag = bool(flag)
        if session.state == "stopped":
            raise Conflict("session already stopped")
        if session.state == "created":
            # recorded now, grounded when the session starts
            session.soften = flag
            return session.state
        if session.worker is None or session.worker.state() == "finished":
            # recovered or finished worker: reground under the new mode
            session.soften = flag
            self._orphan_worker(session)
            session.state = "running"
            self._build_worker(session)
            return session.state
        try:
            session.worker.set_soften(flag)
            if session.state == "paused":
                session.worker.resume()
        except ControlError as exc:
            self._mark_finished(session)
            raise Conflict(f"session already stopped ({session.stop_reason})") from exc
        session.soften = flag
        session.state = "running"
        return session.state

    def _mark_finished(self, session: _Session) -> None:
        """The worker crossed the finish line while a control call raced it."""
        worker = session.worker
        reason = "stopped"
        if worker is not None:
            try:
                outcome = worker.outcome(wait=True, timeout=5.0)
                if outcome is not None:
                    reason = outcome.reason
            except Exception as exc:
                reason = f"error: {exc}"
        self._orphan_worker(session)
        session.state = "stopped"
        session.stop_reason = reason
        self._store.update_session(session.id, state="stopped", stop_reason=reason)

    # -- directives --------------------------------------------------------------

    def patch_directives(self, session_id: str, patch: dict[str, Any]) -> int:
        session = self._get(session_id)
        with session.lock:
            if session.state != "paused":
                raise Conflict(
                    f"directive updates require a paused session, not {session.state!r}"
                )
            instance, directives, requests_changed = self._apply_patch(session, patch)
            if requests_changed:
                # the instance itself changed: reground on the next resume
                old = self._orphan_worker(session)
                if old is not None:
                    old.stop()
                    old.join(timeout=10.0)
            elif session.worker is not None and session.worker.state() != "finished":
                try:
                    session.worker.update_directives(directives)
                except DirectiveError as exc:
                    raise Invalid("directives rejected", {"report": str(exc)}) from exc
                except ControlError as exc:
                    self._mark_finished(session)
                    raise Conflict(f"session already stopped ({session.stop_reason})") from exc
            session.instance = instance
            session.directives = directives
            session.revision += 1
            self._store.update_session(
                session.id,
                instance_json=serialize_instance(instance),
                directives_json=json.dumps(directives_to_document(directives), sort_keys=True),
                revision=session.revision,
            )
            return session.revision

    def _apply_patch(
        self, session: _Session, patch: dict[str, Any]
    ) -> tuple[Instance, CellDirectives, bool]:
        """Build the post-patch instance and directives without side effects."""
        fixed = dict(session.directives.fixed)
        prioritized = dict(session.directives.prioritized)
        cleared = set(session.directives.cleared)

        for op in patch.get("fix", ()):
            cell = (op["nurse"], op["day"])
            fixed[cell] = op["shift"]
            cleared.discard(cell)
        for op in patch.get("unfix", ()):
            cell = (op["nurse"], op["day"])
            if cell not in fixed:
                raise Invalid(
                    "directives rejected",
                    {"report": f"cell ({cell[0]}, {cell[1]}) is not fixed"},
                )
            del fixed[cell]
        for op in patch.get("clear", ()):
            cell = (op["nurse"], op["day"])
            cleared.add(cell)
            fixed.pop(cell, None)
            prioritized.pop(cell, None)

        instance = session.instance
        requests_changed = False
        request_ops = patch.get("set_request", ())
        if request_ops:
            pos = {cell: set(codes) for cell, codes in instance.pos_requests.items()}
            neg = {cell: set(codes) for cell, codes in instance.neg_requests.items()}
            for op in request_ops:
                table = pos if op["polarity"] == "pos" else neg
                table.setdefault((op["nurse"], op["day"]), set()).add(op["shift"])
            try:
                instance = instance.with_requests(
                    {cell: frozenset(codes) for cell, codes in pos.items()},
                    {cell: frozenset(codes) for cell, codes in neg.items()},
                )
            except InstanceError as exc:
                raise Invalid("request edit rejected", {"report": str(exc)}) from exc
            requests_changed = True

        try:
            directives = CellDirectives(
                fixed=fixed, prioritized=prioritized, cleared=frozenset(cleared)
            )
            directives.validate(instance)
        except DirectiveError as exc:
            raise Invalid("directives rejected", {"report": str(exc)}) from exc
        return instance, directives, requests_changed

    # -- observers ---------------------------------------------------------------

    def solution(self, session_id: str) -> dict[str, Any]:
        session = self._get(session_id)
        return {
            "id": session.id,
            "state": session.state,
            "stop_reason": session.stop_reason,
            "soften": session.soften,
            "revision": session.revision,
            "incumbent": self._store.latest_event(session.id),
        }

    def stream_events(
        self, session_id: str, from_sequence: int = 0
    ) -> Iterator[tuple[str, dict[str, Any]]]:
        """Replay stored incumbents, then follow the live feed until stopped.

        Yields (kind, payload) pairs: incumbent, state, gap, end, and
        keepalive ticks the transport may turn into comment frames.  A
        lagged reader receives a gap marker followed by the latest
        incumbent snapshot instead of the dropped middle.
        """
        session = self._get(session_id)
        sub = self._broadcaster.subscribe(session_id)
        try:
            last = from_sequence - 1
            for event in self._store.events_from(session_id, from_sequence):
                yield ("incumbent", event)
                last = event["record"]["sequence"]
            if session.state == "stopped":
                yield from self._finish_stream(session, last)
                return
            while True:
                if sub.lagged:
                    sub.lagged = False
                    sub.drain()
                    yield ("gap", {"reason": "consumer lagged; resuming from latest"})
                    snapshot = self._store.latest_event(session_id)
                    if snapshot and snapshot["record"]["sequence"] > last:
                        yield ("incumbent", snapshot)
                        last = snapshot["record"]["sequence"]
                    continue
                try:
                    kind, payload = sub.queue.get(timeout=self._poll_interval)
                except queue.Empty:
                    if session.state == "stopped":
                        yield from self._finish_stream(session, last)
                        return
                    yield ("keepalive", {})
                    continue
                if kind == "incumbent":
                    sequence = payload["record"]["sequence"]
                    if sequence > last:
                        yield ("incumbent", payload)
                        last = sequence
                else:
                    yield ("state", payload)
                    if payload.get("state") == "stopped":
                        yield from self._finish_stream(session, last)
                        return
        finally:
            self._broadcaster.unsubscribe(session_id, sub)

    def _finish_stream(
        self, session: _Session, last: int
    ) -> Iterator[tuple[str, dict[str, Any]]]:
        for event in self._store.events_from(session.id, last + 1):
            yield ("incumbent", event)
        yield ("end", {"state": session.state, "reason": session.stop_reason})

    # -- shutdown ----------------------------------------------------------------

    def shutdown(self) -> None:
        """Stop workers without rewriting session states (crash-equivalent)."""
        self._closing = True
        with self._map_lock:
            sessions = list(self._sessions.values())
        for session in sessions:
            with session.lock:
                worker = self._orphan_worker(session)
            if worker is not None:
                worker.stop()
                worker.join(timeout=10.0)
