"""Embedded persistence for sessions and their incumbent event logs.

A single sqlite connection behind one lock keeps the store single-writer;
readers go through the same lock, which is cheap at the request rates a
ward-sized deployment sees.  Event sequences are assigned here, per
session, so they keep increasing across search worker generations and
process restarts.
"""

from __future__ import annotations

import json
import sqlite3
import threading
import time
from pathlib import Path
from typing import Any

_SCHEMA = """
CREATE TABLE IF NOT EXISTS sessions (
    id TEXT PRIMARY KEY,
    created_at REAL NOT NULL,
    state TEXT NOT NULL,
    stop_reason TEXT,
    instance_json TEXT NOT NULL,
    config_json TEXT NOT NULL,
    directives_json TEXT NOT NULL,
    soften INTEGER NOT NULL,
    revision INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS events (
    session_id TEXT NOT NULL,
    sequence INTEGER NOT NULL,
    payload_json TEXT NOT NULL,
    PRIMARY KEY (session_id, sequence)
);
"""


class SessionStore:
    def __init__(self, path: str | Path):
        self._conn = sqlite3.connect(str(path), check_same_thread=False)
        self._conn.row_factory = sqlite3.Row
        self._lock = threading.Lock()
        with self._lock:
            self._conn.executescript(_SCHEMA)
            self._conn.commit()

    def close(self) -> None:
        with self._lock:
            self._conn.close()

    # -- sessions ----------------------------------------------------------------

    def create_session(
        self,
        session_id: str,
        instance_json: str,
        config_json: str,
        directives_json: str,
        soften: bool,
    ) -> None:
        with self._lock:
            self._conn.execute(
                "INSERT INTO sessions VALUES (?, ?, 'created', NULL, ?, ?, ?, ?, 0)",
                (session_id, time.time(), instance_json, config_json, directives_json, int(soften)),
            )
            self._conn.commit()

    def update_session(self, session_id: str, **fields: Any) -> None:
        allowed = {"state", "stop_reason", "instance_json", "directives_json", "soften", "revision"}
        unknown = set(fields) - allowed
        if unknown:
            raise ValueError(f"unknown session fields: {sorted(unknown)}")
        if "soften" in fields:
            fields["soften"] = int(fields["soften"])
        cols = ", ".join(f"{name} = ?" for name in fields)
        with self._lock:
            self._conn.execute(
                f"UPDATE sessions SET {cols} WHERE id = ?", (*fields.values(), session_id)
            )
            self._conn.commit()

    def load_sessions(self) -> list[dict[str, Any]]:
        with self._lock:
            rows = self._conn.execute("SELECT * FROM sessions ORDER BY created_at").fetchall()
        return [dict(row) for row in rows]

    def recover(self) -> int:
        """Running sessions from a previous process wake up paused."""
        with self._lock:
            cur = self._conn.execute("UPDATE sessions SET state = 'paused' WHERE state = 'running'")
            self._conn.commit()
            return cur.rowcount

    # -- events ------------------------------------------------------------------

    def append_event(self, session_id: str, sequence: int, payload: dict[str, Any]) -> None:
        """Store one incumbent event under a caller-assigned sequence.

        Each session has exactly one event writer (its search worker pump),
        so the sequence counter lives there; the primary key turns a
        double-writer bug into a loud IntegrityError.
        """
        with self._lock:
            self._conn.execute(
                "INSERT INTO events VALUES (?, ?, ?)",
                (session_id, sequence, json.dumps(payload, sort_keys=True)),
            )
            self._conn.commit()

    def events_from(self, session_id: str, from_sequence: int = 0) -> list[dict[str, Any]]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT payload_json FROM events"
                " WHERE session_id = ? AND sequence >= ? ORDER BY sequence",
                (session_id, from_sequence),
            ).fetchall()
        return [json.loads(row[0]) for row in rows]

    def latest_event(self, session_id: str) -> dict[str, Any] | None:
        with self._lock:
            row = self._conn.execute(
                "SELECT payload_json FROM events WHERE session_id = ?"
                " ORDER BY sequence DESC LIMIT 1",
                (session_id,),
            ).fetchone()
        return json.loads(row[0]) if row else None

    def event_count(self, session_id: str) -> int:
        with self._lock:
            row = self._conn.execute(
                "SELECT COUNT(*) FROM events WHERE session_id = ?", (session_id,)
            ).fetchone()
        return row[0]
