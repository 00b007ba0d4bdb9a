"""Session persistence: append-only transcript logs with fsync before
acknowledgment, plus snapshot files for inspection.  Replaying the log is the
source of truth; restarting the process and re-reading the logs reproduces
every acknowledged state."""

from __future__ import annotations

import json
import os
import threading
from pathlib import Path

from ..problemfile import parse_problem
from ..session import ElicitationSession, SessionError, TRANSCRIPT_SCHEMA

SNAPSHOT_EVERY = 10


class UnknownSessionError(KeyError):
    pass


class SessionStore:
    def __init__(self, data_dir, evoi_workers: int = 0):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.evoi_workers = evoi_workers
        self._sessions: dict[str, ElicitationSession] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    # --- files ------------------------------------------------------------

    def _log_path(self, session_id: str) -> Path:
        return self.data_dir / f"{session_id}.log"

    def _snapshot_path(self, session_id: str) -> Path:
        return self.data_dir / f"{session_id}.json"

    def _append_log(self, session: ElicitationSession, record: dict | None) -> None:
        path = self._log_path(session.id)
        new = not path.exists()
        with open(path, "a") as fh:
            if new:
                header = {
                    "schema": TRANSCRIPT_SCHEMA,
                    "session_id": session.id,
                    "mode": session.mode,
                    "random_fallback": session.random_fallback,
                    "created": session.created,
                    "problem": session.export()["problem"],
                }
                fh.write(json.dumps(header) + "\n")
            if record is not None:
                fh.write(json.dumps(record) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def _write_snapshot(self, session: ElicitationSession) -> None:
        path = self._snapshot_path(session.id)
        tmp = path.with_suffix(".json.tmp")
        with open(tmp, "w") as fh:
            json.dump(session.snapshot(), fh, indent=1)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)

    def _load_from_disk(self, session_id: str) -> ElicitationSession:
        path = self._log_path(session_id)
        if not path.exists():
            raise UnknownSessionError(session_id)
        with open(path) as fh:
            lines = [json.loads(line) for line in fh if line.strip()]
        if not lines:
            raise SessionError(f"empty session log {path}")
        header, records = lines[0], lines[1:]
        document = dict(header)
        document["records"] = records
        session = ElicitationSession.restore(document, evoi_workers=self.evoi_workers)
        snap_path = self._snapshot_path(session_id)
        if snap_path.exists():
            with open(snap_path) as fh:
                snapshot = json.load(fh)
            # replay is the source of truth; a snapshot at the same length
            # must agree with it exactly
            if (
                len(snapshot.get("records", [])) == len(session.transcript)
                and snapshot.get("state_fingerprint")
                and snapshot["state_fingerprint"] != session.state_fingerprint()
            ):
                raise SessionError(
                    f"session {session_id}: snapshot disagrees with transcript replay"
                )
        return session

    # --- api ----------------------------------------------------------------

    def lock(self, session_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._locks.setdefault(session_id, threading.Lock())

    def create(self, problem: dict, mode: str, random_fallback: bool = False) -> ElicitationSession:
        doc = parse_problem(problem)
        session = ElicitationSession(
            doc, mode, random_fallback=random_fallback, evoi_workers=self.evoi_workers
        )
        with self.lock(session.id):
            self._append_log(session, None)
            self._write_snapshot(session)
            self._sessions[session.id] = session
        return session

    def restore_document(self, document: dict) -> ElicitationSession:
        doc = dict(document)
        sid = doc.get("session_id")
        if sid and (sid in self._sessions or self._log_path(sid).exists()):
            doc.pop("session_id", None)  # collision with a live session: mint a fresh id
        session = ElicitationSession.restore(doc, evoi_workers=self.evoi_workers)
        with self.lock(session.id):
            self._append_log(session, None)
            for record in session.transcript:
                self._append_log(session, record)
            self._write_snapshot(session)
            self._sessions[session.id] = session
        return session

    def get(self, session_id: str) -> ElicitationSession:
        if session_id not in self._sessions:
            session = self._load_from_disk(session_id)
            with self._registry_lock:
                self._sessions.setdefault(session_id, session)
        return self._sessions[session_id]

    def record_response(self, session: ElicitationSession, record: dict) -> None:
        """Persist one acknowledged response; called before the response is
        returned to the client."""
        self._append_log(session, record)
        if len(session.transcript) % SNAPSHOT_EVERY == 0:
            self._write_snapshot(session)

    def rewrite(self, session: ElicitationSession) -> None:
        """Rewrite the full log (after undo) and snapshot atomically."""
        path = self._log_path(session.id)
        tmp = path.with_suffix(".log.tmp")
        export = session.export()
        header = {
            "schema": TRANSCRIPT_SCHEMA,
            "session_id": session.id,
            "mode": session.mode,
            "random_fallback": session.random_fallback,
            "created": session.created,
            "problem": export["problem"],
        }
        with open(tmp, "w") as fh:
            fh.write(json.dumps(header) + "\n")
            for record in export["records"]:
                fh.write(json.dumps(record) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
        self._write_snapshot(session)

    def session_count(self) -> int:
        on_disk = {p.stem for p in self.data_dir.glob("*.log")}
        return len(on_disk | set(self._sessions))
