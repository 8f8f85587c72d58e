"""File-backed versioned document store with optimistic concurrency.

One directory per collection, one envelope file per key. Writes go to a temp
file in the same directory and are committed with an atomic rename, so a
crash at any point leaves the previous committed document intact. The
contract is compare-and-swap at the API surface; a networked document
database can substitute behind the same interface.
"""

from __future__ import annotations

import json
import os
import re
import threading
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable

from .errors import IoError, MigrationRequired, NotFound, ValidationError, VersionConflict

SUPPORTED_SCHEMA_VERSION = 1

COLLECTIONS = ("models", "sessions", "goals", "audits", "gateway-audits", "idempotency")

# Audit collections never shrink: a put whose body does not extend the
# current body is rejected.
APPEND_ONLY_COLLECTIONS = ("audits", "gateway-audits")

_SAFE_ID_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._@:-]*$")


@dataclass(frozen=True)
class StoredRecord:
    key: tuple[str, str]
    body: str
    version: int
    updated_at: str


def _utcnow_iso() -> str:
    return datetime.now(timezone.utc).isoformat().replace("+00:00", "Z")


class FileStore:
    def __init__(self, root: str | Path, *, clock: Callable[[], str] | None = None):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._clock = clock or _utcnow_iso
        self._locks: dict[tuple[str, str], threading.Lock] = {}
        self._locks_guard = threading.Lock()
        # Test hook: called between temp-file write and the atomic swap.
        self.crash_hook: Callable[[], None] | None = None

    def _lock_for(self, key: tuple[str, str]) -> threading.Lock:
        with self._locks_guard:
            lock = self._locks.get(key)
            if lock is None:
                lock = self._locks[key] = threading.Lock()
            return lock

    def _path(self, collection: str, record_id: str) -> Path:
        if not _SAFE_ID_RE.match(collection) or not _SAFE_ID_RE.match(record_id):
            raise IoError(f"unsafe key ({collection!r}, {record_id!r})")
        return self.root / collection / f"{record_id}.json"

    def _read_envelope(self, path: Path) -> dict[str, Any] | None:
        try:
            raw = path.read_text("utf-8")
        except FileNotFoundError:
            return None
        except OSError as exc:
            raise IoError(f"cannot read {path}: {exc}") from exc
        try:
            return json.loads(raw)
        except json.JSONDecodeError as exc:
            raise IoError(f"corrupt envelope at {path}: {exc}") from exc

    def put(self, key: tuple[str, str], body: str, expected_version: int | None = None) -> int:
        collection, record_id = key
        path = self._path(collection, record_id)
        with self._lock_for(key):
            envelope = self._read_envelope(path)
            current = envelope["version"] if envelope else 0
            if expected_version is not None and expected_version != current:
                raise VersionConflict(
                    f"expected version {expected_version}, current is {current}", current=current
                )
            if collection in APPEND_ONLY_COLLECTIONS and envelope:
                if not body.startswith(envelope["body"]):
                    raise ValidationError(
                        [("body", f"collection {collection!r} is append-only; body must extend the current record")]
                    )
            new_version = current + 1
            new_envelope = {
                "version": new_version,
                "updated_at": self._clock(),
                "body": body,
            }
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.parent / f".{record_id}.{uuid.uuid4().hex}.tmp"
            try:
                with open(tmp, "w", encoding="utf-8") as handle:
                    json.dump(new_envelope, handle, ensure_ascii=False)
                    handle.flush()
                    os.fsync(handle.fileno())
                if self.crash_hook is not None:
                    self.crash_hook()
                os.replace(tmp, path)
            except OSError as exc:
                raise IoError(f"cannot write {path}: {exc}") from exc
            finally:
                if tmp.exists():
                    try:
                        tmp.unlink()
                    except OSError:
                        pass
            return new_version

    def get(self, key: tuple[str, str]) -> StoredRecord:
        collection, record_id = key
        envelope = self._read_envelope(self._path(collection, record_id))
        if envelope is None:
            raise NotFound(f"no record for ({collection}, {record_id})")
        body = envelope["body"]
        try:
            parsed = json.loads(body)
        except (json.JSONDecodeError, ValueError):
            parsed = None
        if isinstance(parsed, dict):
            schema_version = parsed.get("schema_version", SUPPORTED_SCHEMA_VERSION)
            if isinstance(schema_version, int) and schema_version > SUPPORTED_SCHEMA_VERSION:
                raise MigrationRequired(
                    f"record ({collection}, {record_id}) has schema_version {schema_version}; "
                    f"this build supports up to {SUPPORTED_SCHEMA_VERSION}"
                )
        return StoredRecord(
            key=key, body=body, version=envelope["version"], updated_at=envelope["updated_at"]
        )

    def exists(self, key: tuple[str, str]) -> bool:
        try:
            self.get(key)
            return True
        except NotFound:
            return False

    def list(
        self,
        collection: str,
        *,
        novice_id: str | None = None,
        since: str | None = None,
        until: str | None = None,
    ) -> list[dict[str, Any]]:
        """Record summaries, newest first. Filters look at the body's
        novice_id field and the envelope's updated_at (ISO ordering)."""
        directory = self.root / collection
        if not directory.is_dir():
            return []
        summaries = []
        for path in directory.iterdir():
            if path.suffix != ".json" or path.name.startswith("."):
                continue
            envelope = self._read_envelope(path)
            if envelope is None:
                continue
            try:
                parsed = json.loads(envelope["body"])
            except (json.JSONDecodeError, ValueError):
                parsed = None
            body_novice = parsed.get("novice_id") if isinstance(parsed, dict) else None
            if novice_id is not None and body_novice != novice_id:
                continue
            updated_at = envelope["updated_at"]
            if since is not None and updated_at < since:
                continue
            if until is not None and updated_at > until:
                continue
            summaries.append(
                {
                    "id": path.stem,
                    "version": envelope["version"],
                    "updated_at": updated_at,
                    "novice_id": body_novice,
                }
            )
        summaries.sort(key=lambda s: (s["updated_at"], s["id"]), reverse=True)
        return summaries

    def append_lines(self, key: tuple[str, str], lines: list[str]) -> int:
        """Append newline-delimited records to an audit key."""
        try:
            current = self.get(key).body
        except NotFound:
            current = ""
        addition = "".join(line.rstrip("\n") + "\n" for line in lines)
        return self.put(key, current + addition)
