"""HTTP+JSON service exposing the coaching workflow under /v1.

Two static bearer roles (mentor, novice) preserve the role asymmetry the
workflow depends on: novices drive their own sessions; mentors read any
session, set goals, re-diagnose, author the risk model, and read audits.
All mutations go through the store, so every 2xx write is observable by a
subsequent GET.
"""

from __future__ import annotations

import hashlib
import json
import threading
from datetime import datetime, timezone
from typing import Any, Callable

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import registry
from .config import ServiceConfig, build_backend
from .dashboards import MentorGoals, build_mentor_dashboard, build_novice_dashboard
from .errors import (
    BackendError,
    BadSourceRef,
    CoachError,
    DuplicateId,
    DuplicateSelection,
    EmptyMessage,
    ExtractionEmpty,
    FixtureParseError,
    IoError,
    MigrationRequired,
    NotFound,
    PayloadMismatch,
    SchemaError,
    UnknownArea,
    UnknownRisk,
    ValidationError,
    VersionConflict,
    WrongPhase,
)
from .gateway import TextBackend
from .pipeline import StrategySuggestion
from .registry import ProjectModel, RiskDefinition, RiskModel, validate_model
from .runner import CoachEngine
from .session import Session
from .store import FileStore

PROJECT_HEAD = ("models", "project-model")
RISK_HEAD = ("models", "risk-model")


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, **extra: Any):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.extra = extra


_STATUS_BY_ERROR: list[tuple[type, int]] = [
    (ValidationError, 400),
    (EmptyMessage, 400),
    (UnknownArea, 400),
    (UnknownRisk, 400),
    (BadSourceRef, 400),
    (DuplicateSelection, 400),
    (PayloadMismatch, 400),
    (FixtureParseError, 400),
    (NotFound, 404),
    (WrongPhase, 409),
    (VersionConflict, 409),
    (DuplicateId, 409),
    (SchemaError, 502),
    (BackendError, 502),
    (MigrationRequired, 500),
    (IoError, 500),
    (ExtractionEmpty, 500),
]


def _status_for(exc: CoachError) -> int:
    for klass, status in _STATUS_BY_ERROR:
        if isinstance(exc, klass):
            return status
    return 500


def _error_body(code: str, message: str, **extra: Any) -> dict[str, Any]:
    body: dict[str, Any] = {"error": {"code": code, "message": message}}
    body["error"].update({k: v for k, v in extra.items() if v is not None})
    return body


def _utcnow_iso() -> str:
    return datetime.now(timezone.utc).isoformat().replace("+00:00", "Z")


class CoachService:
    """Store-backed operations shared by all routes."""

    def __init__(
        self,
        store: FileStore,
        gateway: TextBackend,
        clock: Callable[[], datetime] | None = None,
    ):
        self.store = store
        self.gateway = gateway
        self.clock = clock
        self._session_locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()
        self.ensure_seeded()

    def _session_lock(self, session_id: str) -> threading.Lock:
        with self._guard:
            lock = self._session_locks.get(session_id)
            if lock is None:
                lock = self._session_locks[session_id] = threading.Lock()
            return lock

    # -- models ---------------------------------------------------------------

    def ensure_seeded(self) -> None:
        if self.store.exists(PROJECT_HEAD) and self.store.exists(RISK_HEAD):
            return
        project_model, risk_model = registry.seed_default_models()
        for head, model in ((PROJECT_HEAD, project_model), (RISK_HEAD, risk_model)):
            if not self.store.exists(head):
                body = json.dumps(model.to_dict(), ensure_ascii=False)
                self.store.put(head, body)
                self.store.put((head[0], f"{head[1]}@{model.version}"), body)

    def current_project_model(self) -> tuple[ProjectModel, int]:
        record = self.store.get(PROJECT_HEAD)
        model = validate_model(json.loads(record.body), "project")
        return model, record.version  # type: ignore[return-value]

    def current_risk_model(self) -> tuple[RiskModel, int]:
        record = self.store.get(RISK_HEAD)
        model = validate_model(json.loads(record.body), "risk")
        return model, record.version  # type: ignore[return-value]

    def pinned_models(self, session: Session) -> tuple[ProjectModel, RiskModel]:
        def load(head: tuple[str, str], version: int, kind: str):
            try:
                record = self.store.get((head[0], f"{head[1]}@{version}"))
            except NotFound:
                record = self.store.get(head)  # pre-versioning stores
            return validate_model(json.loads(record.body), kind)

        project = load(PROJECT_HEAD, session.project_model_version, "project")
        risk = load(RISK_HEAD, session.risk_model_version, "risk")
        return project, risk  # type: ignore[return-value]

    def _audit_len(self, target: str) -> int:
        try:
            body = self.store.get(("audits", target)).body
        except NotFound:
            return 0
        return sum(1 for line in body.splitlines() if line.strip())

    def edit_risk_model(
        self,
        op: Callable[[RiskModel, int], tuple[RiskModel, registry.AuditEntry]],
        expected_model_version: int | None = None,
    ) -> RiskModel:
        """Apply one authoring edit with CAS on the model head; audit entry
        and a frozen per-version copy are committed alongside. When the client
        supplies the model version it last saw, a stale edit is refused."""
        record = self.store.get(RISK_HEAD)
        model = validate_model(json.loads(record.body), "risk")
        if expected_model_version is not None and expected_model_version != model.version:
            raise VersionConflict(
                f"risk model is at version {model.version}, client edited version {expected_model_version}",
                current=model.version,
            )
        new_model, entry = op(model, self._audit_len("risk-model"))  # type: ignore[arg-type]
        body = json.dumps(new_model.to_dict(), ensure_ascii=False)
        self.store.put(RISK_HEAD, body, expected_version=record.version)
        self.store.put(("models", f"risk-model@{new_model.version}"), body)
        self.store.append_lines(("audits", "risk-model"), [entry.to_line()])
        return new_model

    # -- sessions ---------------------------------------------------------------

    def engine_for(self, session: Session) -> tuple[CoachEngine, list[dict[str, Any]]]:
        project_model, risk_model = self.pinned_models(session)
        buffer: list[dict[str, Any]] = []
        engine = CoachEngine(
            self.gateway,
            project_model,
            risk_model,
            clock=self.clock,
            audit_sink=buffer.append,
        )
        return engine, buffer

    def flush_gateway_audit(self, session_id: str, buffer: list[dict[str, Any]]) -> None:
        if buffer:
            lines = [json.dumps(record, ensure_ascii=False) for record in buffer]
            self.store.append_lines(("gateway-audits", session_id), lines)

    def last_audit_hash(self, session_id: str) -> str | None:
        try:
            body = self.store.get(("gateway-audits", session_id)).body
        except NotFound:
            return None
        lines = [line for line in body.splitlines() if line.strip()]
        if not lines:
            return None
        return json.loads(lines[-1]).get("prompt_sha256")

    def save_session(self, session: Session) -> None:
        body = json.dumps(session.to_dict(), ensure_ascii=False)
        self.store.put(("sessions", session.id), body)

    def load_session(self, session_id: str) -> Session:
        record = self.store.get(("sessions", session_id))
        return Session.from_dict(json.loads(record.body))

    def load_goals(self, session_id: str) -> dict[str, Any] | None:
        try:
            return json.loads(self.store.get(("goals", session_id)).body)
        except NotFound:
            return None

    def save_goals(
        self,
        session_id: str,
        goals: MentorGoals | None,
        strategies: list[StrategySuggestion],
    ) -> None:
        body = json.dumps(
            {
                "schema_version": 1,
                "session_id": session_id,
                "goals": goals.to_dict() if goals else None,
                "strategies": [s.to_dict() for s in strategies],
            },
            ensure_ascii=False,
        )
        self.store.put(("goals", session_id), body)


def create_app(
    config: ServiceConfig | None = None,
    *,
    store: FileStore | None = None,
    gateway: TextBackend | None = None,
    tokens: dict[str, dict[str, str]] | None = None,
) -> FastAPI:
    if config is not None:
        store = store or FileStore(config.store_root)
        gateway = gateway or build_backend(config.backend)
        tokens = tokens if tokens is not None else config.tokens
    if store is None or gateway is None:
        raise ValueError("create_app needs a config or explicit store and gateway")
    token_map = tokens or {}
    service = CoachService(store, gateway)

    app = FastAPI(title="coachkit", version="0.1.0")
    app.state.service = service
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(ApiError)
    async def _api_error(request: Request, exc: ApiError) -> JSONResponse:
        return JSONResponse(
            status_code=exc.status, content=_error_body(exc.code, exc.message, **exc.extra)
        )

    @app.exception_handler(CoachError)
    async def _coach_error(request: Request, exc: CoachError) -> JSONResponse:
        extra: dict[str, Any] = {}
        if isinstance(exc, ValidationError):
            extra["fields"] = [{"path": path, "message": message} for path, message in exc.errors]
        if isinstance(exc, VersionConflict):
            extra["current_version"] = exc.current
        if isinstance(exc, BackendError):
            extra["task"] = exc.task or None
        return JSONResponse(
            status_code=_status_for(exc),
            content=_error_body(exc.code, str(exc), **extra),
        )

    # -- helpers --------------------------------------------------------------

    def principal_of(request: Request) -> dict[str, str]:
        header = request.headers.get("Authorization", "")
        if not header.startswith("Bearer "):
            raise ApiError(401, "unauthorized", "missing bearer token")
        token = header[len("Bearer ") :].strip()
        who = token_map.get(token)
        if who is None:
            raise ApiError(401, "unauthorized", "unknown token")
        return who

    def require_mentor(request: Request) -> dict[str, str]:
        who = principal_of(request)
        if who["role"] != "mentor":
            raise ApiError(403, "role_violation", "mentor role required")
        return who

    def require_session_access(who: dict[str, str], session: Session) -> None:
        if who["role"] == "mentor":
            return
        if session.novice_id != who["user_id"]:
            raise ApiError(403, "role_violation", "novices access only their own sessions")

    async def parse_body(request: Request) -> dict[str, Any]:
        try:
            raw = await request.body()
            body = json.loads(raw) if raw else {}
        except json.JSONDecodeError:
            raise ApiError(400, "validation", "request body is not valid JSON")
        if not isinstance(body, dict):
            raise ApiError(400, "validation", "request body must be a JSON object")
        return body

    def versions_of(session: Session) -> dict[str, int]:
        return {
            "project_model_version": session.project_model_version,
            "risk_model_version": session.risk_model_version,
        }

    def run_chain(session_id: str, buffer: list[dict[str, Any]], fn: Callable[..., Any]) -> Any:
        """Run a chain step; on backend failure flush the audit buffer first,
        then decorate the 502 with the audit hash so mentors can verify what
        the model was shown."""
        try:
            return fn()
        except (BackendError, SchemaError) as exc:
            service.flush_gateway_audit(session_id, buffer)
            buffer.clear()
            task = getattr(exc, "task", "") or None
            raise ApiError(
                502,
                exc.code,
                str(exc),
                task=task,
                prompt_sha256=service.last_audit_hash(session_id),
            ) from exc

    # -- session routes ---------------------------------------------------------

    @app.post("/v1/sessions")
    async def create_session_route(request: Request) -> JSONResponse:
        who = principal_of(request)
        if who["role"] != "novice":
            raise ApiError(403, "role_violation", "only novices start sessions")
        project_model, _ = service.current_project_model()
        risk_model, _ = service.current_risk_model()
        engine = CoachEngine(service.gateway, project_model, risk_model, clock=service.clock)
        session = engine.start(who["user_id"])
        service.save_session(session)
        return JSONResponse(
            status_code=201,
            content={
                "id": session.id,
                "phase": session.phase.value,
                "messages": [m.to_dict() for m in session.transcript],
                "processing": "idle",
                **versions_of(session),
            },
        )

    @app.get("/v1/sessions/{session_id}")
    async def get_session_route(session_id: str, request: Request) -> dict[str, Any]:
        who = principal_of(request)
        session = service.load_session(session_id)
        require_session_access(who, session)
        return {"session": session.to_dict(), "processing": "idle", **versions_of(session)}

    @app.post("/v1/sessions/{session_id}/messages")
    async def post_message_route(session_id: str, request: Request) -> dict[str, Any]:
        who = principal_of(request)
        body = await parse_body(request)
        text = body.get("text")
        if not isinstance(text, str):
            raise ApiError(400, "validation", "field 'text' must be a string")
        idem_key = request.headers.get("Idempotency-Key")
        idem_id = None
        if idem_key:
            digest = hashlib.sha256(f"{session_id}:{idem_key}".encode("utf-8")).hexdigest()
            idem_id = f"msg-{digest[:40]}"
            try:
                cached = service.store.get(("idempotency", idem_id))
                return json.loads(cached.body)
            except NotFound:
                pass
        with service._session_lock(session_id):
            session = service.load_session(session_id)
            require_session_access(who, session)
            if who["role"] != "novice":
                raise ApiError(403, "role_violation", "only the novice chats in a session")
            engine, buffer = service.engine_for(session)
            try:
                new_messages = run_chain(
                    session_id,
                    buffer,
                    lambda: (
                        engine.record_novice_answer(session, text),
                        engine.advance(session),
                    )[1],
                )
            finally:
                service.flush_gateway_audit(session_id, buffer)
            service.save_session(session)
        response = {
            "messages": [m.to_dict() for m in new_messages],
            "phase": session.phase.value,
            "processing": "idle",
            **versions_of(session),
        }
        if idem_id:
            service.store.put(("idempotency", idem_id), json.dumps(response, ensure_ascii=False))
        return response

    @app.post("/v1/sessions/{session_id}/agenda")
    async def post_agenda_route(session_id: str, request: Request) -> dict[str, Any]:
        who = principal_of(request)
        body = await parse_body(request)
        selected = body.get("selected")
        if not isinstance(selected, list) or any(not isinstance(x, str) for x in selected):
            raise ApiError(400, "validation", "field 'selected' must be a list of risk ids")
        notes = body.get("notes", "")
        if not isinstance(notes, str):
            raise ApiError(400, "validation", "field 'notes' must be a string")
        with service._session_lock(session_id):
            session = service.load_session(session_id)
            require_session_access(who, session)
            if who["role"] != "novice":
                raise ApiError(403, "role_violation", "only the novice sets the agenda")
            engine, buffer = service.engine_for(session)
            try:
                agenda_doc = run_chain(session_id, buffer, lambda: engine.finish(session, selected, notes))
            finally:
                service.flush_gateway_audit(session_id, buffer)
            service.save_session(session)
            service.store.put(
                ("sessions", f"{session_id}@agenda"),
                json.dumps(agenda_doc.to_dict(), ensure_ascii=False),
            )
        return {
            "agenda": agenda_doc.to_dict(),
            "phase": session.phase.value,
            **versions_of(session),
        }

    @app.get("/v1/sessions/{session_id}/dashboard")
    async def dashboard_route(session_id: str, request: Request) -> dict[str, Any]:
        who = principal_of(request)
        role = request.query_params.get("role", "novice")
        if role not in ("novice", "mentor"):
            raise ApiError(400, "validation", "role must be novice or mentor")
        if role == "mentor" and who["role"] != "mentor":
            raise ApiError(403, "role_violation", "mentor dashboard requires mentor role")
        session = service.load_session(session_id)
        require_session_access(who, session)
        _, risk_model = service.pinned_models(session)
        if role == "novice":
            dashboard = build_novice_dashboard(session, risk_model)
            return {"dashboard": dashboard.to_dict(), **versions_of(session)}
        stored = service.load_goals(session_id)
        if stored is None:
            engine, buffer = service.engine_for(session)
            try:
                strategies = run_chain(session_id, buffer, lambda: engine.strategies(session, None))
            finally:
                service.flush_gateway_audit(session_id, buffer)
            service.save_goals(session_id, None, strategies)
            goals = None
        else:
            goals = (
                MentorGoals(
                    session_id=session_id,
                    focus_risk_ids=tuple(stored["goals"]["focus_risk_ids"]),
                    desired_outcomes=stored["goals"]["desired_outcomes"],
                    set_at=stored["goals"]["set_at"],
                )
                if stored.get("goals")
                else None
            )
            strategies = [
                StrategySuggestion(
                    risk_id=s["risk_id"],
                    coaching_questions=tuple(s["coaching_questions"]),
                    hypothesized_root_causes=tuple(s["hypothesized_root_causes"]),
                    rationale=s["rationale"],
                )
                for s in stored.get("strategies", [])
            ]
        dashboard = build_mentor_dashboard(session, risk_model, goals, strategies)
        return {"dashboard": dashboard.to_dict(), **versions_of(session)}

    @app.put("/v1/sessions/{session_id}/goals")
    async def put_goals_route(session_id: str, request: Request) -> dict[str, Any]:
        require_mentor(request)
        body = await parse_body(request)
        focus = body.get("focus_risk_ids", [])
        if not isinstance(focus, list) or any(not isinstance(x, str) for x in focus):
            raise ApiError(400, "validation", "field 'focus_risk_ids' must be a list of risk ids")
        outcomes = body.get("desired_outcomes", "")
        if not isinstance(outcomes, str):
            raise ApiError(400, "validation", "field 'desired_outcomes' must be a string")
        with service._session_lock(session_id):
            session = service.load_session(session_id)
            diagnosed = set(session.diagnosed_ids())
            unknown = [r for r in focus if r not in diagnosed]
            if unknown:
                raise UnknownRisk(f"focus risks not diagnosed in this session: {unknown}")
            goals = MentorGoals(
                session_id=session_id,
                focus_risk_ids=tuple(focus),
                desired_outcomes=outcomes,
                set_at=_utcnow_iso(),
            )
            engine, buffer = service.engine_for(session)
            try:
                strategies = run_chain(session_id, buffer, lambda: engine.strategies(session, goals))
            finally:
                service.flush_gateway_audit(session_id, buffer)
            service.save_goals(session_id, goals, strategies)
        return {
            "goals": goals.to_dict(),
            "strategies": [s.to_dict() for s in strategies],
            **versions_of(session),
        }

    @app.post("/v1/sessions/{session_id}/rediagnose")
    async def rediagnose_route(session_id: str, request: Request) -> dict[str, Any]:
        require_mentor(request)
        with service._session_lock(session_id):
            session = service.load_session(session_id)
            current_risk_model, _ = service.current_risk_model()
            engine, buffer = service.engine_for(session)
            try:
                run_chain(session_id, buffer, lambda: engine.rediagnose(session, current_risk_model))
            finally:
                service.flush_gateway_audit(session_id, buffer)
            service.save_session(session)
        return {
            "diagnoses": [d.to_dict() for d in session.diagnoses],
            "phase": session.phase.value,
            **versions_of(session),
        }

    # -- authoring routes ---------------------------------------------------------

    @app.get("/v1/risk-model")
    async def get_risk_model_route(request: Request) -> dict[str, Any]:
        require_mentor(request)
        model, store_version = service.current_risk_model()
        return {"model": model.to_dict(), "store_version": store_version}

    @app.post("/v1/risk-model/risks")
    async def add_risk_route(request: Request) -> JSONResponse:
        who = require_mentor(request)
        body = await parse_body(request)
        name = body.get("name")
        description = body.get("description")
        if not isinstance(name, str) or not name.strip():
            raise ApiError(400, "validation", "field 'name' must be a nonempty string")
        if not isinstance(description, str) or not description.strip():
            raise ApiError(400, "validation", "field 'description' must be a nonempty string")
        examples = body.get("examples", [])
        if not isinstance(examples, list) or any(not isinstance(x, str) for x in examples):
            raise ApiError(400, "validation", "field 'examples' must be a list of strings")
        risk_id = body.get("id") or registry.slugify(name)
        definition = RiskDefinition(
            id=risk_id,
            name=name,
            description=description,
            examples=tuple(examples),
            enabled=True,
            created_by=who["user_id"],
            revision=0,
        )
        model = service.edit_risk_model(
            lambda m, seq: registry.add_risk(m, definition, who["user_id"], seq=seq)
        )
        return JSONResponse(
            status_code=201,
            content={"risk": model.risk(risk_id).to_dict(), "model_version": model.version},
        )

    @app.patch("/v1/risk-model/risks/{risk_id}")
    async def patch_risk_route(risk_id: str, request: Request) -> dict[str, Any]:
        who = require_mentor(request)
        body = await parse_body(request)
        patch = {k: v for k, v in body.items() if k in ("name", "description", "examples", "enabled")}
        if not patch:
            raise ApiError(400, "validation", "no revisable fields in patch")
        expected = body.get("expected_model_version")
        if expected is not None and not isinstance(expected, int):
            raise ApiError(400, "validation", "expected_model_version must be an integer")
        try:
            model = service.edit_risk_model(
                lambda m, seq: registry.revise_risk(m, risk_id, patch, who["user_id"], seq=seq),
                expected_model_version=expected,
            )
        except UnknownRisk as exc:
            raise NotFound(str(exc)) from exc
        return {"risk": model.risk(risk_id).to_dict(), "model_version": model.version}

    @app.post("/v1/risk-model/risks/{risk_id}/enabled")
    async def set_enabled_route(risk_id: str, request: Request) -> dict[str, Any]:
        who = require_mentor(request)
        body = await parse_body(request)
        value = body.get("value")
        if not isinstance(value, bool):
            raise ApiError(400, "validation", "field 'value' must be a boolean")
        expected = body.get("expected_model_version")
        if expected is not None and not isinstance(expected, int):
            raise ApiError(400, "validation", "expected_model_version must be an integer")
        try:
            model = service.edit_risk_model(
                lambda m, seq: registry.set_enabled(m, risk_id, value, who["user_id"], seq=seq),
                expected_model_version=expected,
            )
        except UnknownRisk as exc:
            raise NotFound(str(exc)) from exc
        return {"risk": model.risk(risk_id).to_dict(), "model_version": model.version}

    @app.get("/v1/audit")
    async def audit_route(request: Request) -> dict[str, Any]:
        require_mentor(request)
        collection = request.query_params.get("collection", "models")
        if collection == "models":
            target = request.query_params.get("id", "risk-model")
            key = ("audits", target)
        elif collection == "gateway":
            target = request.query_params.get("id")
            if not target:
                raise ApiError(400, "validation", "gateway audit needs an id (session id)")
            key = ("gateway-audits", target)
        else:
            raise ApiError(400, "validation", "collection must be models or gateway")
        try:
            body = service.store.get(key).body
        except NotFound:
            return {"entries": []}
        entries = [json.loads(line) for line in body.splitlines() if line.strip()]
        return {"entries": entries}

    return app


def serve(config: ServiceConfig) -> None:  # pragma: no cover - thin uvicorn wrapper
    import uvicorn

    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
