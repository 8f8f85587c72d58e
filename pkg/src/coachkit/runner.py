"""Chain orchestration: drives a session through the reasoning stages.

The engine owns the glue the dialogue needs: posing (personalized) area
questions, extracting context after each accepted answer, running diagnosis
once eliciting completes, posing reflection questions, and synthesizing the
agenda. Both the HTTP service and the offline CLI runner sit on top of it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Any, Callable, Sequence

from . import pipeline
from .dashboards import MentorGoals
from .errors import ExtractionEmpty, WrongPhase
from .gateway import CompletionRequest, CompletionResponse, TextBackend, audit_record
from .pipeline import AgendaDocument, StrategySuggestion
from .registry import ProjectModel, RiskModel
from .session import (
    EMOTIONS_AREA_ID,
    ActionKind,
    ChatMessage,
    Phase,
    Session,
    ask_area_question,
    ask_reflection_question,
    attach_context,
    attach_diagnoses,
    clarifying_question,
    create_session,
    mark_thin_context,
    next_action,
    record_novice_message,
    set_agenda,
)

logger = logging.getLogger(__name__)


class StepClock:
    """Deterministic clock: a fixed base instant advancing one second per
    reading. Used by replay tests and the offline runner."""

    def __init__(self, base: datetime | None = None):
        self.base = base or datetime(2026, 1, 1, tzinfo=timezone.utc)
        self.ticks = 0

    def __call__(self) -> datetime:
        value = self.base + timedelta(seconds=self.ticks)
        self.ticks += 1
        return value


class AuditingGateway(TextBackend):
    """Wraps a backend and reports one audit record per call to a sink."""

    def __init__(self, inner: TextBackend, sink: Callable[[dict[str, Any]], None]):
        self.inner = inner
        self.sink = sink

    @property
    def backend_id(self) -> str:  # type: ignore[override]
        return self.inner.backend_id

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        try:
            response = self.inner.complete(request)
        except Exception as exc:
            self.sink(audit_record(request, None, exc))
            raise
        self.sink(audit_record(request, response))
        return response


@dataclass
class CoachEngine:
    gateway: TextBackend
    project_model: ProjectModel
    risk_model: RiskModel
    clock: Callable[[], datetime] | None = None
    audit_sink: Callable[[dict[str, Any]], None] | None = None
    _area_order: dict[str, int] = field(init=False)

    def __post_init__(self) -> None:
        if self.audit_sink is not None:
            self.gateway = AuditingGateway(self.gateway, self.audit_sink)
        self._area_order = {a.id: i for i, a in enumerate(self.project_model.areas)}

    def _now(self) -> datetime | None:
        return self.clock() if self.clock else None

    # -- dialogue driving ----------------------------------------------------

    def start(self, novice_id: str, session_id: str | None = None) -> Session:
        return create_session(
            novice_id,
            self.project_model,
            self.risk_model,
            session_id=session_id,
            now=self._now(),
        )

    def advance(self, session: Session) -> list[ChatMessage]:
        """Perform system-side steps until the session waits on the novice,
        prioritization, or is done. Returns the newly appended messages."""
        before = len(session.transcript)
        while True:
            action = next_action(session, self.project_model)
            if action.kind == ActionKind.ASK_AREA_QUESTION:
                area = self.project_model.area(action.target)
                if session.awaiting_area_answer(area):
                    break
                if session.system_questions(area.id):
                    text = clarifying_question(area)
                elif not session.context:
                    text = area.example_question
                else:
                    text = pipeline.personalize_question(
                        self.gateway, area, session.context, area_order=self._area_order
                    )
                ask_area_question(session, area, text, now=self._now())
                break
            if action.kind == ActionKind.RUN_DIAGNOSIS:
                self.run_diagnosis(session)
                continue
            if action.kind == ActionKind.ASK_REFLECTION_QUESTION:
                if session.reflection_for(action.target) is not None:
                    break  # asked; waiting on the novice's answer
                self._pose_reflection(session, action.target)
                break
            break  # AWAIT_PRIORITIZATION or DONE
        return session.transcript[before:]

    def record_novice_answer(self, session: Session, text: str) -> None:
        """Record a novice turn and, in eliciting, extract context once the
        current area's answer is accepted."""
        area = session.current_area(self.project_model) if session.phase == Phase.ELICITING else None
        record_novice_message(session, text, self.project_model, now=self._now())
        if area is None or not session.is_area_accepted(area):
            return
        if area.id == EMOTIONS_AREA_ID:
            return  # surfaced verbatim to the mentor; never tagged or diagnosed
        segment = [m for m in session.transcript if m.area_id == area.id]
        try:
            entries = pipeline.extract_context(
                self.gateway,
                area,
                segment,
                prior_context=session.context,
                area_order=self._area_order,
            )
        except ExtractionEmpty:
            mark_thin_context(session, area.id)
            return
        attach_context(session, entries, self.project_model, now=self._now())

    def run_diagnosis(self, session: Session) -> None:
        diagnoses = pipeline.diagnose(
            self.gateway,
            session.context,
            self.risk_model,
            raw_statements=session.novice_messages(),
            area_order=self._area_order,
            now=self._now(),
        )
        attach_diagnoses(session, diagnoses, self.risk_model, now=self._now())

    def _pose_reflection(self, session: Session, risk_id: str) -> None:
        diagnosis = next(d for d in session.diagnoses if d.risk_id == risk_id)
        risk = self.risk_model.risk(risk_id)
        questions = pipeline.reflection_questions(
            self.gateway, diagnosis, session.context, risk, area_order=self._area_order
        )
        # One question in the dialogue; any extras surface on the dashboard.
        ask_reflection_question(
            session, risk_id, questions[0], followups=questions[1:], now=self._now()
        )

    def finish(self, session: Session, selected: Sequence[str], notes: str) -> AgendaDocument:
        set_agenda(session, selected, notes, now=self._now())
        return pipeline.synthesize_agenda(
            self.gateway, session, self.risk_model, area_order=self._area_order
        )

    # -- mentor-side operations ------------------------------------------------

    def strategies(
        self, session: Session, goals: MentorGoals | None
    ) -> list[StrategySuggestion]:
        reflections = {r.risk_id: r.answer for r in session.reflections if r.answer}
        return pipeline.suggest_strategies(
            self.gateway,
            session.diagnoses,
            session.context,
            goals,
            self.risk_model,
            reflections=reflections,
            area_order=self._area_order,
        )

    def rediagnose(self, session: Session, current_risk_model: RiskModel) -> None:
        """Re-run diagnosis against the current (possibly newer) risk model.
        Allowed before prioritization only; afterwards the agenda partition
        would no longer match the diagnosed set."""
        if session.phase not in (Phase.DIAGNOSING, Phase.REFLECTING):
            raise WrongPhase(f"cannot re-diagnose in phase {session.phase.value}")
        session.risk_model_version = current_risk_model.version
        diagnoses = pipeline.diagnose(
            self.gateway,
            session.context,
            current_risk_model,
            raw_statements=session.novice_messages(),
            area_order=self._area_order,
            now=self._now(),
        )
        if session.phase == Phase.DIAGNOSING:
            attach_diagnoses(session, diagnoses, current_risk_model, now=self._now())
            self.risk_model = current_risk_model
            return
        self.risk_model = current_risk_model
        kept = {d.risk_id for d in diagnoses}
        session.diagnoses = list(diagnoses)
        session.reflections = [r for r in session.reflections if r.risk_id in kept]
        if session.next_reflection_target() is None:
            session.phase = Phase.PRIORITIZING
