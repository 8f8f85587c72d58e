"""One novice's pre-meeting engagement as a phase state machine.

Phases move strictly forward: eliciting -> diagnosing -> reflecting ->
prioritizing -> complete. The session itself is plain data; operations that
must check against the pinned knowledge models take the model value as an
argument (the caller resolves the pinned version from the store).

Timestamps are injected through the ``now`` parameter so replaying the same
operation sequence yields a byte-identical serialized session.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Iterable

from .errors import (
    BadSourceRef,
    DuplicateSelection,
    EmptyMessage,
    NoContext,
    UnknownArea,
    UnknownRisk,
    WrongPhase,
)
from .registry import ProjectArea, ProjectModel, RiskModel

SCHEMA_VERSION = 1

# Answers shorter than this to a required area trigger one clarifying re-ask,
# after which the area is accepted but flagged thin-context.
MIN_ANSWER_CHARS = 15

# Area whose answers are surfaced verbatim to the mentor and excluded from
# risk-diagnosis input.
EMOTIONS_AREA_ID = "emotions"

GREETING = (
    "Hi! Before your next coaching meeting, let's take stock of where your "
    "venture stands. I'll ask a few questions, then we'll look at possible "
    "risks together."
)


class Phase(str, Enum):
    ELICITING = "eliciting"
    DIAGNOSING = "diagnosing"
    REFLECTING = "reflecting"
    PRIORITIZING = "prioritizing"
    COMPLETE = "complete"


_PHASE_RANK = {p: i for i, p in enumerate(Phase)}


def phase_rank(phase: Phase) -> int:
    return _PHASE_RANK[phase]


class ActionKind(str, Enum):
    ASK_AREA_QUESTION = "ask_area_question"
    RUN_DIAGNOSIS = "run_diagnosis"
    ASK_REFLECTION_QUESTION = "ask_reflection_question"
    AWAIT_PRIORITIZATION = "await_prioritization"
    DONE = "done"


@dataclass(frozen=True)
class NextAction:
    kind: ActionKind
    target: str | None = None  # area id or risk id, depending on kind


@dataclass
class ChatMessage:
    seq: int
    speaker: str  # "system" | "novice"
    text: str
    area_id: str | None = None
    risk_id: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "seq": self.seq,
            "speaker": self.speaker,
            "text": self.text,
            "area_id": self.area_id,
            "risk_id": self.risk_id,
        }


@dataclass
class ContextEntry:
    area_id: str
    key: str
    value: str
    source_seq: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "area_id": self.area_id,
            "key": self.key,
            "value": self.value,
            "source_seq": self.source_seq,
        }


@dataclass
class Diagnosis:
    risk_id: str
    rationale: str
    evidence: tuple[int, ...]
    diagnosed_at: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "risk_id": self.risk_id,
            "rationale": self.rationale,
            "evidence": list(self.evidence),
            "diagnosed_at": self.diagnosed_at,
        }


@dataclass
class Reflection:
    risk_id: str
    question: str
    answer: str | None
    asked_at: str
    # Generated questions beyond the one asked in the dialogue; they surface
    # on the novice dashboard instead of lengthening the chat.
    followup_questions: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "risk_id": self.risk_id,
            "question": self.question,
            "answer": self.answer,
            "asked_at": self.asked_at,
            "followup_questions": list(self.followup_questions),
        }


@dataclass
class AgendaSelection:
    selected: tuple[str, ...]
    omitted: tuple[str, ...]
    notes: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "selected": list(self.selected),
            "omitted": list(self.omitted),
            "notes": self.notes,
        }


def _utcnow() -> datetime:
    return datetime.now(timezone.utc)


def _iso(ts: datetime | None) -> str:
    return (ts or _utcnow()).astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


@dataclass
class Session:
    id: str
    novice_id: str
    project_model_version: int
    risk_model_version: int
    phase: Phase
    transcript: list[ChatMessage] = field(default_factory=list)
    context: list[ContextEntry] = field(default_factory=list)
    diagnoses: list[Diagnosis] = field(default_factory=list)
    reflections: list[Reflection] = field(default_factory=list)
    agenda: AgendaSelection | None = None
    thin_context_areas: list[str] = field(default_factory=list)
    created_at: str = ""
    updated_at: str = ""

    # -- transcript helpers ------------------------------------------------

    def next_seq(self) -> int:
        return self.transcript[-1].seq + 1 if self.transcript else 0

    def novice_messages(self, area_id: str | None = None) -> list[ChatMessage]:
        return [
            m
            for m in self.transcript
            if m.speaker == "novice" and (area_id is None or m.area_id == area_id)
        ]

    def system_questions(self, area_id: str) -> list[ChatMessage]:
        return [m for m in self.transcript if m.speaker == "system" and m.area_id == area_id]

    def area_answers(self, area_id: str) -> list[str]:
        return [m.text for m in self.novice_messages(area_id)]

    def message_by_seq(self, seq: int) -> ChatMessage | None:
        for m in self.transcript:
            if m.seq == seq:
                return m
        return None

    # -- elicitation state -------------------------------------------------

    def is_area_accepted(self, area: ProjectArea) -> bool:
        answers = self.area_answers(area.id)
        if not answers:
            return False
        if any(len(a.strip()) >= MIN_ANSWER_CHARS for a in answers):
            return True
        if not area.required:
            return True
        return len(answers) >= 2  # re-asked once already; proceed thin

    def current_area(self, project_model: ProjectModel) -> ProjectArea | None:
        for area in project_model.areas:
            if not self.is_area_accepted(area):
                return area
        return None

    def awaiting_area_answer(self, area: ProjectArea) -> bool:
        """True when the area's latest question has not been answered yet."""
        return len(self.system_questions(area.id)) > len(self.area_answers(area.id))

    # -- diagnosis / reflection state ---------------------------------------

    def diagnosed_ids(self) -> list[str]:
        return [d.risk_id for d in self.diagnoses]

    def reflection_for(self, risk_id: str) -> Reflection | None:
        for r in self.reflections:
            if r.risk_id == risk_id:
                return r
        return None

    def next_reflection_target(self) -> str | None:
        for d in self.diagnoses:
            r = self.reflection_for(d.risk_id)
            if r is None or r.answer is None:
                return d.risk_id
        return None

    def emotions_answer(self) -> str:
        return "\n".join(self.area_answers(EMOTIONS_AREA_ID))

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "id": self.id,
            "novice_id": self.novice_id,
            "project_model_version": self.project_model_version,
            "risk_model_version": self.risk_model_version,
            "phase": self.phase.value,
            "transcript": [m.to_dict() for m in self.transcript],
            "context": [c.to_dict() for c in self.context],
            "diagnoses": [d.to_dict() for d in self.diagnoses],
            "reflections": [r.to_dict() for r in self.reflections],
            "agenda": self.agenda.to_dict() if self.agenda else None,
            "thin_context_areas": list(self.thin_context_areas),
            "created_at": self.created_at,
            "updated_at": self.updated_at,
        }

    def transcript_jsonl(self) -> str:
        import json

        return "".join(json.dumps(m.to_dict(), ensure_ascii=False) + "\n" for m in self.transcript)

    @staticmethod
    def from_dict(raw: dict[str, Any]) -> "Session":
        agenda_raw = raw.get("agenda")
        return Session(
            id=raw["id"],
            novice_id=raw["novice_id"],
            project_model_version=raw["project_model_version"],
            risk_model_version=raw["risk_model_version"],
            phase=Phase(raw["phase"]),
            transcript=[ChatMessage(**m) for m in raw.get("transcript", [])],
            context=[ContextEntry(**c) for c in raw.get("context", [])],
            diagnoses=[
                Diagnosis(
                    risk_id=d["risk_id"],
                    rationale=d["rationale"],
                    evidence=tuple(d["evidence"]),
                    diagnosed_at=d["diagnosed_at"],
                )
                for d in raw.get("diagnoses", [])
            ],
            reflections=[
                Reflection(
                    risk_id=r["risk_id"],
                    question=r["question"],
                    answer=r["answer"],
                    asked_at=r["asked_at"],
                    followup_questions=tuple(r.get("followup_questions", [])),
                )
                for r in raw.get("reflections", [])
            ],
            agenda=AgendaSelection(
                selected=tuple(agenda_raw["selected"]),
                omitted=tuple(agenda_raw["omitted"]),
                notes=agenda_raw["notes"],
            )
            if agenda_raw
            else None,
            thin_context_areas=list(raw.get("thin_context_areas", [])),
            created_at=raw.get("created_at", ""),
            updated_at=raw.get("updated_at", ""),
        )


# ---------------------------------------------------------------------------
# Operations


def create_session(
    novice_id: str,
    project_model: ProjectModel,
    risk_model: RiskModel,
    *,
    session_id: str | None = None,
    now: datetime | None = None,
) -> Session:
    """Open a fresh engagement: greet the novice and pose the first area's
    canonical question. Model versions are pinned for the session's lifetime."""
    ts = _iso(now)
    session = Session(
        id=session_id or uuid.uuid4().hex,
        novice_id=novice_id,
        project_model_version=project_model.version,
        risk_model_version=risk_model.version,
        phase=Phase.ELICITING,
        created_at=ts,
        updated_at=ts,
    )
    session.transcript.append(ChatMessage(seq=0, speaker="system", text=GREETING))
    first = project_model.areas[0]
    session.transcript.append(
        ChatMessage(seq=1, speaker="system", text=first.example_question, area_id=first.id)
    )
    return session


def next_action(session: Session, project_model: ProjectModel) -> NextAction:
    """Pure function of session state: what should happen next."""
    if session.phase == Phase.ELICITING:
        area = session.current_area(project_model)
        if area is not None:
            return NextAction(ActionKind.ASK_AREA_QUESTION, area.id)
        return NextAction(ActionKind.RUN_DIAGNOSIS)
    if session.phase == Phase.DIAGNOSING:
        return NextAction(ActionKind.RUN_DIAGNOSIS)
    if session.phase == Phase.REFLECTING:
        target = session.next_reflection_target()
        if target is not None:
            return NextAction(ActionKind.ASK_REFLECTION_QUESTION, target)
        return NextAction(ActionKind.AWAIT_PRIORITIZATION)
    if session.phase == Phase.PRIORITIZING:
        return NextAction(ActionKind.AWAIT_PRIORITIZATION)
    return NextAction(ActionKind.DONE)


def clarifying_question(area: ProjectArea) -> str:
    """Re-ask variant used when a required area got a very short answer."""
    return (
        "Thanks! To give your mentor the full picture, could you share a bit "
        f"more detail? {area.example_question}"
    )


def ask_area_question(
    session: Session,
    area: ProjectArea,
    text: str,
    *,
    now: datetime | None = None,
) -> Session:
    if session.phase != Phase.ELICITING:
        raise WrongPhase(f"cannot ask area questions in phase {session.phase.value}")
    if session.is_area_accepted(area):
        raise WrongPhase(f"area {area.id!r} is already answered")
    session.transcript.append(
        ChatMessage(seq=session.next_seq(), speaker="system", text=text, area_id=area.id)
    )
    session.updated_at = _iso(now)
    return session


def record_novice_message(
    session: Session,
    text: str,
    project_model: ProjectModel,
    *,
    now: datetime | None = None,
) -> Session:
    """Append a novice turn. In eliciting it answers the currently asked area;
    in reflecting it answers the currently asked reflection question."""
    trimmed = text.strip()
    if not trimmed:
        raise EmptyMessage("message is empty")
    if session.phase == Phase.ELICITING:
        area = session.current_area(project_model)
        if area is None:
            raise WrongPhase("all areas are already answered")
        session.transcript.append(
            ChatMessage(seq=session.next_seq(), speaker="novice", text=trimmed, area_id=area.id)
        )
        if session.is_area_accepted(area):
            answers = session.area_answers(area.id)
            if area.required and all(len(a.strip()) < MIN_ANSWER_CHARS for a in answers):
                mark_thin_context(session, area.id)
            if session.current_area(project_model) is None:
                session.phase = Phase.DIAGNOSING
    elif session.phase == Phase.REFLECTING:
        pending = None
        for r in session.reflections:
            if r.answer is None:
                pending = r
                break
        if pending is None:
            raise WrongPhase("no reflection question is awaiting an answer")
        session.transcript.append(
            ChatMessage(
                seq=session.next_seq(), speaker="novice", text=trimmed, risk_id=pending.risk_id
            )
        )
        pending.answer = trimmed
        if session.next_reflection_target() is None:
            session.phase = Phase.PRIORITIZING
    else:
        raise WrongPhase(f"cannot record novice messages in phase {session.phase.value}")
    session.updated_at = _iso(now)
    return session


def attach_context(
    session: Session,
    entries: Iterable[ContextEntry],
    project_model: ProjectModel,
    *,
    now: datetime | None = None,
) -> Session:
    if session.phase not in (Phase.ELICITING, Phase.DIAGNOSING):
        raise WrongPhase(f"cannot attach context in phase {session.phase.value}")
    entries = list(entries)
    area_ids = set(project_model.area_ids())
    for entry in entries:
        if entry.area_id not in area_ids:
            raise UnknownArea(f"context entry references unknown area {entry.area_id!r}")
        source = session.message_by_seq(entry.source_seq)
        if source is None or source.speaker != "novice":
            raise BadSourceRef(f"source_seq {entry.source_seq} does not point at a novice message")
    for entry in entries:
        replaced = False
        for i, existing in enumerate(session.context):
            if existing.area_id == entry.area_id and existing.key == entry.key:
                session.context[i] = entry  # same slot keeps summary ordering stable
                replaced = True
                break
        if not replaced:
            session.context.append(entry)
    session.updated_at = _iso(now)
    return session


def attach_diagnoses(
    session: Session,
    diagnoses: Iterable[Diagnosis],
    risk_model: RiskModel,
    *,
    now: datetime | None = None,
) -> Session:
    """Store diagnoses and advance. Rejection is atomic: one bad risk id and
    the session is left untouched."""
    if session.phase != Phase.DIAGNOSING:
        raise WrongPhase(f"cannot attach diagnoses in phase {session.phase.value}")
    if not session.novice_messages():
        raise NoContext("no areas have been answered")
    incoming = list(diagnoses)
    enabled = set(risk_model.enabled_ids())
    for d in incoming:
        if d.risk_id not in enabled:
            raise UnknownRisk(f"diagnosis references unknown or disabled risk {d.risk_id!r}")
    deduped: dict[str, Diagnosis] = {}
    for d in incoming:
        deduped.setdefault(d.risk_id, d)
    model_order = {r.id: i for i, r in enumerate(risk_model.risks)}
    session.diagnoses = sorted(deduped.values(), key=lambda d: model_order[d.risk_id])
    session.phase = Phase.REFLECTING if session.diagnoses else Phase.PRIORITIZING
    session.updated_at = _iso(now)
    return session


def ask_reflection_question(
    session: Session,
    risk_id: str,
    question: str,
    *,
    followups: Iterable[str] = (),
    now: datetime | None = None,
) -> Session:
    if session.phase != Phase.REFLECTING:
        raise WrongPhase(f"cannot ask reflection questions in phase {session.phase.value}")
    if risk_id not in session.diagnosed_ids():
        raise UnknownRisk(f"risk {risk_id!r} was not diagnosed in this session")
    if session.reflection_for(risk_id) is not None:
        raise WrongPhase(f"reflection for {risk_id!r} was already asked")
    if not question.strip():
        raise EmptyMessage("reflection question is empty")
    ts = _iso(now)
    session.transcript.append(
        ChatMessage(seq=session.next_seq(), speaker="system", text=question, risk_id=risk_id)
    )
    session.reflections.append(
        Reflection(
            risk_id=risk_id,
            question=question,
            answer=None,
            asked_at=ts,
            followup_questions=tuple(followups),
        )
    )
    session.updated_at = ts
    return session


def set_agenda(
    session: Session,
    selected: Iterable[str],
    notes: str,
    *,
    now: datetime | None = None,
) -> Session:
    if session.phase != Phase.PRIORITIZING:
        raise WrongPhase(f"cannot set the agenda in phase {session.phase.value}")
    selected = list(selected)
    if len(set(selected)) != len(selected):
        raise DuplicateSelection("agenda selection contains duplicates")
    diagnosed = session.diagnosed_ids()
    for risk_id in selected:
        if risk_id not in diagnosed:
            raise UnknownRisk(f"selected risk {risk_id!r} was not diagnosed")
    omitted = tuple(r for r in diagnosed if r not in selected)
    session.agenda = AgendaSelection(selected=tuple(selected), omitted=omitted, notes=notes)
    session.phase = Phase.COMPLETE
    session.updated_at = _iso(now)
    return session


def mark_thin_context(session: Session, area_id: str) -> Session:
    if area_id not in session.thin_context_areas:
        session.thin_context_areas.append(area_id)
    return session
