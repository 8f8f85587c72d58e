"""The chained reasoning tasks over the LLM gateway.

Stage order per session: context extraction while eliciting, question
personalization between areas, one risk-diagnosis pass, reflection questions
per diagnosed risk, strategy suggestions for the mentor, and agenda synthesis
once the novice has prioritized. Containment is enforced here: no output ever
names a risk outside the enabled set, whatever the backend returns.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from typing import Any, Mapping, Sequence

from .errors import (
    BackendError,
    ExtractionEmpty,
    PayloadMismatch,
    SchemaError,
    UnknownRisk,
    WrongPhase,
)
from .gateway import CompletionRequest, TextBackend
from .prompts import (
    RenderedPrompt,
    TaskKind,
    permitted_context_keys,
    render,
)
from .registry import ProjectArea, RiskDefinition, RiskModel
from .session import (
    EMOTIONS_AREA_ID,
    ChatMessage,
    ContextEntry,
    Diagnosis,
    Phase,
    Session,
)
from .structured import parse_structured

logger = logging.getLogger(__name__)

EXCERPT_CHARS = 300


def _iso(now: datetime | None) -> str:
    ts = now or datetime.now(timezone.utc)
    return ts.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def _excerpt(text: str) -> str:
    text = " ".join(text.split())
    return text if len(text) <= EXCERPT_CHARS else text[: EXCERPT_CHARS - 3] + "..."


@dataclass(frozen=True)
class StrategySuggestion:
    risk_id: str
    coaching_questions: tuple[str, ...]
    hypothesized_root_causes: tuple[str, ...]
    rationale: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "risk_id": self.risk_id,
            "coaching_questions": list(self.coaching_questions),
            "hypothesized_root_causes": list(self.hypothesized_root_causes),
            "rationale": self.rationale,
        }


@dataclass(frozen=True)
class AgendaItem:
    risk_id: str
    risk_name: str
    reflection_excerpt: str
    discussion_goal: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "risk_id": self.risk_id,
            "risk_name": self.risk_name,
            "reflection_excerpt": self.reflection_excerpt,
            "discussion_goal": self.discussion_goal,
        }


@dataclass(frozen=True)
class AgendaDocument:
    session_id: str
    items: tuple[AgendaItem, ...]
    notes: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "session_id": self.session_id,
            "items": [item.to_dict() for item in self.items],
            "notes": self.notes,
        }

    def to_text(self) -> str:
        lines = ["Meeting Agenda", "==============", f"Session: {self.session_id}", ""]
        if not self.items:
            lines.append("(no risks selected)")
        for i, item in enumerate(self.items, start=1):
            lines.append(f"{i}. {item.risk_name}")
            lines.append(f"   Reflection: {item.reflection_excerpt or '(none)'}")
            lines.append(f"   Goal: {item.discussion_goal}")
            lines.append("")
        lines.append("Notes")
        lines.append("-----")
        lines.append(self.notes or "(none)")
        lines.append("")
        return "\n".join(lines)


def _call(gateway: TextBackend, prompt: RenderedPrompt) -> str:
    return gateway.complete(CompletionRequest(task=prompt.task, prompt=prompt)).text


def _repair_via(gateway: TextBackend, prompt: RenderedPrompt):
    """One corrective re-prompt: same three layers, corrective task framing."""

    def reprompt(correction: str) -> str:
        fixed = replace(prompt, user_block=correction)
        return gateway.complete(
            CompletionRequest(task=prompt.task, prompt=fixed, attempt=1)
        ).text

    return reprompt


def extract_context(
    gateway: TextBackend,
    area: ProjectArea,
    transcript_segment: Sequence[ChatMessage],
    *,
    prior_context: Sequence[ContextEntry] = (),
    area_order: Mapping[str, int] | None = None,
) -> list[ContextEntry]:
    """Pull verifiable key-value statements for one area out of the novice's
    replies. Keys outside the area's permitted set and citations outside the
    segment are dropped, never surfaced."""
    novice_seqs = {m.seq for m in transcript_segment if m.speaker == "novice"}
    if not novice_seqs:
        raise PayloadMismatch("transcript segment has no novice message")
    prompt = render(
        TaskKind.CONTEXT_TAGGING,
        area,
        prior_context,
        {"messages": list(transcript_segment)},
        area_order=area_order,
    )
    raw = _call(gateway, prompt)
    parsed = parse_structured(raw, prompt.schema, reprompt=_repair_via(gateway, prompt))
    permitted = set(permitted_context_keys(area))
    entries: list[ContextEntry] = []
    for item in parsed.value["entries"]:
        if item["key"] not in permitted:
            logger.warning("dropping context entry with unpermitted key %r", item["key"])
            continue
        if item["source_seq"] not in novice_seqs:
            logger.warning("dropping context entry citing seq %s outside segment", item["source_seq"])
            continue
        entries.append(
            ContextEntry(
                area_id=area.id,
                key=item["key"],
                value=item["value"],
                source_seq=item["source_seq"],
            )
        )
    if not entries:
        raise ExtractionEmpty(f"no verifiable statements found for area {area.id!r}")
    return entries


def personalize_question(
    gateway: TextBackend,
    area: ProjectArea,
    context: Sequence[ContextEntry],
    *,
    area_order: Mapping[str, int] | None = None,
) -> str:
    """Adapt the area's question to the project context. Total: falls back to
    the canonical example question on empty context or any backend trouble."""
    if not context:
        return area.example_question
    prompt = render(TaskKind.QUESTION_PERSONALIZATION, area, context, {}, area_order=area_order)
    try:
        parsed = parse_structured(_call(gateway, prompt), prompt.schema)
        question = parsed.value["question"].strip()
    except (BackendError, SchemaError):
        return area.example_question
    return question or area.example_question


def diagnose(
    gateway: TextBackend,
    context: Sequence[ContextEntry],
    risk_model: RiskModel,
    *,
    raw_statements: Sequence[ChatMessage] = (),
    area_order: Mapping[str, int] | None = None,
    now: datetime | None = None,
) -> list[Diagnosis]:
    """Apply the enabled risk definitions to the extracted context, plus the
    novice's verbatim statements when the caller passes them.

    Backend outputs naming unknown or disabled risks are dropped and logged.
    Results are deduplicated (first wins) and ordered like the risk model.
    """
    if not risk_model.enabled_risks():
        return []
    diagnosable = [e for e in context if e.area_id != EMOTIONS_AREA_ID]
    if not diagnosable:
        return []
    statements = [
        m for m in raw_statements if m.speaker == "novice" and m.area_id != EMOTIONS_AREA_ID
    ]
    prompt = render(
        TaskKind.RISK_DIAGNOSIS,
        risk_model,
        diagnosable,
        {"statements": statements},
        area_order=area_order,
    )
    raw = _call(gateway, prompt)
    parsed = parse_structured(raw, prompt.schema, reprompt=_repair_via(gateway, prompt))
    enabled = set(risk_model.enabled_ids())
    seqs_by_key: dict[str, set[int]] = {}
    for entry in diagnosable:
        seqs_by_key.setdefault(entry.key, set()).add(entry.source_seq)
    all_seqs = sorted({e.source_seq for e in diagnosable})
    stamp = _iso(now)
    found: dict[str, Diagnosis] = {}
    for item in parsed.value["diagnoses"]:
        risk_id = item["risk_id"]
        if risk_id not in enabled:
            logger.warning("dropping diagnosis naming unknown or disabled risk %r", risk_id)
            continue
        rationale = item["rationale"].strip()
        if not rationale:
            logger.warning("dropping diagnosis for %r with empty rationale", risk_id)
            continue
        evidence = sorted(
            {seq for key in item.get("evidence_keys") or [] for seq in seqs_by_key.get(key, ())}
        )
        if not evidence:
            evidence = all_seqs
        found.setdefault(
            risk_id,
            Diagnosis(risk_id=risk_id, rationale=rationale, evidence=tuple(evidence), diagnosed_at=stamp),
        )
    model_order = {r.id: i for i, r in enumerate(risk_model.risks)}
    return sorted(found.values(), key=lambda d: model_order[d.risk_id])


def reflection_questions(
    gateway: TextBackend,
    diagnosis: Diagnosis,
    context: Sequence[ContextEntry],
    risk: RiskDefinition,
    *,
    area_order: Mapping[str, int] | None = None,
) -> list[str]:
    """One to three open-ended questions about a diagnosed risk. Total: a
    template question naming the risk covers every backend outcome."""
    fallback = [f"What evidence do you have about {risk.name}?"]
    prompt = render(
        TaskKind.REFLECTION_QUESTIONS,
        risk,
        context,
        {"risk_id": diagnosis.risk_id, "rationale": diagnosis.rationale},
        area_order=area_order,
    )
    try:
        parsed = parse_structured(_call(gateway, prompt), prompt.schema)
    except (BackendError, SchemaError):
        return fallback
    questions = [q.strip() for q in parsed.value["questions"] if q.strip()][:3]
    return questions or fallback


def suggest_strategies(
    gateway: TextBackend,
    diagnoses: Sequence[Diagnosis],
    context: Sequence[ContextEntry],
    mentor_goals: Any,
    risk_model: RiskModel,
    *,
    reflections: Mapping[str, str] | None = None,
    area_order: Mapping[str, int] | None = None,
) -> list[StrategySuggestion]:
    """One suggestion per mentor-focused risk, or per diagnosed risk when no
    goals are set. Mentor goals are rendered verbatim into the prompt."""
    if not diagnoses:
        return []
    focus = list(getattr(mentor_goals, "focus_risk_ids", ()) or ())
    targets = [d for d in diagnoses if not focus or d.risk_id in focus]
    suggestions: list[StrategySuggestion] = []
    for target in targets:
        risk = risk_model.risk(target.risk_id)
        payload = {
            "risk_id": target.risk_id,
            "rationale": target.rationale,
            "reflection": (reflections or {}).get(target.risk_id, ""),
            "mentor_goals": mentor_goals,
        }
        prompt = render(
            TaskKind.STRATEGY_SUGGESTION, risk, context, payload, area_order=area_order
        )
        raw = _call(gateway, prompt)
        parsed = parse_structured(raw, prompt.schema, reprompt=_repair_via(gateway, prompt))
        value = parsed.value
        if value["risk_id"] != target.risk_id:
            logger.warning(
                "strategy output named %r; keeping target %r", value["risk_id"], target.risk_id
            )
        suggestions.append(
            StrategySuggestion(
                risk_id=target.risk_id,
                coaching_questions=tuple(value["coaching_questions"]),
                hypothesized_root_causes=tuple(value["hypothesized_root_causes"]),
                rationale=value["rationale"],
            )
        )
    return suggestions


def synthesize_agenda(
    gateway: TextBackend,
    session: Session,
    risk_model: RiskModel,
    *,
    area_order: Mapping[str, int] | None = None,
) -> AgendaDocument:
    """Assemble the shared meeting agenda: exactly one item per selected risk,
    in the novice's order; omitted risks never appear. Discussion goals come
    from the backend with a deterministic fallback, so this never fails once
    the session is complete."""
    if session.phase != Phase.COMPLETE or session.agenda is None:
        raise WrongPhase("agenda synthesis requires a completed session")
    selected = session.agenda.selected
    notes = session.agenda.notes
    if not selected:
        return AgendaDocument(session_id=session.id, items=(), notes=notes)
    names: dict[str, str] = {}
    excerpts: dict[str, str] = {}
    for risk_id in selected:
        if not risk_model.has(risk_id):
            raise UnknownRisk(f"selected risk {risk_id!r} is not in the risk model")
        names[risk_id] = risk_model.risk(risk_id).name
        reflection = session.reflection_for(risk_id)
        excerpts[risk_id] = _excerpt(reflection.answer) if reflection and reflection.answer else ""
    payload_items = [
        {"risk_id": rid, "name": names[rid], "reflection": excerpts[rid]} for rid in selected
    ]
    context = [e for e in session.context if e.area_id != EMOTIONS_AREA_ID]
    prompt = render(
        TaskKind.AGENDA_SYNTHESIS,
        None,
        context,
        {"items": payload_items, "notes": notes},
        area_order=area_order,
    )
    goals: dict[str, str] = {}
    try:
        parsed = parse_structured(_call(gateway, prompt), prompt.schema)
        for item in parsed.value["items"]:
            if item["risk_id"] in names and item["discussion_goal"].strip():
                goals.setdefault(item["risk_id"], item["discussion_goal"].strip())
    except (BackendError, SchemaError) as exc:
        logger.warning("agenda synthesis backend failed (%s); using fallback goals", exc)
    items = tuple(
        AgendaItem(
            risk_id=rid,
            risk_name=names[rid],
            reflection_excerpt=excerpts[rid],
            discussion_goal=goals.get(rid, f"Agree on concrete next steps for {names[rid]}."),
        )
        for rid in selected
    )
    return AgendaDocument(session_id=session.id, items=items, notes=notes)
