"""Three-layer prompt construction for the chained reasoning tasks.

Every rendered prompt combines domain knowledge from the coaching model, the
novice's extracted project context, and task-specific framing, under fixed
sentinel section headers. Templates are versioned resource files; their hash
is stamped on each rendered prompt for audit.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Any, Mapping, Sequence

from .errors import PayloadMismatch
from .registry import ProjectArea, RiskDefinition, RiskModel
from .session import ChatMessage, ContextEntry
from .structured import FieldSpec, SchemaDescriptor


class TaskKind(str, Enum):
    CONTEXT_TAGGING = "context_tagging"
    QUESTION_PERSONALIZATION = "question_personalization"
    RISK_DIAGNOSIS = "risk_diagnosis"
    REFLECTION_QUESTIONS = "reflection_questions"
    STRATEGY_SUGGESTION = "strategy_suggestion"
    AGENDA_SYNTHESIS = "agenda_synthesis"


# Context keys the tagging step may produce, per seeded area. Areas added by
# mentors later fall back to a single key named after the area.
AREA_CONTEXT_KEYS: dict[str, tuple[str, ...]] = {
    "project-information": ("Problem", "Solution", "Customers"),
    "current-focus": ("Focus", "Actions"),
    "learning": ("Learning",),
    "obstacles": ("Obstacles",),
    "plan": ("Goals", "Next steps"),
    "coaching-outcome": ("Desired outcome", "Success metric"),
    "emotions": ("Emotions",),
}

EMPTY_CONTEXT_LINE = "No project context has been gathered yet."
NO_KNOWLEDGE_LINE = "No additional domain knowledge applies to this task."


def permitted_context_keys(area: ProjectArea) -> tuple[str, ...]:
    return AREA_CONTEXT_KEYS.get(area.id, (area.name,))


SCHEMAS: dict[TaskKind, SchemaDescriptor] = {
    TaskKind.CONTEXT_TAGGING: SchemaDescriptor(
        name="context_tagging",
        root=FieldSpec(
            kind="object",
            fields={
                "entries": FieldSpec(
                    kind="list",
                    item=FieldSpec(
                        kind="object",
                        fields={
                            "key": FieldSpec(kind="string", nonempty=True),
                            "value": FieldSpec(kind="string", nonempty=True),
                            "source_seq": FieldSpec(kind="integer"),
                        },
                    ),
                )
            },
        ),
    ),
    TaskKind.QUESTION_PERSONALIZATION: SchemaDescriptor(
        name="question_personalization",
        root=FieldSpec(kind="object", fields={"question": FieldSpec(kind="string")}),
    ),
    TaskKind.RISK_DIAGNOSIS: SchemaDescriptor(
        name="risk_diagnosis",
        root=FieldSpec(
            kind="object",
            fields={
                "diagnoses": FieldSpec(
                    kind="list",
                    item=FieldSpec(
                        kind="object",
                        fields={
                            "risk_id": FieldSpec(kind="string"),
                            "rationale": FieldSpec(kind="string"),
                            "evidence_keys": FieldSpec(
                                kind="list", required=False, item=FieldSpec(kind="string")
                            ),
                        },
                    ),
                )
            },
        ),
    ),
    TaskKind.REFLECTION_QUESTIONS: SchemaDescriptor(
        name="reflection_questions",
        root=FieldSpec(
            kind="object",
            fields={"questions": FieldSpec(kind="list", item=FieldSpec(kind="string"))},
        ),
    ),
    TaskKind.STRATEGY_SUGGESTION: SchemaDescriptor(
        name="strategy_suggestion",
        root=FieldSpec(
            kind="object",
            fields={
                "risk_id": FieldSpec(kind="string"),
                "coaching_questions": FieldSpec(
                    kind="list", nonempty=True, item=FieldSpec(kind="string", nonempty=True)
                ),
                "hypothesized_root_causes": FieldSpec(kind="list", item=FieldSpec(kind="string")),
                "rationale": FieldSpec(kind="string"),
            },
        ),
    ),
    TaskKind.AGENDA_SYNTHESIS: SchemaDescriptor(
        name="agenda_synthesis",
        root=FieldSpec(
            kind="object",
            fields={
                "items": FieldSpec(
                    kind="list",
                    item=FieldSpec(
                        kind="object",
                        fields={
                            "risk_id": FieldSpec(kind="string"),
                            "discussion_goal": FieldSpec(kind="string"),
                        },
                    ),
                )
            },
        ),
    ),
}


@dataclass(frozen=True)
class RenderedPrompt:
    task: TaskKind
    system_instructions: str
    knowledge_block: str
    context_block: str
    user_block: str
    schema: SchemaDescriptor
    template_hash: str

    def full_text(self) -> str:
        return (
            "=== SYSTEM ===\n"
            f"{self.system_instructions}\n"
            "=== KNOWLEDGE ===\n"
            f"{self.knowledge_block}\n"
            "=== CONTEXT ===\n"
            f"{self.context_block}\n"
            "=== TASK ===\n"
            f"{self.user_block}\n"
        )


_SECTION_RE = re.compile(r"^=== (SYSTEM|KNOWLEDGE|CONTEXT|TASK) ===\n", re.MULTILINE)

_template_cache: dict[TaskKind, tuple[str, str, str]] = {}


def _load_template(task: TaskKind) -> tuple[str, str, str]:
    """(system text, task text with <<PAYLOAD>> slot, sha256 of the file)."""
    cached = _template_cache.get(task)
    if cached is not None:
        return cached
    raw = (
        resources.files("coachkit").joinpath("templates", f"{task.value}.txt").read_text("utf-8")
    )
    parts = _SECTION_RE.split(raw)
    # parts: ["", "SYSTEM", text, "KNOWLEDGE", text, "CONTEXT", text, "TASK", text]
    sections = {parts[i]: parts[i + 1].strip("\n") for i in range(1, len(parts) - 1, 2)}
    loaded = (
        sections["SYSTEM"],
        sections["TASK"],
        hashlib.sha256(raw.encode("utf-8")).hexdigest(),
    )
    _template_cache[task] = loaded
    return loaded


def render_context_block(
    context: Sequence[ContextEntry],
    area_order: Mapping[str, int] | None = None,
) -> str:
    if not context:
        return EMPTY_CONTEXT_LINE
    entries = list(context)
    if area_order is not None:
        entries.sort(key=lambda e: area_order.get(e.area_id, len(area_order)))
    return "\n".join(f"{e.key}: {e.value}" for e in entries)


def _area_knowledge(area: ProjectArea, with_keys: bool) -> str:
    lines = [
        f"Area: {area.name}",
        f"Definition: {area.description}",
        f"Canonical question: {area.example_question}",
    ]
    if with_keys:
        lines.append(f"Permitted context keys: {', '.join(permitted_context_keys(area))}")
    return "\n".join(lines)


def _risk_knowledge(risk: RiskDefinition) -> str:
    lines = [f"Risk: {risk.name} (id: {risk.id})", f"Definition: {risk.description}"]
    for example in risk.examples:
        lines.append(f"Example: {example}")
    return "\n".join(lines)


def _risk_model_knowledge(model: RiskModel) -> str:
    blocks = [_risk_knowledge(r) for r in model.enabled_risks()]
    return "\n\n".join(blocks) if blocks else "No risks are currently enabled."


def _segment_lines(messages: Sequence[ChatMessage]) -> str:
    return "\n".join(f"[{m.seq}] {m.text}" for m in messages if m.speaker == "novice")


def _mentor_goal_lines(mentor_goals: Any) -> list[str]:
    if mentor_goals is None:
        return ["mentor goals: none provided"]
    focus = ", ".join(mentor_goals.focus_risk_ids)
    return [
        f"mentor goal focus: {focus if focus else 'all diagnosed risks'}",
        f"mentor desired outcomes: {mentor_goals.desired_outcomes}",
    ]


def render(
    task: TaskKind,
    knowledge: Any,
    context: Sequence[ContextEntry],
    payload: Mapping[str, Any],
    *,
    area_order: Mapping[str, int] | None = None,
) -> RenderedPrompt:
    """Deterministically assemble the three-layer prompt for ``task``.

    ``knowledge`` must match the task: a ProjectArea for tagging and
    personalization, a RiskModel for diagnosis, a RiskDefinition for
    reflection and strategy, and None for agenda synthesis.
    """
    system_text, task_text, template_hash = _load_template(task)

    if task == TaskKind.CONTEXT_TAGGING:
        if not isinstance(knowledge, ProjectArea):
            raise PayloadMismatch("context tagging needs a ProjectArea as knowledge")
        messages = payload.get("messages")
        if not messages:
            raise PayloadMismatch("context tagging needs a transcript segment")
        knowledge_block = _area_knowledge(knowledge, with_keys=True)
        payload_text = (
            f"Conversation segment (area: {knowledge.id}):\n{_segment_lines(messages)}"
        )
    elif task == TaskKind.QUESTION_PERSONALIZATION:
        if not isinstance(knowledge, ProjectArea):
            raise PayloadMismatch("question personalization needs a ProjectArea as knowledge")
        knowledge_block = _area_knowledge(knowledge, with_keys=False)
        payload_text = f"area: {knowledge.id}"
    elif task == TaskKind.RISK_DIAGNOSIS:
        if not isinstance(knowledge, RiskModel):
            raise PayloadMismatch("risk diagnosis needs a RiskModel as knowledge")
        knowledge_block = _risk_model_knowledge(knowledge)
        statements = payload.get("statements") or ()
        lines = []
        if statements:
            lines.append("Founder statements (verbatim):")
            lines.append(_segment_lines(statements))
        lines.append("Diagnose the venture described by the context above.")
        payload_text = "\n".join(lines)
    elif task == TaskKind.REFLECTION_QUESTIONS:
        if not isinstance(knowledge, RiskDefinition):
            raise PayloadMismatch("reflection questions need a RiskDefinition as knowledge")
        knowledge_block = _risk_knowledge(knowledge)
        payload_text = (
            f"risk: {payload.get('risk_id', knowledge.id)}\n"
            f"diagnosis rationale: {payload.get('rationale', '')}"
        )
    elif task == TaskKind.STRATEGY_SUGGESTION:
        if not isinstance(knowledge, RiskDefinition):
            raise PayloadMismatch("strategy suggestion needs a RiskDefinition as knowledge")
        knowledge_block = _risk_knowledge(knowledge)
        lines = [
            f"risk: {payload.get('risk_id', knowledge.id)}",
            f"diagnosis rationale: {payload.get('rationale', '')}",
            f"novice reflection: {payload.get('reflection', '')}",
        ]
        lines.extend(_mentor_goal_lines(payload.get("mentor_goals")))
        payload_text = "\n".join(lines)
    elif task == TaskKind.AGENDA_SYNTHESIS:
        if knowledge is not None:
            raise PayloadMismatch("agenda synthesis takes no domain knowledge")
        knowledge_block = NO_KNOWLEDGE_LINE
        lines = []
        for item in payload.get("items", []):
            lines.append(
                f"- risk: {item['risk_id']} | name: {item['name']} | "
                f"reflection: {item.get('reflection', '')}"
            )
        if not lines:
            lines.append("- no risks selected")
        lines.append(f"notes: {payload.get('notes', '')}")
        payload_text = "\n".join(lines)
    else:  # pragma: no cover - exhaustive over TaskKind
        raise PayloadMismatch(f"unknown task {task!r}")

    user_block = task_text.replace("<<PAYLOAD>>", payload_text)
    return RenderedPrompt(
        task=task,
        system_instructions=system_text,
        knowledge_block=knowledge_block,
        context_block=render_context_block(context, area_order),
        user_block=user_block,
        schema=SCHEMAS[task],
        template_hash=template_hash,
    )
