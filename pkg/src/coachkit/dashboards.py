"""Role-specific pre-meeting views assembled from a session.

Novices see their own summary, per-risk reports, and agenda. Mentors
additionally see omitted risks with rationales, the verbatim emotions answer,
thin-context flags, the transcript reference, and goal-conditioned strategy
suggestions. Building is pure: same session, model, and goals give the same
serialized output.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

from .errors import WrongPhase
from .pipeline import StrategySuggestion
from .registry import RiskModel
from .session import Phase, Session, phase_rank


@dataclass(frozen=True)
class MentorGoals:
    session_id: str
    focus_risk_ids: tuple[str, ...]
    desired_outcomes: str
    set_at: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "session_id": self.session_id,
            "focus_risk_ids": list(self.focus_risk_ids),
            "desired_outcomes": self.desired_outcomes,
            "set_at": self.set_at,
        }


@dataclass(frozen=True)
class RiskReport:
    risk_id: str
    name: str
    explanation: str
    question: str
    answer: str
    more_questions: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "risk_id": self.risk_id,
            "name": self.name,
            "explanation": self.explanation,
            "question": self.question,
            "answer": self.answer,
            "more_questions": list(self.more_questions),
        }


@dataclass(frozen=True)
class NoviceDashboard:
    session_id: str
    project_summary: dict[str, str]  # area id -> rendered key-value lines
    risk_reports: tuple[RiskReport, ...]
    other_model_risks: tuple[str, ...]
    agenda: dict[str, Any] | None
    notes: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "session_id": self.session_id,
            "project_summary": dict(self.project_summary),
            "risk_reports": [r.to_dict() for r in self.risk_reports],
            "other_model_risks": list(self.other_model_risks),
            "agenda": self.agenda,
            "notes": self.notes,
        }


@dataclass(frozen=True)
class RiskWithRationale:
    risk_id: str
    name: str
    rationale: str

    def to_dict(self) -> dict[str, Any]:
        return {"risk_id": self.risk_id, "name": self.name, "rationale": self.rationale}


@dataclass(frozen=True)
class MentorDashboard:
    session_id: str
    novice_id: str
    project_summary: dict[str, str]
    selected_risks: tuple[RiskWithRationale, ...]
    omitted_risks: tuple[RiskWithRationale, ...]
    emotions_excerpt: str
    transcript_ref: str
    thin_context_flags: tuple[str, ...]
    strategies: tuple[StrategySuggestion, ...]
    mentor_goals: dict[str, Any] | None
    notes: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "session_id": self.session_id,
            "novice_id": self.novice_id,
            "project_summary": dict(self.project_summary),
            "selected_risks": [r.to_dict() for r in self.selected_risks],
            "omitted_risks": [r.to_dict() for r in self.omitted_risks],
            "emotions_excerpt": self.emotions_excerpt,
            "transcript_ref": self.transcript_ref,
            "thin_context_flags": list(self.thin_context_flags),
            "strategies": [s.to_dict() for s in self.strategies],
            "mentor_goals": self.mentor_goals,
            "notes": self.notes,
        }


def _project_summary(session: Session) -> dict[str, str]:
    """Extracted key-value context grouped per area, in elicitation order."""
    summary: dict[str, list[str]] = {}
    for entry in session.context:
        summary.setdefault(entry.area_id, []).append(f"{entry.key}: {entry.value}")
    return {area_id: "\n".join(lines) for area_id, lines in summary.items()}


def build_novice_dashboard(session: Session, risk_model: RiskModel) -> NoviceDashboard:
    if phase_rank(session.phase) < phase_rank(Phase.REFLECTING):
        raise WrongPhase(f"novice dashboard needs phase reflecting or later, not {session.phase.value}")
    reports = []
    for diagnosis in session.diagnoses:
        risk = risk_model.risk(diagnosis.risk_id)
        reflection = session.reflection_for(diagnosis.risk_id)
        reports.append(
            RiskReport(
                risk_id=risk.id,
                name=risk.name,
                explanation=f"{risk.description}\nWhy this came up: {diagnosis.rationale}",
                question=reflection.question if reflection else "",
                answer=(reflection.answer or "") if reflection else "",
                more_questions=reflection.followup_questions if reflection else (),
            )
        )
    diagnosed = set(session.diagnosed_ids())
    other = tuple(r.name for r in risk_model.enabled_risks() if r.id not in diagnosed)
    return NoviceDashboard(
        session_id=session.id,
        project_summary=_project_summary(session),
        risk_reports=tuple(reports),
        other_model_risks=other,
        agenda=session.agenda.to_dict() if session.agenda else None,
        notes=session.agenda.notes if session.agenda else "",
    )


def build_mentor_dashboard(
    session: Session,
    risk_model: RiskModel,
    goals: MentorGoals | None,
    strategies: Sequence[StrategySuggestion],
) -> MentorDashboard:
    if session.phase != Phase.COMPLETE or session.agenda is None:
        raise WrongPhase("mentor dashboard needs a completed session with an agenda")
    rationale_by_id = {d.risk_id: d.rationale for d in session.diagnoses}

    def _entry(risk_id: str) -> RiskWithRationale:
        return RiskWithRationale(
            risk_id=risk_id,
            name=risk_model.risk(risk_id).name,
            rationale=rationale_by_id.get(risk_id, ""),
        )

    return MentorDashboard(
        session_id=session.id,
        novice_id=session.novice_id,
        project_summary=_project_summary(session),
        selected_risks=tuple(_entry(r) for r in session.agenda.selected),
        omitted_risks=tuple(_entry(r) for r in session.agenda.omitted),
        emotions_excerpt=session.emotions_answer(),
        transcript_ref=f"sessions/{session.id}#transcript",
        thin_context_flags=tuple(session.thin_context_areas),
        strategies=tuple(strategies),
        mentor_goals=goals.to_dict() if goals else None,
        notes=session.agenda.notes,
    )


# ---------------------------------------------------------------------------
# Portable-text export


def _heading(title: str, underline: str = "-") -> list[str]:
    return [title, underline * len(title)]


def render_export(dashboard: NoviceDashboard | MentorDashboard) -> str:
    """Human-readable export containing every field, stable section order."""
    if isinstance(dashboard, NoviceDashboard):
        return _render_novice(dashboard)
    return _render_mentor(dashboard)


def _summary_lines(project_summary: dict[str, str]) -> list[str]:
    if not project_summary:
        return ["(no context extracted)"]
    lines = []
    for area_id, text in project_summary.items():
        lines.append(f"[{area_id}]")
        lines.extend(text.splitlines())
    return lines


def _render_novice(d: NoviceDashboard) -> str:
    lines = _heading(f"Pre-Meeting Summary ({d.session_id})", "=")
    lines += [""] + _heading("Project Summary") + _summary_lines(d.project_summary)
    lines += [""] + _heading("Diagnosed Risks")
    if not d.risk_reports:
        lines.append("(no risks diagnosed)")
    for report in d.risk_reports:
        lines.append(f"* {report.name}")
        lines.extend("  " + l for l in report.explanation.splitlines())
        lines.append(f"  Reflection question: {report.question or '(not asked)'}")
        lines.append(f"  Your answer: {report.answer or '(not answered)'}")
        lines.extend(f"  Worth pondering: {q}" for q in report.more_questions)
    lines += [""] + _heading("Other Risks In The Coaching Model")
    if d.other_model_risks:
        lines.extend(f"- {name}" for name in d.other_model_risks)
    else:
        lines.append("(none)")
    lines += [""] + _heading("Agenda")
    if d.agenda is None:
        lines.append("(not set yet)")
    else:
        lines.append("Selected: " + (", ".join(d.agenda["selected"]) or "(none)"))
        lines.append("Not selected: " + (", ".join(d.agenda["omitted"]) or "(none)"))
    lines += [""] + _heading("Notes")
    lines.append(d.notes or "(empty)")
    lines.append("")
    return "\n".join(lines)


def _render_mentor(d: MentorDashboard) -> str:
    lines = _heading(f"Mentor Briefing ({d.session_id})", "=")
    lines.append(f"Novice: {d.novice_id}")
    lines += [""] + _heading("Project Summary") + _summary_lines(d.project_summary)
    if d.thin_context_flags:
        lines += [""] + _heading("Thin Context Warning")
        lines.append(
            "These areas got very little input; verify before relying on them: "
            + ", ".join(d.thin_context_flags)
        )
    lines += [""] + _heading("Selected Risks")
    if not d.selected_risks:
        lines.append("(none selected)")
    for risk in d.selected_risks:
        lines.append(f"* {risk.name}")
        lines.append(f"  Rationale: {risk.rationale}")
    lines += [""] + _heading("Unselected Risks")
    if not d.omitted_risks:
        lines.append("(none omitted)")
    for risk in d.omitted_risks:
        lines.append(f"* {risk.name}")
        lines.append(f"  Rationale: {risk.rationale}")
    lines += [""] + _heading("Emotions (verbatim)")
    lines.append(d.emotions_excerpt or "(nothing shared)")
    lines += [""] + _heading("Coaching Strategy Suggestions")
    if not d.strategies:
        lines.append("(none)")
    for strategy in d.strategies:
        lines.append(f"* {strategy.risk_id}")
        lines.extend(f"  Ask: {q}" for q in strategy.coaching_questions)
        lines.extend(f"  Possible root cause: {c}" for c in strategy.hypothesized_root_causes)
        lines.append(f"  Rationale: {strategy.rationale}")
    lines += [""] + _heading("Mentor Goals")
    if d.mentor_goals is None:
        lines.append("(not set)")
    else:
        lines.append("Focus: " + (", ".join(d.mentor_goals["focus_risk_ids"]) or "(all)"))
        lines.append(f"Desired outcomes: {d.mentor_goals['desired_outcomes']}")
    lines += [""] + _heading("Transcript")
    lines.append(f"Full transcript: {d.transcript_ref}")
    lines += [""] + _heading("Notes")
    lines.append(d.notes or "(empty)")
    lines.append("")
    return "\n".join(lines)
