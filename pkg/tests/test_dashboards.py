from __future__ import annotations

import json

import pytest

from coachkit.dashboards import (
    MentorGoals,
    build_mentor_dashboard,
    build_novice_dashboard,
    render_export,
)
from coachkit.errors import WrongPhase
from coachkit.pipeline import StrategySuggestion
from coachkit.session import (
    ContextEntry,
    Diagnosis,
    ask_reflection_question,
    attach_context,
    attach_diagnoses,
    create_session,
    record_novice_message,
    set_agenda,
)

ANSWERS = {
    "project-information": "A marketplace connecting artists with craft fairs.",
    "current-focus": "Onboarding flow for the first artists.",
    "learning": "Artists discover fairs through word of mouth.",
    "obstacles": "No repeatable way to reach new artists.",
    "plan": "Onboard one hundred artists by May.",
    "coaching-outcome": "Agree on one outreach experiment.",
    "emotions": "nervous about launch",
}


def _session(models, *, diagnosed=("testing",), selected=None, complete=True):
    project_model, risk_model = models
    session = create_session("novice-7", project_model, risk_model, session_id="dash")
    for area in project_model.areas:
        record_novice_message(session, ANSWERS[area.id], project_model)
    plan_seq = session.novice_messages("plan")[0].seq
    attach_context(
        session,
        [ContextEntry(area_id="plan", key="Goals", value="Onboard one hundred artists", source_seq=plan_seq)],
        project_model,
    )
    attach_diagnoses(
        session,
        [Diagnosis(risk_id=r, rationale=f"because {r}", evidence=(plan_seq,), diagnosed_at="t") for r in diagnosed],
        risk_model,
    )
    for risk_id in session.diagnosed_ids():
        ask_reflection_question(
            session, risk_id, f"What about {risk_id}?", followups=(f"And how would you test {risk_id}?",)
        )
        record_novice_message(session, f"I have not validated {risk_id} yet.", project_model)
    if complete:
        chosen = list(selected) if selected is not None else list(diagnosed)
        set_agenda(session, chosen, "bring numbers")
    return session, risk_model


def test_novice_dashboard_complement_count(models):
    session, risk_model = _session(models, diagnosed=("testing",))
    dashboard = build_novice_dashboard(session, risk_model)
    assert len(dashboard.risk_reports) == 1
    assert len(dashboard.other_model_risks) == 10
    assert "Testing" not in dashboard.other_model_risks


def test_novice_dashboard_no_diagnoses(models):
    project_model, risk_model = models
    session = create_session("n", project_model, risk_model, session_id="empty")
    for area in project_model.areas:
        record_novice_message(session, ANSWERS[area.id], project_model)
    attach_diagnoses(session, [], risk_model)
    dashboard = build_novice_dashboard(session, risk_model)
    assert dashboard.risk_reports == ()
    assert len(dashboard.other_model_risks) == 11


def test_novice_dashboard_requires_reflecting_phase(models):
    project_model, risk_model = models
    session = create_session("n", project_model, risk_model)
    with pytest.raises(WrongPhase):
        build_novice_dashboard(session, risk_model)


def test_novice_dashboard_carries_reflection_and_followups(models):
    session, risk_model = _session(models)
    report = build_novice_dashboard(session, risk_model).risk_reports[0]
    assert report.question == "What about testing?"
    assert report.answer == "I have not validated testing yet."
    assert report.more_questions == ("And how would you test testing?",)
    assert "because testing" in report.explanation


def test_novice_dashboard_never_contains_mentor_fields(models):
    session, risk_model = _session(models)
    payload = build_novice_dashboard(session, risk_model).to_dict()
    flat = json.dumps(payload)
    assert "mentor_goals" not in payload
    assert "strategies" not in payload
    assert "hypothesized_root_causes" not in flat


def test_mentor_dashboard_partition_matches_agenda(models):
    session, risk_model = _session(
        models, diagnosed=("distribution-channels", "testing", "value-propositions"), selected=["testing"]
    )
    dashboard = build_mentor_dashboard(session, risk_model, None, [])
    assert [r.risk_id for r in dashboard.selected_risks] == ["testing"]
    assert [r.risk_id for r in dashboard.omitted_risks] == ["distribution-channels", "value-propositions"]
    omitted = {r.risk_id: r.rationale for r in dashboard.omitted_risks}
    assert omitted["distribution-channels"] == "because distribution-channels"
    selected_and_omitted = {r.risk_id for r in dashboard.selected_risks} | set(omitted)
    assert selected_and_omitted == set(session.diagnosed_ids())


def test_mentor_dashboard_emotions_verbatim_and_transcript_ref(models):
    session, risk_model = _session(models)
    dashboard = build_mentor_dashboard(session, risk_model, None, [])
    assert dashboard.emotions_excerpt == "nervous about launch"
    assert dashboard.transcript_ref == "sessions/dash#transcript"
    assert dashboard.novice_id == "novice-7"


def test_mentor_dashboard_requires_complete(models):
    session, risk_model = _session(models, complete=False)
    with pytest.raises(WrongPhase):
        build_mentor_dashboard(session, risk_model, None, [])


def test_mentor_dashboard_goals_view(models):
    session, risk_model = _session(models, diagnosed=("testing",))
    goals = MentorGoals(
        session_id="dash", focus_risk_ids=("testing",), desired_outcomes="one experiment", set_at="t"
    )
    strategies = [
        StrategySuggestion(
            risk_id="testing",
            coaching_questions=("What did the last test measure?",),
            hypothesized_root_causes=("testing feels like slowing down",),
            rationale="testing is the focus",
        )
    ]
    dashboard = build_mentor_dashboard(session, risk_model, goals, strategies)
    assert dashboard.mentor_goals["focus_risk_ids"] == ["testing"]
    assert dashboard.strategies[0].risk_id == "testing"
    none_dashboard = build_mentor_dashboard(session, risk_model, None, strategies)
    assert none_dashboard.mentor_goals is None


def test_thin_context_flags_surface(models):
    session, risk_model = _session(models)
    session.thin_context_areas.append("learning")
    dashboard = build_mentor_dashboard(session, risk_model, None, [])
    assert dashboard.thin_context_flags == ("learning",)
    assert "learning" in render_export(dashboard)


def test_mentor_export_has_required_headings(models):
    session, risk_model = _session(models, diagnosed=("testing", "planning"), selected=["planning"])
    text = render_export(build_mentor_dashboard(session, risk_model, None, []))
    assert "Selected Risks" in text
    assert "Unselected Risks" in text
    assert "Notes" in text


def test_export_marks_empty_notes(models):
    session, risk_model = _session(models)
    session.agenda.notes = ""
    dashboard = build_mentor_dashboard(session, risk_model, None, [])
    assert "(empty)" in render_export(dashboard)


def test_dashboard_building_is_pure(models):
    session, risk_model = _session(models)
    a = json.dumps(build_novice_dashboard(session, risk_model).to_dict())
    b = json.dumps(build_novice_dashboard(session, risk_model).to_dict())
    assert a == b
    c = json.dumps(build_mentor_dashboard(session, risk_model, None, []).to_dict())
    d = json.dumps(build_mentor_dashboard(session, risk_model, None, []).to_dict())
    assert c == d
