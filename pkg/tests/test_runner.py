from __future__ import annotations

import json

import pytest

from coachkit.errors import WrongPhase
from coachkit.gateway import ScriptedBackend, rule_mock
from coachkit.prompts import TaskKind
from coachkit.registry import RiskDefinition, add_risk, seed_default_models, set_enabled
from coachkit.runner import CoachEngine, StepClock
from coachkit.session import ActionKind, Phase, next_action
from conftest import DEFAULT_ANSWERS, drive_session


def test_engine_posts_greeting_and_first_question(mock_engine):
    session = mock_engine.start("n1", session_id="s")
    assert session.transcript[1].area_id == "project-information"
    assert mock_engine.advance(session) == []  # waiting on the novice


def test_personalized_question_once_context_exists(models):
    project_model, risk_model = models
    backend = rule_mock()  # personalization table keys off artist/fair context
    engine = CoachEngine(backend, project_model, risk_model, clock=StepClock())
    session = engine.start("n1", session_id="s")
    engine.record_novice_answer(
        session, "I am building a marketplace that connects local artists with craft fairs."
    )
    messages = engine.advance(session)
    assert messages[-1].area_id == "current-focus"
    assert "artists" in messages[-1].text  # adapted, not the canonical question


def test_first_question_is_example_when_no_context(models):
    project_model, risk_model = models
    engine = CoachEngine(rule_mock(), project_model, risk_model)
    session = engine.start("n1", session_id="s")
    # an answer with no taggable statements yields no context, so the next
    # question falls back to the canonical wording
    engine.record_novice_answer(session, "something vague enough that nothing matches here")
    messages = engine.advance(session)
    assert messages[-1].text == project_model.area("current-focus").example_question


def test_reask_flow_marks_thin_context(models):
    project_model, risk_model = models
    engine = CoachEngine(rule_mock(), project_model, risk_model, clock=StepClock())
    session = engine.start("n1", session_id="s")
    engine.record_novice_answer(session, "an app")  # too short
    messages = engine.advance(session)
    assert messages[-1].area_id == "project-information"  # re-asked once
    assert "more detail" in messages[-1].text
    engine.record_novice_answer(session, "still app")  # short again
    assert "project-information" in session.thin_context_areas
    messages = engine.advance(session)
    assert messages[-1].area_id == "current-focus"  # proceeded anyway


def test_emotions_not_extracted_or_diagnosed(models):
    project_model, risk_model = models
    engine = CoachEngine(rule_mock(), project_model, risk_model, clock=StepClock())
    session, _ = drive_session(engine, stop_at="reflecting")
    assert all(e.area_id != "emotions" for e in session.context)


def test_full_drive_reaches_complete(mock_engine):
    session, agenda_doc = drive_session(mock_engine)
    assert session.phase == Phase.COMPLETE
    assert agenda_doc is not None
    assert session.diagnosed_ids()  # the default answers trip diagnosis rules
    assert [i.risk_id for i in agenda_doc.items] == list(session.agenda.selected)


def test_extraction_empty_marks_thin_context(models):
    project_model, risk_model = models
    # a tagging table that never matches: every accepted area becomes thin
    tables = dict(rule_mock().tables)
    tables[TaskKind.CONTEXT_TAGGING] = []
    engine = CoachEngine(rule_mock(tables), project_model, risk_model, clock=StepClock())
    session = engine.start("n1", session_id="s")
    engine.record_novice_answer(
        session, "I am building a marketplace connecting artists with craft fairs."
    )
    assert "project-information" in session.thin_context_areas


def test_audit_sink_records_every_call(models):
    project_model, risk_model = models
    records = []
    engine = CoachEngine(
        rule_mock(), project_model, risk_model, clock=StepClock(), audit_sink=records.append
    )
    drive_session(engine)
    assert records, "chain calls must be audited"
    assert all(r["ok"] for r in records)
    assert {r["task"] for r in records} >= {
        "context_tagging",
        "risk_diagnosis",
        "reflection_questions",
        "agenda_synthesis",
    }
    assert all(len(r["prompt_sha256"]) == 64 for r in records)


def test_rediagnose_in_reflecting_prunes_stale_reflections(models):
    project_model, risk_model = models
    engine = CoachEngine(rule_mock(), project_model, risk_model, clock=StepClock())
    session, _ = drive_session(engine, stop_at="reflecting")
    assert session.phase == Phase.REFLECTING
    engine.advance(session)  # pose the first reflection question
    before_ids = session.diagnosed_ids()
    assert before_ids
    # mentor disables every currently diagnosed risk, then re-diagnoses
    current = risk_model
    for risk_id in before_ids:
        current, _ = set_enabled(current, risk_id, False, "mentor-1")
    engine.rediagnose(session, current)
    assert session.risk_model_version == current.version
    assert all(d.risk_id not in before_ids for d in session.diagnoses)
    assert all(r.risk_id in session.diagnosed_ids() for r in session.reflections)


def test_rediagnose_picks_up_new_mentor_risk(models):
    project_model, risk_model = models
    tables = {k: (list(v) if isinstance(v, list) else v) for k, v in rule_mock().tables.items()}
    tables[TaskKind.RISK_DIAGNOSIS] = list(tables[TaskKind.RISK_DIAGNOSIS]) + [
        {"pattern": r"word of mouth", "risk_id": "teamwork-alignment"}
    ]
    engine = CoachEngine(rule_mock(tables), project_model, risk_model, clock=StepClock())
    session, _ = drive_session(engine, stop_at="reflecting")
    assert "teamwork-alignment" not in session.diagnosed_ids()  # not in the model yet
    newer, _ = add_risk(
        risk_model,
        RiskDefinition(
            id="teamwork-alignment",
            name="Teamwork alignment",
            description="If co-founders pursue separate ideas, there is a risk the venture stalls.",
        ),
        "mentor-1",
    )
    engine.rediagnose(session, newer)
    assert "teamwork-alignment" in session.diagnosed_ids()


def test_rediagnose_refuses_after_prioritizing(models):
    project_model, risk_model = models
    engine = CoachEngine(rule_mock(), project_model, risk_model, clock=StepClock())
    session, _ = drive_session(engine)
    with pytest.raises(WrongPhase):
        engine.rediagnose(session, risk_model)


def test_engine_replay_is_deterministic(models):
    project_model, risk_model = models

    def run() -> str:
        engine = CoachEngine(rule_mock(), project_model, risk_model, clock=StepClock())
        session, agenda_doc = drive_session(engine, session_id="replay")
        return json.dumps(
            {"session": session.to_dict(), "agenda": agenda_doc.to_dict()}, ensure_ascii=False
        )

    assert run() == run()


def test_script_drift_is_loud(models):
    """A scripted fixture whose first entry is the wrong task must fail hard."""
    project_model, risk_model = models
    backend = ScriptedBackend([(TaskKind.RISK_DIAGNOSIS, "{}")])
    engine = CoachEngine(backend, project_model, risk_model)
    session = engine.start("n1", session_id="s")
    from coachkit.errors import ScriptMismatch

    with pytest.raises(ScriptMismatch):
        # the first chain call is context tagging, not diagnosis
        engine.record_novice_answer(
            session, "I am building a marketplace for artists and craft fairs."
        )
