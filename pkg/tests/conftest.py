from __future__ import annotations

import pytest

from coachkit.gateway import rule_mock
from coachkit.registry import seed_default_models
from coachkit.runner import CoachEngine, StepClock
from coachkit.session import ActionKind, next_action


@pytest.fixture
def models():
    return seed_default_models()


@pytest.fixture
def project_model(models):
    return models[0]


@pytest.fixture
def risk_model(models):
    return models[1]


DEFAULT_ANSWERS = {
    "project-information": [
        "I am building a marketplace that connects local artists with craft fairs so they can sell their work."
    ],
    "current-focus": ["I am focusing on the artist onboarding flow and lining up partner fairs."],
    "learning": ["I learned most artists hear about fairs through word of mouth and miss deadlines."],
    "obstacles": ["I have no idea how to reach artists beyond my own network."],
    "plan": ["Finish onboarding one hundred artists by May and run a pilot."],
    "coaching-outcome": ["A clear plan for how to get artists signed up and feedback on my pilot."],
    "emotions": ["Nervous about the launch but excited to show this to real artists."],
}


def drive_session(
    engine: CoachEngine,
    *,
    session_id: str = "driven",
    novice_id: str = "novice-1",
    answers: dict[str, list[str]] | None = None,
    reflection_answer: str = "Honestly I have not tested this yet.",
    selected: list[str] | None = None,
    notes: str = "Let's talk about reach.",
    stop_at: str = "complete",  # "reflecting" | "prioritizing" | "complete"
):
    """Run a session to the requested phase against the engine's backend.
    Returns (session, agenda_document_or_None)."""
    answers = {k: list(v) for k, v in (answers or DEFAULT_ANSWERS).items()}
    session = engine.start(novice_id, session_id=session_id)
    agenda_doc = None
    for _ in range(200):
        action = next_action(session, engine.project_model)
        if action.kind == ActionKind.ASK_AREA_QUESTION:
            area = engine.project_model.area(action.target)
            if not session.awaiting_area_answer(area):
                engine.advance(session)
                continue
            queue = answers.get(area.id) or ["(nothing to add here right now)"]
            engine.record_novice_answer(session, queue.pop(0) if queue else "(no answer)")
        elif action.kind == ActionKind.RUN_DIAGNOSIS:
            engine.advance(session)
            if stop_at == "reflecting":
                return session, None
        elif action.kind == ActionKind.ASK_REFLECTION_QUESTION:
            if session.reflection_for(action.target) is None:
                engine.advance(session)
                continue
            engine.record_novice_answer(session, reflection_answer)
        elif action.kind == ActionKind.AWAIT_PRIORITIZATION:
            if stop_at in ("reflecting", "prioritizing"):
                return session, None
            chosen = selected if selected is not None else session.diagnosed_ids()[:1]
            agenda_doc = engine.finish(session, chosen, notes)
        else:
            break
    return session, agenda_doc


@pytest.fixture
def mock_engine(models):
    project_model, risk_model = models
    return CoachEngine(rule_mock(), project_model, risk_model, clock=StepClock())
