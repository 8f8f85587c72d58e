from __future__ import annotations

import json
import re

import pytest

from coachkit.errors import (
    ExtractionEmpty,
    PayloadMismatch,
    SchemaError,
    TransportError,
    WrongPhase,
)
from coachkit.gateway import ScriptedBackend, TextBackend, rule_mock
from coachkit.pipeline import (
    diagnose,
    extract_context,
    personalize_question,
    reflection_questions,
    suggest_strategies,
    synthesize_agenda,
)
from coachkit.prompts import TaskKind
from coachkit.registry import seed_default_models, set_enabled
from coachkit.session import (
    ChatMessage,
    ContextEntry,
    Diagnosis,
    Phase,
    ask_reflection_question,
    attach_diagnoses,
    create_session,
    record_novice_message,
    set_agenda,
)


class ExplodingBackend(TextBackend):
    """Fails the test if the pipeline calls the backend at all."""

    backend_id = "exploding"

    def complete(self, request):
        raise AssertionError("backend must not be called here")


class BrokenBackend(TextBackend):
    backend_id = "broken"

    def complete(self, request):
        raise TransportError("wire cut")


def scripted(task: TaskKind, *responses: str) -> ScriptedBackend:
    return ScriptedBackend([(task, r) for r in responses])


# ---------------------------------------------------------------------------
# extract_context


def _plan_segment(text="We plan to finish onboarding one hundred users by May"):
    return [
        ChatMessage(seq=1, speaker="system", text="What goals?", area_id="plan"),
        ChatMessage(seq=2, speaker="novice", text=text, area_id="plan"),
    ]


def oracle_extract(segment, rules, permitted):
    """Independent recomputation of the keyword tagging: (key, value, seq)
    per (novice message, matching rule), in message-then-rule order."""
    out = []
    for message in segment:
        if message.speaker != "novice":
            continue
        for rule in rules:
            if re.search(rule["pattern"], message.text, re.IGNORECASE) and rule["key"] in permitted:
                out.append((rule["key"], message.text, message.seq))
    return out


def test_extract_context_matches_keyword_oracle(project_model):
    rules = [
        {"pattern": r"plan|onboard", "key": "Goals"},
        {"pattern": r"by (may|june)", "key": "Next steps"},
        {"pattern": r"budget", "key": "Goals"},
    ]
    segment = _plan_segment()
    area = project_model.area("plan")
    backend = rule_mock({TaskKind.CONTEXT_TAGGING: rules})
    entries = extract_context(backend, area, segment)
    expected = oracle_extract(segment, rules, {"Goals", "Next steps"})
    assert [(e.key, e.value, e.source_seq) for e in entries] == expected
    assert all(e.area_id == "plan" for e in entries)


def test_extract_context_scripted_value(project_model):
    backend = scripted(
        TaskKind.CONTEXT_TAGGING,
        json.dumps(
            {"entries": [{"key": "Goals", "value": "Finish onboarding one hundred users by May", "source_seq": 2}]}
        ),
    )
    entries = extract_context(backend, project_model.area("plan"), _plan_segment())
    assert entries[0].key == "Goals"
    assert entries[0].value == "Finish onboarding one hundred users by May"
    assert entries[0].source_seq == 2


def test_extract_context_empty_on_no_verifiable_statements(project_model):
    backend = rule_mock({TaskKind.CONTEXT_TAGGING: [{"pattern": r"onboard", "key": "Goals"}]})
    with pytest.raises(ExtractionEmpty):
        extract_context(backend, project_model.area("plan"), _plan_segment("idk"))


def test_extract_context_drops_unpermitted_keys(project_model):
    backend = scripted(
        TaskKind.CONTEXT_TAGGING,
        json.dumps({"entries": [{"key": "Budget", "value": "x", "source_seq": 2}]}),
    )
    with pytest.raises(ExtractionEmpty):
        extract_context(backend, project_model.area("plan"), _plan_segment())


def test_extract_context_drops_citations_outside_segment(project_model):
    backend = scripted(
        TaskKind.CONTEXT_TAGGING,
        json.dumps(
            {
                "entries": [
                    {"key": "Goals", "value": "kept", "source_seq": 2},
                    {"key": "Goals", "value": "dropped", "source_seq": 99},
                ]
            }
        ),
    )
    entries = extract_context(backend, project_model.area("plan"), _plan_segment())
    assert [(e.value, e.source_seq) for e in entries] == [("kept", 2)]


def test_extract_context_requires_novice_message(project_model):
    system_only = [_plan_segment()[0]]
    with pytest.raises(PayloadMismatch):
        extract_context(ExplodingBackend(), project_model.area("plan"), system_only)


# ---------------------------------------------------------------------------
# personalize_question


def test_personalize_empty_context_uses_example_verbatim(project_model):
    area = project_model.area("current-focus")
    assert personalize_question(ExplodingBackend(), area, []) == area.example_question


def test_personalize_scripted_adapts_question(project_model):
    area = project_model.area("current-focus")
    context = [
        ContextEntry(area_id="project-information", key="Solution", value="an AI coaching system", source_seq=2)
    ]
    backend = scripted(
        TaskKind.QUESTION_PERSONALIZATION,
        json.dumps({"question": "What specific aspect of this AI system are you currently focusing on?"}),
    )
    question = personalize_question(backend, area, context)
    assert question == "What specific aspect of this AI system are you currently focusing on?"


def test_personalize_falls_back_on_backend_error(project_model):
    area = project_model.area("current-focus")
    context = [ContextEntry(area_id="plan", key="Goals", value="x", source_seq=2)]
    assert personalize_question(BrokenBackend(), area, context) == area.example_question


def test_personalize_falls_back_on_blank_question(project_model):
    area = project_model.area("current-focus")
    context = [ContextEntry(area_id="plan", key="Goals", value="x", source_seq=2)]
    backend = scripted(TaskKind.QUESTION_PERSONALIZATION, json.dumps({"question": "   "}))
    assert personalize_question(backend, area, context) == area.example_question


# ---------------------------------------------------------------------------
# diagnose


def _context_entries():
    return [
        ContextEntry(area_id="obstacles", key="Obstacles", value="no idea how to reach artists", source_seq=8),
        ContextEntry(area_id="plan", key="Goals", value="onboard one hundred artists", source_seq=10),
        ContextEntry(area_id="emotions", key="Emotions", value="nervous about reach", source_seq=14),
    ]


def oracle_diagnose(entries, risk_model, rules, area_order=None):
    """Keyword oracle: apply the table directly to the non-emotions context,
    first rule wins per risk, output in risk-model order."""
    usable = [e for e in entries if e.area_id != "emotions"]
    if area_order:
        usable = sorted(usable, key=lambda e: area_order.get(e.area_id, len(area_order)))
    lines = [(f"{e.key}: {e.value}", e.key) for e in usable]
    seqs_by_key: dict[str, set[int]] = {}
    for entry in usable:
        seqs_by_key.setdefault(entry.key, set()).add(entry.source_seq)
    enabled = set(risk_model.enabled_ids())
    found = {}
    for rule in rules:
        matched = [(line, key) for line, key in lines if re.search(rule["pattern"], line, re.IGNORECASE)]
        if matched and rule["risk_id"] in enabled and rule["risk_id"] not in found:
            evidence = tuple(sorted({s for _, key in matched for s in seqs_by_key[key]}))
            rationale = f'Your context "{matched[0][0]}" points at this risk.'
            found[rule["risk_id"]] = (rationale, evidence)
    model_order = {r.id: i for i, r in enumerate(risk_model.risks)}
    return [
        (risk_id, found[risk_id][0], found[risk_id][1])
        for risk_id in sorted(found, key=model_order.__getitem__)
    ]


def test_diagnose_matches_keyword_oracle(risk_model):
    rules = [
        {"pattern": r"distribut|channel|reach", "risk_id": "distribution-channels"},
        {"pattern": r"onboard", "risk_id": "planning"},
    ]
    entries = _context_entries()
    result = diagnose(rule_mock({TaskKind.RISK_DIAGNOSIS: rules}), entries, risk_model)
    expected = oracle_diagnose(entries, risk_model, rules)
    assert [(d.risk_id, d.rationale, d.evidence) for d in result] == expected
    assert [d.risk_id for d in result] == ["distribution-channels", "planning"]


def test_diagnose_skips_backend_when_all_disabled(risk_model):
    model = risk_model
    for risk in risk_model.risks:
        model, _ = set_enabled(model, risk.id, False, "m")
    assert diagnose(ExplodingBackend(), _context_entries(), model) == []


def test_diagnose_skips_backend_without_context(risk_model):
    assert diagnose(ExplodingBackend(), [], risk_model) == []
    emotions_only = [ContextEntry(area_id="emotions", key="Emotions", value="x", source_seq=2)]
    assert diagnose(ExplodingBackend(), emotions_only, risk_model) == []


def test_diagnose_excludes_emotions_from_prompt(risk_model):
    captured = {}

    class Capturing(TextBackend):
        backend_id = "cap"

        def complete(self, request):
            captured["context"] = request.prompt.context_block
            from coachkit.gateway import CompletionResponse

            return CompletionResponse(text='{"diagnoses": []}', backend_id="cap", latency=0.0)

    diagnose(Capturing(), _context_entries(), risk_model)
    assert "nervous" not in captured["context"]
    assert "no idea how to reach artists" in captured["context"]


def test_diagnose_includes_verbatim_statements_in_task_block(risk_model):
    captured = {}

    class Capturing(TextBackend):
        backend_id = "cap"

        def complete(self, request):
            captured["user"] = request.prompt.user_block
            captured["context"] = request.prompt.context_block
            from coachkit.gateway import CompletionResponse

            return CompletionResponse(text='{"diagnoses": []}', backend_id="cap", latency=0.0)

    statements = [
        ChatMessage(seq=8, speaker="novice", text="no idea how to reach artists", area_id="obstacles"),
        ChatMessage(seq=14, speaker="novice", text="feeling nervous", area_id="emotions"),
        ChatMessage(seq=7, speaker="system", text="anything slowing you down?", area_id="obstacles"),
    ]
    diagnose(Capturing(), _context_entries(), risk_model, raw_statements=statements)
    assert "[8] no idea how to reach artists" in captured["user"]
    assert "feeling nervous" not in captured["user"]  # emotions stays out
    assert "anything slowing you down?" not in captured["user"]  # system text stays out
    # the context block keeps its pure key-value shape
    assert all(": " in line for line in captured["context"].splitlines())


def test_diagnose_drops_unknown_ids_and_logs(risk_model, caplog):
    reply = json.dumps(
        {
            "diagnoses": [
                {"risk_id": "pricing-risk", "rationale": "invented", "evidence_keys": []},
                {"risk_id": "testing", "rationale": "fair point", "evidence_keys": ["Goals"]},
            ]
        }
    )
    backend = scripted(TaskKind.RISK_DIAGNOSIS, reply)
    with caplog.at_level("WARNING"):
        result = diagnose(backend, _context_entries(), risk_model)
    assert [d.risk_id for d in result] == ["testing"]
    assert any("pricing-risk" in r.message for r in caplog.records)


def test_diagnose_drops_disabled_ids(risk_model):
    model, _ = set_enabled(risk_model, "testing", False, "m")
    reply = json.dumps(
        {"diagnoses": [{"risk_id": "testing", "rationale": "nope", "evidence_keys": []}]}
    )
    assert diagnose(scripted(TaskKind.RISK_DIAGNOSIS, reply), _context_entries(), model) == []


def test_diagnose_dedupes_first_wins_and_orders_by_model(risk_model):
    reply = json.dumps(
        {
            "diagnoses": [
                {"risk_id": "value-propositions", "rationale": "second in model", "evidence_keys": []},
                {"risk_id": "distribution-channels", "rationale": "first in model", "evidence_keys": []},
                {"risk_id": "value-propositions", "rationale": "duplicate ignored", "evidence_keys": []},
            ]
        }
    )
    result = diagnose(scripted(TaskKind.RISK_DIAGNOSIS, reply), _context_entries(), risk_model)
    assert [d.risk_id for d in result] == ["distribution-channels", "value-propositions"]
    assert result[1].rationale == "second in model"


def test_diagnose_evidence_falls_back_to_all_context(risk_model):
    reply = json.dumps(
        {"diagnoses": [{"risk_id": "testing", "rationale": "r", "evidence_keys": ["Unknown"]}]}
    )
    result = diagnose(scripted(TaskKind.RISK_DIAGNOSIS, reply), _context_entries(), risk_model)
    assert result[0].evidence == (8, 10)  # every non-emotions context seq


def test_diagnose_repairs_with_one_reprompt(risk_model):
    good = json.dumps({"diagnoses": [{"risk_id": "testing", "rationale": "r", "evidence_keys": []}]})
    backend = scripted(TaskKind.RISK_DIAGNOSIS, "utter garbage", good)
    result = diagnose(backend, _context_entries(), risk_model)
    assert [d.risk_id for d in result] == ["testing"]
    assert backend.remaining == 0


def test_diagnose_schema_error_after_repair_exhaustion(risk_model):
    backend = scripted(TaskKind.RISK_DIAGNOSIS, "garbage", "more garbage")
    with pytest.raises(SchemaError):
        diagnose(backend, _context_entries(), risk_model)


# ---------------------------------------------------------------------------
# reflection_questions


def _diagnosis(risk_id="distribution-channels"):
    return Diagnosis(risk_id=risk_id, rationale="no channel evidence", evidence=(8,), diagnosed_at="t")


ARTIST_REACH_QUESTION = (
    "How do you plan to get your products into the hands of artists? "
    "And what evidence do you have that this strategy might work?"
)


def test_reflection_questions_scripted(risk_model):
    backend = scripted(TaskKind.REFLECTION_QUESTIONS, json.dumps({"questions": [ARTIST_REACH_QUESTION]}))
    questions = reflection_questions(
        backend, _diagnosis(), _context_entries(), risk_model.risk("distribution-channels")
    )
    assert questions == [ARTIST_REACH_QUESTION]


def test_reflection_questions_fallback_names_risk(risk_model):
    questions = reflection_questions(
        BrokenBackend(), _diagnosis(), _context_entries(), risk_model.risk("distribution-channels")
    )
    assert questions == ["What evidence do you have about Distribution channels?"]


def test_reflection_questions_trimmed_to_three(risk_model):
    backend = scripted(
        TaskKind.REFLECTION_QUESTIONS, json.dumps({"questions": ["a?", "b?", "c?", "d?"]})
    )
    questions = reflection_questions(
        backend, _diagnosis(), _context_entries(), risk_model.risk("distribution-channels")
    )
    assert questions == ["a?", "b?", "c?"]


def test_reflection_questions_deterministic_under_script(risk_model):
    def run():
        backend = scripted(TaskKind.REFLECTION_QUESTIONS, json.dumps({"questions": [ARTIST_REACH_QUESTION]}))
        return reflection_questions(
            backend, _diagnosis(), _context_entries(), risk_model.risk("distribution-channels")
        )

    assert run() == run()


# ---------------------------------------------------------------------------
# suggest_strategies


def _goals(focus=("value-propositions",)):
    from coachkit.dashboards import MentorGoals

    return MentorGoals(
        session_id="s", focus_risk_ids=tuple(focus), desired_outcomes="be concrete", set_at="t"
    )


def _two_diagnoses():
    return [
        _diagnosis("distribution-channels"),
        Diagnosis(risk_id="value-propositions", rationale="untested value", evidence=(10,), diagnosed_at="t"),
    ]


def test_strategies_focus_filtering(risk_model):
    table = [
        {
            "risk_id": "value-propositions",
            "coaching_questions": ["Who told you what this is worth?"],
            "root_causes": ["founder-framed value"],
        }
    ]
    backend = rule_mock({TaskKind.STRATEGY_SUGGESTION: table})
    suggestions = suggest_strategies(backend, _two_diagnoses(), _context_entries(), _goals(), risk_model)
    assert [s.risk_id for s in suggestions] == ["value-propositions"]
    assert suggestions[0].coaching_questions == ("Who told you what this is worth?",)
    assert suggestions[0].hypothesized_root_causes == ("founder-framed value",)


def test_strategies_default_cover_all_diagnosed_in_model_order(risk_model):
    backend = rule_mock({TaskKind.STRATEGY_SUGGESTION: []})
    suggestions = suggest_strategies(backend, _two_diagnoses(), _context_entries(), None, risk_model)
    assert [s.risk_id for s in suggestions] == ["distribution-channels", "value-propositions"]
    assert all(s.coaching_questions for s in suggestions)


def test_strategies_root_causes_match_mock_table(risk_model):
    # The mock's fixed cause table is the oracle for this output.
    table = [
        {
            "risk_id": "distribution-channels",
            "coaching_questions": ["Which channel will you test first?"],
            "root_causes": ["no experiments run", "relying on personal network"],
        },
        {
            "risk_id": "value-propositions",
            "coaching_questions": ["What would a skeptic need to see?"],
            "root_causes": ["value assumed from intuition"],
        },
    ]
    backend = rule_mock({TaskKind.STRATEGY_SUGGESTION: table})
    suggestions = suggest_strategies(backend, _two_diagnoses(), _context_entries(), None, risk_model)
    by_id = {s.risk_id: s for s in suggestions}
    for rule in table:
        assert by_id[rule["risk_id"]].hypothesized_root_causes == tuple(rule["root_causes"])


def test_strategies_schema_error_propagates(risk_model):
    bad = json.dumps(
        {"risk_id": "distribution-channels", "coaching_questions": [], "hypothesized_root_causes": [], "rationale": ""}
    )
    backend = scripted(TaskKind.STRATEGY_SUGGESTION, bad, bad)
    with pytest.raises(SchemaError):
        suggest_strategies(backend, [_diagnosis()], _context_entries(), None, risk_model)


def test_strategies_empty_diagnoses(risk_model):
    assert suggest_strategies(ExplodingBackend(), [], _context_entries(), None, risk_model) == []


# ---------------------------------------------------------------------------
# synthesize_agenda


def _complete_session(models, selected, *, diagnosed=("distribution-channels", "testing", "value-propositions")):
    project_model, risk_model = models
    session = create_session("n", project_model, risk_model, session_id="agenda-test")
    answers = {
        "project-information": "A marketplace connecting artists with fairs.",
        "current-focus": "Building onboarding for artists right now.",
        "learning": "Artists rely on word of mouth almost entirely.",
        "obstacles": "No clear way to reach artists outside my circle.",
        "plan": "Onboard one hundred artists by May this year.",
        "coaching-outcome": "Agree on a concrete outreach experiment.",
        "emotions": "mostly nervous",
    }
    for area in project_model.areas:
        record_novice_message(session, answers[area.id], project_model)
    attach_diagnoses(
        session,
        [Diagnosis(risk_id=r, rationale=f"because {r}", evidence=(2,), diagnosed_at="t") for r in diagnosed],
        risk_model,
    )
    for risk_id in session.diagnosed_ids():
        ask_reflection_question(session, risk_id, f"What about {risk_id}?")
        record_novice_message(session, f"I am honestly unsure about {risk_id}.", project_model)
    set_agenda(session, selected, "Bring spreadsheets.")
    return session, risk_model


def test_agenda_preserves_selected_order(models):
    session, risk_model = _complete_session(models, ["value-propositions", "distribution-channels"])
    backend = rule_mock()
    document = synthesize_agenda(backend, session, risk_model)
    assert [i.risk_id for i in document.items] == ["value-propositions", "distribution-channels"]
    assert "testing" not in [i.risk_id for i in document.items]
    assert document.notes == "Bring spreadsheets."
    assert all(i.reflection_excerpt for i in document.items)


def test_agenda_empty_selection_keeps_notes(models):
    session, risk_model = _complete_session(models, [])
    document = synthesize_agenda(ExplodingBackend(), session, risk_model)
    assert document.items == ()
    assert document.notes == "Bring spreadsheets."
    assert "(no risks selected)" in document.to_text()


def test_agenda_wrong_phase(models):
    project_model, risk_model = models
    session = create_session("n", project_model, risk_model)
    with pytest.raises(WrongPhase):
        synthesize_agenda(ExplodingBackend(), session, risk_model)


def test_agenda_backend_failure_uses_fallback_goals(models):
    session, risk_model = _complete_session(models, ["testing"])
    document = synthesize_agenda(BrokenBackend(), session, risk_model)
    assert document.items[0].discussion_goal == "Agree on concrete next steps for Testing."


def test_agenda_byte_identical_across_runs(models):
    def run():
        session, risk_model = _complete_session(models, ["distribution-channels", "testing"])
        backend = scripted(
            TaskKind.AGENDA_SYNTHESIS,
            json.dumps(
                {
                    "items": [
                        {"risk_id": "distribution-channels", "discussion_goal": "Pick one channel."},
                        {"risk_id": "testing", "discussion_goal": "Design one test."},
                    ]
                }
            ),
        )
        return synthesize_agenda(backend, session, risk_model).to_text()

    assert run() == run()


def test_full_chain_deterministic_under_scripted_backend(models):
    """extract -> diagnose -> reflect -> suggest -> agenda on one fixture."""
    project_model, risk_model = models

    def chain() -> str:
        plan = project_model.area("plan")
        segment = _plan_segment()
        entries = extract_context(
            scripted(
                TaskKind.CONTEXT_TAGGING,
                json.dumps({"entries": [{"key": "Goals", "value": "onboard one hundred users", "source_seq": 2}]}),
            ),
            plan,
            segment,
        )
        from datetime import datetime, timezone

        diagnoses = diagnose(
            scripted(
                TaskKind.RISK_DIAGNOSIS,
                json.dumps({"diagnoses": [{"risk_id": "planning", "rationale": "r", "evidence_keys": ["Goals"]}]}),
            ),
            entries,
            risk_model,
            now=datetime(2026, 1, 1, tzinfo=timezone.utc),
        )
        questions = reflection_questions(
            scripted(TaskKind.REFLECTION_QUESTIONS, json.dumps({"questions": ["What makes this feasible?"]})),
            diagnoses[0],
            entries,
            risk_model.risk("planning"),
        )
        suggestions = suggest_strategies(
            scripted(
                TaskKind.STRATEGY_SUGGESTION,
                json.dumps(
                    {
                        "risk_id": "planning",
                        "coaching_questions": ["Which goal is measurable?"],
                        "hypothesized_root_causes": ["busy work feels safe"],
                        "rationale": "goals lack measures",
                    }
                ),
            ),
            diagnoses,
            entries,
            None,
            risk_model,
        )
        blob = {
            "entries": [e.to_dict() for e in entries],
            "diagnoses": [d.to_dict() for d in diagnoses],
            "questions": questions,
            "suggestions": [s.to_dict() for s in suggestions],
        }
        return json.dumps(blob, sort_keys=False)

    assert chain() == chain()
