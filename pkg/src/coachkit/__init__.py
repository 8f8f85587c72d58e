"""coachkit: pre-meeting coaching engine.

Elicits venture context through a phased dialogue, diagnoses design risks
against an expert-editable risk model, generates reflective questions and
mentor strategy suggestions through a chained pipeline, and assembles
role-specific dashboards.
"""

from .dashboards import (
    MentorDashboard,
    MentorGoals,
    NoviceDashboard,
    build_mentor_dashboard,
    build_novice_dashboard,
    render_export,
)
from .gateway import (
    CompletionRequest,
    CompletionResponse,
    LiveBackend,
    RuleMockBackend,
    ScriptedBackend,
    load_script,
    rule_mock,
)
from .pipeline import (
    AgendaDocument,
    StrategySuggestion,
    diagnose,
    extract_context,
    personalize_question,
    reflection_questions,
    suggest_strategies,
    synthesize_agenda,
)
from .prompts import RenderedPrompt, TaskKind, render
from .registry import (
    AuditEntry,
    ProjectArea,
    ProjectModel,
    RiskDefinition,
    RiskModel,
    add_risk,
    diff_models,
    revise_area,
    revise_risk,
    seed_default_models,
    set_enabled,
    validate_model,
)
from .runner import CoachEngine, StepClock
from .session import (
    AgendaSelection,
    ChatMessage,
    ContextEntry,
    Diagnosis,
    NextAction,
    Phase,
    Reflection,
    Session,
    attach_context,
    attach_diagnoses,
    create_session,
    next_action,
    record_novice_message,
    set_agenda,
)
from .store import FileStore, StoredRecord
from .structured import ParseResult, SchemaDescriptor, parse_structured

__version__ = "0.1.0"
