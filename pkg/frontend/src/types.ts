// Wire types mirroring the coach-api /v1 JSON shapes.

export type Role = "novice" | "mentor";

export type Phase = "eliciting" | "diagnosing" | "reflecting" | "prioritizing" | "complete";

export interface ChatMessage {
    seq: number;
    speaker: "system" | "novice";
    text: string;
    area_id: string | null;
    risk_id: string | null;
}

export interface ContextEntry {
    area_id: string;
    key: string;
    value: string;
    source_seq: number;
}

export interface Diagnosis {
    risk_id: string;
    rationale: string;
    evidence: number[];
    diagnosed_at: string;
}

export interface Reflection {
    risk_id: string;
    question: string;
    answer: string | null;
    asked_at: string;
    followup_questions: string[];
}

export interface AgendaSelection {
    selected: string[];
    omitted: string[];
    notes: string;
}

export interface SessionSnapshot {
    schema_version: number;
    id: string;
    novice_id: string;
    project_model_version: number;
    risk_model_version: number;
    phase: Phase;
    transcript: ChatMessage[];
    context: ContextEntry[];
    diagnoses: Diagnosis[];
    reflections: Reflection[];
    agenda: AgendaSelection | null;
    thin_context_areas: string[];
    created_at: string;
    updated_at: string;
}

export interface SessionEnvelope {
    session: SessionSnapshot;
    processing: string;
    project_model_version: number;
    risk_model_version: number;
}

export interface CreateSessionResponse {
    id: string;
    phase: Phase;
    messages: ChatMessage[];
    processing: string;
    project_model_version: number;
    risk_model_version: number;
}

export interface PostMessageResponse {
    messages: ChatMessage[];
    phase: Phase;
    processing: string;
}

export interface AgendaItem {
    risk_id: string;
    risk_name: string;
    reflection_excerpt: string;
    discussion_goal: string;
}

export interface AgendaDocument {
    session_id: string;
    items: AgendaItem[];
    notes: string;
}

export interface RiskReport {
    risk_id: string;
    name: string;
    explanation: string;
    question: string;
    answer: string;
    more_questions: string[];
}

export interface NoviceDashboard {
    session_id: string;
    project_summary: Record<string, string>;
    risk_reports: RiskReport[];
    other_model_risks: string[];
    agenda: AgendaSelection | null;
    notes: string;
}

export interface RiskWithRationale {
    risk_id: string;
    name: string;
    rationale: string;
}

export interface StrategySuggestion {
    risk_id: string;
    coaching_questions: string[];
    hypothesized_root_causes: string[];
    rationale: string;
}

export interface MentorGoals {
    session_id: string;
    focus_risk_ids: string[];
    desired_outcomes: string;
    set_at: string;
}

export interface MentorDashboard {
    session_id: string;
    novice_id: string;
    project_summary: Record<string, string>;
    selected_risks: RiskWithRationale[];
    omitted_risks: RiskWithRationale[];
    emotions_excerpt: string;
    transcript_ref: string;
    thin_context_flags: string[];
    strategies: StrategySuggestion[];
    mentor_goals: MentorGoals | null;
    notes: string;
}

export interface RiskDefinition {
    id: string;
    name: string;
    description: string;
    examples: string[];
    enabled: boolean;
    created_by: string;
    revision: number;
}

export interface RiskModel {
    schema_version: number;
    version: number;
    risks: RiskDefinition[];
}
