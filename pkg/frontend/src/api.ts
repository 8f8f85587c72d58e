// Typed client over fetch. Every mutation the UI issues goes through exactly
// one of these methods, and each method maps to one documented /v1 route.

import type {
    AgendaDocument,
    CreateSessionResponse,
    MentorDashboard,
    MentorGoals,
    NoviceDashboard,
    PostMessageResponse,
    RiskDefinition,
    RiskModel,
    Role,
    SessionEnvelope,
    StrategySuggestion,
} from "./types.js";

export class ApiError extends Error {
    constructor(
        public status: number,
        public code: string,
        message: string,
        public detail: Record<string, unknown> = {},
    ) {
        super(message);
    }
}

export class CoachApiClient {
    constructor(
        private baseUrl: string,
        private token: string,
    ) {}

    private async request<T>(
        method: string,
        path: string,
        body?: unknown,
        headers: Record<string, string> = {},
    ): Promise<T> {
        const response = await fetch(`${this.baseUrl}${path}`, {
            method,
            headers: {
                Authorization: `Bearer ${this.token}`,
                ...(body !== undefined ? { "Content-Type": "application/json" } : {}),
                ...headers,
            },
            body: body !== undefined ? JSON.stringify(body) : undefined,
        });
        let payload: any = null;
        try {
            payload = await response.json();
        } catch {
            payload = null;
        }
        if (!response.ok) {
            const err = payload?.error ?? {};
            throw new ApiError(
                response.status,
                err.code ?? "http_error",
                err.message ?? `HTTP ${response.status}`,
                err,
            );
        }
        return payload as T;
    }

    createSession(): Promise<CreateSessionResponse> {
        return this.request("POST", "/v1/sessions", {});
    }

    getSession(id: string): Promise<SessionEnvelope> {
        return this.request("GET", `/v1/sessions/${id}`);
    }

    postMessage(id: string, text: string, idempotencyKey?: string): Promise<PostMessageResponse> {
        const headers: Record<string, string> = {};
        if (idempotencyKey) {
            headers["Idempotency-Key"] = idempotencyKey;
        }
        return this.request("POST", `/v1/sessions/${id}/messages`, { text }, headers);
    }

    postAgenda(id: string, selected: string[], notes: string): Promise<{ agenda: AgendaDocument }> {
        return this.request("POST", `/v1/sessions/${id}/agenda`, { selected, notes });
    }

    getNoviceDashboard(id: string): Promise<{ dashboard: NoviceDashboard }> {
        return this.request("GET", `/v1/sessions/${id}/dashboard?role=novice`);
    }

    getMentorDashboard(id: string): Promise<{ dashboard: MentorDashboard }> {
        return this.request("GET", `/v1/sessions/${id}/dashboard?role=mentor`);
    }

    putGoals(
        id: string,
        focusRiskIds: string[],
        desiredOutcomes: string,
    ): Promise<{ goals: MentorGoals; strategies: StrategySuggestion[] }> {
        return this.request("PUT", `/v1/sessions/${id}/goals`, {
            focus_risk_ids: focusRiskIds,
            desired_outcomes: desiredOutcomes,
        });
    }

    rediagnose(id: string): Promise<{ diagnoses: unknown[]; phase: string }> {
        return this.request("POST", `/v1/sessions/${id}/rediagnose`);
    }

    getRiskModel(): Promise<{ model: RiskModel; store_version: number }> {
        return this.request("GET", "/v1/risk-model");
    }

    addRisk(body: {
        name: string;
        description: string;
        examples?: string[];
        id?: string;
    }): Promise<{ risk: RiskDefinition; model_version: number }> {
        return this.request("POST", "/v1/risk-model/risks", body);
    }

    patchRisk(
        id: string,
        patch: Partial<Pick<RiskDefinition, "name" | "description" | "examples">>,
        expectedModelVersion?: number,
    ): Promise<{ risk: RiskDefinition; model_version: number }> {
        const body: Record<string, unknown> = { ...patch };
        if (expectedModelVersion !== undefined) {
            body.expected_model_version = expectedModelVersion;
        }
        return this.request("PATCH", `/v1/risk-model/risks/${id}`, body);
    }

    setRiskEnabled(
        id: string,
        value: boolean,
        expectedModelVersion?: number,
    ): Promise<{ risk: RiskDefinition; model_version: number }> {
        const body: Record<string, unknown> = { value };
        if (expectedModelVersion !== undefined) {
            body.expected_model_version = expectedModelVersion;
        }
        return this.request("POST", `/v1/risk-model/risks/${id}/enabled`, body);
    }

    getAudit(collection: "models" | "gateway", id?: string): Promise<{ entries: unknown[] }> {
        const suffix = id ? `&id=${encodeURIComponent(id)}` : "";
        return this.request("GET", `/v1/audit?collection=${collection}${suffix}`);
    }
}

export type { Role };
