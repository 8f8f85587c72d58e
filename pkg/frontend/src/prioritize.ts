// Prioritization screen: the novice picks which diagnosed risks go on the
// meeting agenda. Selection order is the order the novice added them, and the
// agenda POST body preserves it exactly.

import { ApiError, CoachApiClient } from "./api.js";
import { el } from "./state.js";
import type { AgendaDocument, Diagnosis } from "./types.js";

export interface PrioritizeOptions {
    onDone?: (agenda: AgendaDocument) => void;
    onError?: (error: ApiError) => void;
}

export class PrioritizeView {
    readonly root: HTMLElement;
    selectedOrder: string[] = [];
    private availableEl: HTMLElement;
    private chosenEl: HTMLElement;
    private notesEl: HTMLTextAreaElement;
    private errorEl: HTMLElement;
    private diagnosed: Diagnosis[] = [];

    constructor(
        container: HTMLElement,
        private client: CoachApiClient,
        private sessionId: string,
        private options: PrioritizeOptions = {},
    ) {
        this.root = el("section", { class: "prioritize-view" });
        this.root.append(el("h2", {}, "Pick risks for your meeting agenda"));
        this.availableEl = el("ul", { class: "available-risks" });
        this.chosenEl = el("ol", { class: "chosen-risks" });
        this.notesEl = el("textarea", { name: "notes", placeholder: "Anything else to bring up?" });
        this.errorEl = el("div", { class: "error-banner", hidden: "" });
        const submit = el("button", { type: "button", class: "submit-agenda" }, "Set agenda");
        submit.addEventListener("click", () => void this.submit());
        this.root.append(
            el("h3", {}, "Diagnosed risks"),
            this.availableEl,
            el("h3", {}, "Your agenda (in order)"),
            this.chosenEl,
            this.notesEl,
            this.errorEl,
            submit,
        );
        container.append(this.root);
    }

    async load(): Promise<void> {
        const envelope = await this.client.getSession(this.sessionId);
        this.diagnosed = envelope.session.diagnoses;
        this.renderLists();
    }

    toggle(riskId: string): void {
        const index = this.selectedOrder.indexOf(riskId);
        if (index === -1) {
            this.selectedOrder.push(riskId);
        } else {
            this.selectedOrder.splice(index, 1);
        }
        this.renderLists();
    }

    notes(): string {
        return this.notesEl.value;
    }

    setNotes(value: string): void {
        this.notesEl.value = value;
    }

    async submit(): Promise<AgendaDocument | null> {
        try {
            const reply = await this.client.postAgenda(this.sessionId, [...this.selectedOrder], this.notes());
            this.options.onDone?.(reply.agenda);
            return reply.agenda;
        } catch (error) {
            if (error instanceof ApiError) {
                this.errorEl.hidden = false;
                this.errorEl.textContent = `${error.code}: ${error.message}`;
                this.errorEl.dataset.code = error.code;
                this.options.onError?.(error);
                return null;
            }
            throw error;
        }
    }

    private renderLists(): void {
        this.availableEl.replaceChildren();
        for (const diagnosis of this.diagnosed) {
            const item = el("li", { "data-risk-id": diagnosis.risk_id });
            const picked = this.selectedOrder.includes(diagnosis.risk_id);
            const button = el("button", { type: "button" }, picked ? "Remove" : "Add");
            button.addEventListener("click", () => this.toggle(diagnosis.risk_id));
            item.append(
                el("span", { class: "risk-id" }, diagnosis.risk_id),
                el("span", { class: "rationale" }, diagnosis.rationale),
                button,
            );
            this.availableEl.append(item);
        }
        this.chosenEl.replaceChildren();
        for (const riskId of this.selectedOrder) {
            this.chosenEl.append(el("li", { "data-risk-id": riskId }, riskId));
        }
    }
}
