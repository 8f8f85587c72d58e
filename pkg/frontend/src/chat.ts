// Chat view: shows system questions one at a time, posts novice answers,
// then hands off to the prioritization screen once every diagnosed risk has
// been reflected on. Message sends are optimistic and reconciled against the
// server snapshot; a 2s poll keeps the phase banner honest.

import { ApiError, CoachApiClient } from "./api.js";
import { clear, el } from "./state.js";
import type { ChatMessage, Phase } from "./types.js";

export interface ChatViewOptions {
    pollIntervalMs?: number;
    onPrioritize?: (sessionId: string) => void;
    onError?: (error: ApiError) => void;
}

export class ChatView {
    readonly root: HTMLElement;
    sessionId: string | null = null;
    phase: Phase = "eliciting";
    private messagesEl: HTMLElement;
    private bannerEl: HTMLElement;
    private errorEl: HTMLElement;
    private inputEl: HTMLInputElement;
    private formEl: HTMLFormElement;
    private rendered = new Set<number>();
    private pollTimer: ReturnType<typeof setInterval> | null = null;
    private sending = false;

    constructor(
        container: HTMLElement,
        private client: CoachApiClient,
        private options: ChatViewOptions = {},
    ) {
        this.root = el("section", { class: "chat-view" });
        this.bannerEl = el("div", { class: "phase-banner", "data-phase": "eliciting" });
        this.messagesEl = el("div", { class: "messages" });
        this.errorEl = el("div", { class: "error-banner", hidden: "" });
        this.formEl = el("form", { class: "composer" });
        this.inputEl = el("input", { type: "text", name: "message", autocomplete: "off" });
        const send = el("button", { type: "submit" }, "Send");
        this.formEl.append(this.inputEl, send);
        this.formEl.addEventListener("submit", (event) => {
            event.preventDefault();
            void this.send();
        });
        this.root.append(this.bannerEl, this.messagesEl, this.errorEl, this.formEl);
        container.append(this.root);
    }

    async start(): Promise<void> {
        const created = await this.client.createSession();
        this.sessionId = created.id;
        this.appendMessages(created.messages);
        this.setPhase(created.phase);
        const interval = this.options.pollIntervalMs ?? 2000;
        this.pollTimer = setInterval(() => void this.poll(), interval);
    }

    stop(): void {
        if (this.pollTimer !== null) {
            clearInterval(this.pollTimer);
            this.pollTimer = null;
        }
    }

    async send(): Promise<void> {
        if (!this.sessionId || this.sending) {
            return;
        }
        const text = this.inputEl.value.trim();
        if (!text) {
            return;
        }
        this.sending = true;
        this.inputEl.value = "";
        // optimistic bubble, replaced by the server's copy on reconcile
        const pending = this.bubble({ seq: -1, speaker: "novice", text, area_id: null, risk_id: null });
        pending.classList.add("pending");
        this.messagesEl.append(pending);
        try {
            const reply = await this.client.postMessage(this.sessionId, text, crypto.randomUUID());
            pending.remove();
            await this.refresh();
            this.setPhase(reply.phase);
        } catch (error) {
            pending.remove();
            if (error instanceof ApiError) {
                this.showError(error);
            } else {
                throw error;
            }
        } finally {
            this.sending = false;
        }
    }

    async refresh(): Promise<void> {
        if (!this.sessionId) {
            return;
        }
        const envelope = await this.client.getSession(this.sessionId);
        this.appendMessages(envelope.session.transcript);
        this.setPhase(envelope.session.phase);
    }

    private async poll(): Promise<void> {
        try {
            await this.refresh();
        } catch {
            // transient poll failures stay silent; the next tick retries
        }
    }

    private setPhase(phase: Phase): void {
        this.phase = phase;
        this.bannerEl.dataset.phase = phase;
        const labels: Record<Phase, string> = {
            eliciting: "Tell the assistant about your venture",
            diagnosing: "Looking for risks…",
            reflecting: "Reflect on the risks it found",
            prioritizing: "Pick the risks for your meeting agenda",
            complete: "All set — see your dashboard",
        };
        this.bannerEl.textContent = labels[phase];
        const chatting = phase === "eliciting" || phase === "reflecting";
        this.inputEl.disabled = !chatting;
        if (phase === "prioritizing" && this.sessionId && this.options.onPrioritize) {
            this.stop();
            this.options.onPrioritize(this.sessionId);
        }
    }

    private showError(error: ApiError): void {
        this.errorEl.hidden = false;
        this.errorEl.textContent = `${error.code}: ${error.message}`;
        this.errorEl.dataset.code = error.code;
        this.options.onError?.(error);
    }

    private bubble(message: ChatMessage): HTMLElement {
        const node = el("p", { class: `message ${message.speaker}` }, message.text);
        node.dataset.seq = String(message.seq);
        if (message.area_id) {
            node.dataset.areaId = message.area_id;
        }
        if (message.risk_id) {
            node.dataset.riskId = message.risk_id;
        }
        return node;
    }

    private appendMessages(messages: ChatMessage[]): void {
        for (const message of messages) {
            if (this.rendered.has(message.seq)) {
                continue;
            }
            this.rendered.add(message.seq);
            this.messagesEl.append(this.bubble(message));
        }
    }

    /** Area ids of the system questions, in the order they were rendered. */
    questionAreaSequence(): string[] {
        return Array.from(this.messagesEl.querySelectorAll<HTMLElement>("p.message.system"))
            .map((node) => node.dataset.areaId ?? "")
            .filter((areaId) => areaId !== "");
    }

    static reset(container: HTMLElement): void {
        clear(container);
    }
}
