// Bootstrap: a small connect form (API base URL + bearer token + role), then
// tabbed views gated by role. The server stays authoritative; role gating
// here only controls which components exist in the DOM at all.

import { CoachApiClient } from "./api.js";
import { AuthoringView } from "./authoring.js";
import { ChatView } from "./chat.js";
import { MentorDashboardView } from "./dashboard_mentor.js";
import { NoviceDashboardView } from "./dashboard_novice.js";
import { PrioritizeView } from "./prioritize.js";
import { canMount, clear, el, visibleViews, type ViewName } from "./state.js";
import type { Role } from "./types.js";

export interface AppConfig {
    baseUrl: string;
    token: string;
    role: Role;
    sessionId?: string; // mentors open an existing session
}

export class App {
    private client: CoachApiClient;
    private viewHost: HTMLElement;

    constructor(
        private rootEl: HTMLElement,
        private config: AppConfig,
    ) {
        this.client = new CoachApiClient(config.baseUrl, config.token);
        this.viewHost = el("main", { class: "view-host" });
    }

    async mount(): Promise<void> {
        clear(this.rootEl);
        const nav = el("nav", { class: "tabs" });
        for (const view of visibleViews(this.config.role)) {
            const tab = el("button", { type: "button", "data-view": view }, view);
            tab.addEventListener("click", () => void this.show(view));
            nav.append(tab);
        }
        this.rootEl.append(nav, this.viewHost);
        const first = visibleViews(this.config.role)[0];
        if (first) {
            await this.show(first);
        }
    }

    async show(view: ViewName): Promise<void> {
        if (!canMount(this.config.role, view)) {
            return; // mentor-only components never mount for novices
        }
        clear(this.viewHost);
        if (view === "chat") {
            const chat = new ChatView(this.viewHost, this.client, {
                onPrioritize: (sessionId) => {
                    clear(this.viewHost);
                    const prioritize = new PrioritizeView(this.viewHost, this.client, sessionId, {
                        onDone: () => void this.show("novice-dashboard"),
                    });
                    void prioritize.load();
                    this.config.sessionId = sessionId;
                },
            });
            await chat.start();
            this.config.sessionId = chat.sessionId ?? undefined;
        } else if (view === "novice-dashboard" && this.config.sessionId) {
            const dashboard = new NoviceDashboardView(this.viewHost, this.client, this.config.sessionId);
            await dashboard.load();
        } else if (view === "mentor-dashboard" && this.config.sessionId) {
            const dashboard = new MentorDashboardView(this.viewHost, this.client, this.config.sessionId);
            await dashboard.load();
        } else if (view === "authoring") {
            const authoring = new AuthoringView(this.viewHost, this.client);
            await authoring.load();
        } else {
            this.viewHost.append(el("p", {}, "Open or start a session first."));
        }
    }
}

export function connectForm(rootEl: HTMLElement): void {
    const form = el("form", { class: "connect" });
    const url = el("input", { type: "text", name: "baseUrl", value: "http://127.0.0.1:8040" });
    const token = el("input", { type: "password", name: "token", placeholder: "bearer token" });
    const role = el("select", { name: "role" });
    role.append(el("option", { value: "novice" }, "novice"), el("option", { value: "mentor" }, "mentor"));
    const session = el("input", { type: "text", name: "sessionId", placeholder: "session id (mentor)" });
    const go = el("button", { type: "submit" }, "Connect");
    form.append(url, token, role, session, go);
    form.addEventListener("submit", (event) => {
        event.preventDefault();
        const app = new App(rootEl, {
            baseUrl: url.value.replace(/\/$/, ""),
            token: token.value,
            role: role.value as Role,
            sessionId: session.value || undefined,
        });
        void app.mount();
    });
    rootEl.append(form);
}

if (typeof document !== "undefined" && document.getElementById("app")) {
    connectForm(document.getElementById("app")!);
}
