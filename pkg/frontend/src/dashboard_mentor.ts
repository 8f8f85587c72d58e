// Mentor dashboard: selected and omitted risks with the system's rationales,
// the verbatim emotions answer, thin-context warnings, the transcript link,
// the strategy panel, and the goals form whose submission refreshes the
// strategies in place.

import { ApiError, CoachApiClient } from "./api.js";
import { el } from "./state.js";
import type { MentorDashboard, StrategySuggestion } from "./types.js";

export class MentorDashboardView {
    readonly root: HTMLElement;
    private strategiesEl: HTMLElement;
    private goalsFormEl: HTMLFormElement;
    private errorEl: HTMLElement;
    private dashboard: MentorDashboard | null = null;

    constructor(
        container: HTMLElement,
        private client: CoachApiClient,
        private sessionId: string,
    ) {
        this.root = el("section", { class: "mentor-dashboard" });
        this.strategiesEl = el("div", { class: "strategies" });
        this.goalsFormEl = el("form", { class: "goals-form" });
        this.errorEl = el("div", { class: "error-banner", hidden: "" });
        container.append(this.root);
    }

    async load(): Promise<MentorDashboard> {
        const { dashboard } = await this.client.getMentorDashboard(this.sessionId);
        this.dashboard = dashboard;
        this.render(dashboard);
        return dashboard;
    }

    private render(dashboard: MentorDashboard): void {
        this.root.replaceChildren();
        this.root.append(el("h2", {}, `Briefing for ${dashboard.novice_id}`));

        if (dashboard.thin_context_flags.length > 0) {
            const warning = el("div", { class: "thin-context" });
            warning.append(
                el(
                    "strong",
                    {},
                    `Thin context: ${dashboard.thin_context_flags.join(", ")} — verify before relying on these.`,
                ),
            );
            this.root.append(warning);
        }

        const summary = el("dl", { class: "project-summary" });
        for (const [areaId, text] of Object.entries(dashboard.project_summary)) {
            summary.append(el("dt", { "data-area-id": areaId }, areaId));
            summary.append(el("dd", {}, text));
        }
        this.root.append(summary);

        this.root.append(el("h3", {}, "Selected risks"));
        this.root.append(this.riskList(dashboard.selected_risks, "selected-risks"));
        this.root.append(el("h3", {}, "Risks the novice left out"));
        this.root.append(this.riskList(dashboard.omitted_risks, "omitted-risks"));

        this.root.append(el("h3", {}, "Emotions (verbatim)"));
        this.root.append(el("blockquote", { class: "emotions" }, dashboard.emotions_excerpt || "(nothing shared)"));

        this.root.append(el("h3", {}, "Transcript"));
        this.root.append(el("a", { class: "transcript-link", href: `#/${dashboard.transcript_ref}` }, "Full transcript"));

        this.root.append(el("h3", {}, "Coaching strategy suggestions"));
        this.renderStrategies(dashboard.strategies);
        this.root.append(this.strategiesEl);

        this.root.append(el("h3", {}, "Your goals for the meeting"));
        this.renderGoalsForm(dashboard);
        this.root.append(this.goalsFormEl, this.errorEl);
    }

    private riskList(risks: { risk_id: string; name: string; rationale: string }[], cls: string): HTMLElement {
        const list = el("ul", { class: cls });
        for (const risk of risks) {
            const item = el("li", { "data-risk-id": risk.risk_id });
            item.append(el("strong", {}, risk.name));
            item.append(el("p", { class: "rationale" }, risk.rationale));
            list.append(item);
        }
        if (risks.length === 0) {
            list.append(el("li", { class: "empty" }, "(none)"));
        }
        return list;
    }

    renderStrategies(strategies: StrategySuggestion[]): void {
        this.strategiesEl.replaceChildren();
        for (const strategy of strategies) {
            const card = el("article", { class: "strategy", "data-risk-id": strategy.risk_id });
            card.append(el("h4", {}, strategy.risk_id));
            for (const question of strategy.coaching_questions) {
                card.append(el("p", { class: "coaching-question" }, question));
            }
            for (const cause of strategy.hypothesized_root_causes) {
                card.append(el("p", { class: "root-cause" }, cause));
            }
            card.append(el("p", { class: "rationale" }, strategy.rationale));
            this.strategiesEl.append(card);
        }
        if (strategies.length === 0) {
            this.strategiesEl.append(el("p", { class: "empty" }, "(none yet)"));
        }
    }

    private renderGoalsForm(dashboard: MentorDashboard): void {
        this.goalsFormEl.replaceChildren();
        const diagnosed = [...dashboard.selected_risks, ...dashboard.omitted_risks];
        for (const risk of diagnosed) {
            const label = el("label", { class: "focus-option" });
            const box = el("input", { type: "checkbox", name: "focus", value: risk.risk_id });
            if (dashboard.mentor_goals?.focus_risk_ids.includes(risk.risk_id)) {
                box.checked = true;
            }
            label.append(box, el("span", {}, risk.name));
            this.goalsFormEl.append(label);
        }
        const outcomes = el("textarea", { name: "desired_outcomes", placeholder: "Desired outcomes" });
        outcomes.value = dashboard.mentor_goals?.desired_outcomes ?? "";
        const submit = el("button", { type: "submit" }, "Save goals and refresh strategies");
        this.goalsFormEl.append(outcomes, submit);
        this.goalsFormEl.addEventListener("submit", (event) => {
            event.preventDefault();
            void this.submitGoals();
        });
    }

    async submitGoals(): Promise<void> {
        const focus = Array.from(
            this.goalsFormEl.querySelectorAll<HTMLInputElement>('input[name="focus"]:checked'),
        ).map((box) => box.value);
        const outcomes =
            this.goalsFormEl.querySelector<HTMLTextAreaElement>('textarea[name="desired_outcomes"]')?.value ?? "";
        try {
            const reply = await this.client.putGoals(this.sessionId, focus, outcomes);
            this.renderStrategies(reply.strategies);
            this.errorEl.hidden = true;
        } catch (error) {
            if (error instanceof ApiError) {
                this.errorEl.hidden = false;
                this.errorEl.textContent = `${error.code}: ${error.message}`;
                this.errorEl.dataset.code = error.code;
                return;
            }
            throw error;
        }
    }
}
