// Novice dashboard: project summary, risk reports with explanations and
// reflection answers, the rest of the coaching model's risks, and the agenda.

import { CoachApiClient } from "./api.js";
import { el } from "./state.js";
import type { NoviceDashboard } from "./types.js";

export class NoviceDashboardView {
    readonly root: HTMLElement;

    constructor(
        container: HTMLElement,
        private client: CoachApiClient,
        private sessionId: string,
    ) {
        this.root = el("section", { class: "novice-dashboard" });
        container.append(this.root);
    }

    async load(): Promise<NoviceDashboard> {
        const { dashboard } = await this.client.getNoviceDashboard(this.sessionId);
        this.render(dashboard);
        return dashboard;
    }

    render(dashboard: NoviceDashboard): void {
        this.root.replaceChildren();
        this.root.append(el("h2", {}, "Your pre-meeting summary"));

        const summary = el("dl", { class: "project-summary" });
        for (const [areaId, text] of Object.entries(dashboard.project_summary)) {
            summary.append(el("dt", { "data-area-id": areaId }, areaId));
            summary.append(el("dd", {}, text));
        }
        this.root.append(summary);

        this.root.append(el("h3", {}, "Risks we looked at together"));
        const reports = el("div", { class: "risk-reports" });
        for (const report of dashboard.risk_reports) {
            const card = el("article", { class: "risk-report", "data-risk-id": report.risk_id });
            card.append(el("h4", {}, report.name));
            card.append(el("p", { class: "explanation" }, report.explanation));
            card.append(el("p", { class: "question" }, report.question));
            card.append(el("p", { class: "answer" }, report.answer || "(you have not answered yet)"));
            for (const extra of report.more_questions) {
                card.append(el("p", { class: "more-question" }, extra));
            }
            reports.append(card);
        }
        this.root.append(reports);

        this.root.append(el("h3", {}, "Other risks in the coaching model"));
        const others = el("ul", { class: "other-risks" });
        for (const name of dashboard.other_model_risks) {
            others.append(el("li", {}, name));
        }
        this.root.append(others);

        this.root.append(el("h3", {}, "Agenda"));
        const agenda = el("div", { class: "agenda" });
        if (dashboard.agenda) {
            agenda.append(el("p", { class: "selected" }, `Selected: ${dashboard.agenda.selected.join(", ") || "(none)"}`));
            agenda.append(el("p", { class: "omitted" }, `Not selected: ${dashboard.agenda.omitted.join(", ") || "(none)"}`));
        } else {
            agenda.append(el("p", {}, "(not set yet)"));
        }
        agenda.append(el("p", { class: "notes" }, dashboard.notes || "(no notes)"));
        this.root.append(agenda);
    }
}
