// Authoring view: the editable risk table. Edits PATCH the server carrying
// the model version the table was loaded from; a concurrent edit surfaces as
// a 409 banner, the table reloads to server state, and the mentor's draft is
// reapplied into the editor for review (never auto-saved).

import { ApiError, CoachApiClient } from "./api.js";
import { el } from "./state.js";
import type { RiskDefinition, RiskModel } from "./types.js";

export class AuthoringView {
    readonly root: HTMLElement;
    modelVersion = 0;
    private tableEl: HTMLTableSectionElement;
    private conflictEl: HTMLElement;
    private addFormEl: HTMLFormElement;
    private drafts = new Map<string, { description: string }>();

    constructor(
        container: HTMLElement,
        private client: CoachApiClient,
    ) {
        this.root = el("section", { class: "authoring-view" });
        this.root.append(el("h2", {}, "Risk model"));
        this.conflictEl = el("div", { class: "conflict-banner", hidden: "" });
        const table = el("table", { class: "risk-table" });
        const head = el("thead");
        const headRow = el("tr");
        for (const title of ["Risk", "Description", "Examples", "Enabled", ""]) {
            headRow.append(el("th", {}, title));
        }
        head.append(headRow);
        this.tableEl = el("tbody");
        table.append(head, this.tableEl);
        this.addFormEl = this.buildAddForm();
        this.root.append(this.conflictEl, table, this.addFormEl);
        container.append(this.root);
    }

    async load(): Promise<void> {
        const { model } = await this.client.getRiskModel();
        this.renderModel(model);
    }

    private renderModel(model: RiskModel): void {
        this.modelVersion = model.version;
        this.tableEl.replaceChildren();
        for (const risk of model.risks) {
            this.tableEl.append(this.row(risk));
        }
    }

    private row(risk: RiskDefinition): HTMLTableRowElement {
        const tr = el("tr", { "data-risk-id": risk.id });
        const name = el("td", { class: "name" }, risk.name);

        const descriptionCell = el("td", { class: "description" });
        const description = el("textarea", { name: "description" });
        description.value = this.drafts.get(risk.id)?.description ?? risk.description;
        descriptionCell.append(description);

        const examplesCell = el("td", { class: "examples" });
        const examples = el("textarea", { name: "examples" });
        examples.value = risk.examples.join("\n");
        examplesCell.append(examples);

        const enabledCell = el("td", { class: "enabled" });
        const enabled = el("input", { type: "checkbox", name: "enabled" });
        enabled.checked = risk.enabled;
        enabled.addEventListener("change", () => void this.toggleEnabled(risk.id, enabled.checked));
        enabledCell.append(enabled);

        const saveCell = el("td", { class: "actions" });
        const save = el("button", { type: "button", class: "save" }, "Save");
        save.addEventListener("click", () =>
            void this.save(risk.id, description.value, examples.value),
        );
        saveCell.append(save);

        tr.append(name, descriptionCell, examplesCell, enabledCell, saveCell);
        return tr;
    }

    async save(riskId: string, description: string, examplesText: string): Promise<void> {
        const examples = examplesText
            .split("\n")
            .map((line) => line.trim())
            .filter((line) => line !== "");
        try {
            const reply = await this.client.patchRisk(
                riskId,
                { description, examples },
                this.modelVersion,
            );
            this.modelVersion = reply.model_version;
            this.drafts.delete(riskId);
            this.conflictEl.hidden = true;
            await this.load(); // re-render server state
        } catch (error) {
            if (error instanceof ApiError && error.status === 409) {
                // keep the mentor's words, reload the table, let them reapply
                this.drafts.set(riskId, { description });
                this.conflictEl.hidden = false;
                this.conflictEl.dataset.code = error.code;
                this.conflictEl.textContent =
                    "Someone else changed the risk model. The table reloaded to the " +
                    "latest version; your edit is still in the box — review and save again.";
                await this.load();
                return;
            }
            if (error instanceof ApiError) {
                this.conflictEl.hidden = false;
                this.conflictEl.dataset.code = error.code;
                this.conflictEl.textContent = `${error.code}: ${error.message}`;
                return;
            }
            throw error;
        }
    }

    async toggleEnabled(riskId: string, value: boolean): Promise<void> {
        try {
            const reply = await this.client.setRiskEnabled(riskId, value, this.modelVersion);
            this.modelVersion = reply.model_version;
            this.conflictEl.hidden = true;
        } catch (error) {
            if (error instanceof ApiError && error.status === 409) {
                this.conflictEl.hidden = false;
                this.conflictEl.dataset.code = error.code;
                this.conflictEl.textContent =
                    "Someone else changed the risk model. The table reloaded to the latest version.";
                await this.load();
                return;
            }
            throw error;
        }
    }

    private buildAddForm(): HTMLFormElement {
        const form = el("form", { class: "add-risk" });
        form.append(el("h3", {}, "Add a risk"));
        const name = el("input", { type: "text", name: "name", placeholder: "Risk name" });
        const description = el("textarea", {
            name: "description",
            placeholder: "If ..., there is a risk that ...",
        });
        const submit = el("button", { type: "submit" }, "Add risk");
        form.append(name, description, submit);
        form.addEventListener("submit", (event) => {
            event.preventDefault();
            void this.addRisk(name.value, description.value).then(() => {
                name.value = "";
                description.value = "";
            });
        });
        return form;
    }

    async addRisk(name: string, description: string): Promise<void> {
        try {
            await this.client.addRisk({ name, description });
            this.conflictEl.hidden = true;
            await this.load();
        } catch (error) {
            if (error instanceof ApiError) {
                this.conflictEl.hidden = false;
                this.conflictEl.dataset.code = error.code;
                this.conflictEl.textContent = `${error.code}: ${error.message}`;
                return;
            }
            throw error;
        }
    }

    descriptionBox(riskId: string): HTMLTextAreaElement | null {
        return this.tableEl.querySelector<HTMLTextAreaElement>(
            `tr[data-risk-id="${riskId}"] textarea[name="description"]`,
        );
    }
}
