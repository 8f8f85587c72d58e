// Client-side role gating. The server is authoritative; this only decides
// which components mount at all, so mentor-only UI never exists in a novice's
// DOM (defense in depth).

import type { Role } from "./types.js";

export type ViewName = "chat" | "novice-dashboard" | "mentor-dashboard" | "authoring";

const VIEWS_BY_ROLE: Record<Role, ViewName[]> = {
    novice: ["chat", "novice-dashboard"],
    mentor: ["mentor-dashboard", "authoring"],
};

export function visibleViews(role: Role): ViewName[] {
    return [...VIEWS_BY_ROLE[role]];
}

export function canMount(role: Role, view: ViewName): boolean {
    return VIEWS_BY_ROLE[role].includes(view);
}

export function el<K extends keyof HTMLElementTagNameMap>(
    tag: K,
    attrs: Record<string, string> = {},
    text?: string,
): HTMLElementTagNameMap[K] {
    const node = document.createElement(tag);
    for (const [key, value] of Object.entries(attrs)) {
        node.setAttribute(key, value);
    }
    if (text !== undefined) {
        node.textContent = text;
    }
    return node;
}

export function clear(node: HTMLElement): void {
    while (node.firstChild) {
        node.removeChild(node.firstChild);
    }
}
