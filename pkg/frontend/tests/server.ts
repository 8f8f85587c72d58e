// Spawns a real coach-api instance for browser-level tests. Each test file
// gets its own server, port, and store directory.

import { type ChildProcess, spawn } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";

export const NOVICE_TOKEN = "nov-tok";
export const MENTOR_TOKEN = "men-tok";

export interface TestServer {
    baseUrl: string;
    stop(): Promise<void>;
}

export interface ServerOptions {
    port: number;
    backend?: Record<string, unknown>; // defaults to the rule mock
}

export const ARTIST_FAIR_SCRIPT = resolve(
    process.cwd(),
    "..",
    "tests",
    "fixtures",
    "artist_fair",
    "script.json",
);

export const ANSWERS = [
    "I am building a marketplace that connects local artists with craft fairs so they can sell their work. Artists struggle to find fairs that fit their style and schedule.",
    "Right now I am building the artist onboarding flow and lining up three partner fairs for a pilot.",
    "Talking to five artists taught me that most hear about fairs through word of mouth, and I have no metric to measure whether onboarding works.",
    "I have no idea how to reach artists beyond my own network, and fair organizers are slow to answer my emails.",
    "Finish onboarding one hundred artists by May; we assume artists will pay a commission, which is untested.",
    "I want to leave the meeting with a concrete plan for getting artists signed up, and a sanity check on the pilot design.",
    "Nervous about the launch but excited to finally show this to real artists.",
];

export async function startServer(options: ServerOptions): Promise<TestServer> {
    const storeRoot = mkdtempSync(join(tmpdir(), "coachkit-web-"));
    const config = {
        store_root: storeRoot,
        host: "127.0.0.1",
        port: options.port,
        tokens: {
            [NOVICE_TOKEN]: { user_id: "novice-1", role: "novice" },
            [MENTOR_TOKEN]: { user_id: "mentor-1", role: "mentor" },
        },
        backend: options.backend ?? { kind: "mock" },
    };
    const configPath = join(storeRoot, "config.json");
    writeFileSync(configPath, JSON.stringify(config));

    const child: ChildProcess = spawn(
        "python3",
        ["-m", "coachkit.cli", "serve", "--config", configPath],
        { stdio: ["ignore", "pipe", "pipe"] },
    );
    let stderr = "";
    child.stderr?.on("data", (chunk) => {
        stderr += String(chunk);
    });

    const baseUrl = `http://127.0.0.1:${options.port}`;
    const deadline = Date.now() + 30000;
    for (;;) {
        if (child.exitCode !== null) {
            throw new Error(`coach-api exited early (${child.exitCode}): ${stderr}`);
        }
        try {
            const response = await fetch(`${baseUrl}/v1/risk-model`, {
                headers: { Authorization: `Bearer ${MENTOR_TOKEN}` },
            });
            if (response.ok) {
                break;
            }
        } catch {
            // not listening yet
        }
        if (Date.now() > deadline) {
            child.kill("SIGKILL");
            throw new Error(`coach-api did not come up in time: ${stderr}`);
        }
        await new Promise((resolvePause) => setTimeout(resolvePause, 200));
    }

    return {
        baseUrl,
        stop: () =>
            new Promise<void>((resolveStop) => {
                child.once("exit", () => resolveStop());
                child.kill("SIGTERM");
                setTimeout(() => {
                    if (child.exitCode === null) {
                        child.kill("SIGKILL");
                    }
                }, 3000);
            }),
    };
}
