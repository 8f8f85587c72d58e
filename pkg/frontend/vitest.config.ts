import { defineConfig } from "vitest/config";

export default defineConfig({
    test: {
        environment: "jsdom",
        include: ["tests/**/*.test.ts"],
        testTimeout: 60000,
        hookTimeout: 60000,
        // each test file spawns its own coach-api instance; keep them apart
        fileParallelism: false,
    },
});
