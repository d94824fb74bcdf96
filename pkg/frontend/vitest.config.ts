import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "jsdom",
    include: ["tests/**/*.test.ts"],
    // The end-to-end test builds a synthetic session with a Python helper and
    // drives a live server, so individual tests can legitimately take a while.
    testTimeout: 120_000,
    hookTimeout: 120_000,
    // Tests share localhost ports and a scratch directory; keep files serial.
    fileParallelism: false,
  },
});
