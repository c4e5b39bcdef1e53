import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    // The e2e suites boot the engine's HTTP server and poll real jobs at the
    // production cadence, so they need room beyond the default timeouts.
    testTimeout: 120_000,
    hookTimeout: 60_000,
  },
});
