import { defineConfig } from "vitest/config";

// Generous timeouts: tests spawn Python subprocesses and build tfjs models.
export default defineConfig({
  test: {
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
