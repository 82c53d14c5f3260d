import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    // full-width encoder forwards are slow in pure JS
    testTimeout: 180_000,
    hookTimeout: 180_000,
  },
});
