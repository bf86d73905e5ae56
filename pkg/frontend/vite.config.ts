import { defineConfig } from "vitest/config";

export default defineConfig({
  build: {
    target: "es2022",
    outDir: "dist",
  },
  test: {
    testTimeout: 120_000,
    hookTimeout: 60_000,
  },
});
