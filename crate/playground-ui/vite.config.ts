import { defineConfig } from "vitest/config";

export default defineConfig({
  base: "./",
  build: { outDir: "dist" },
  test: { environment: "jsdom", globals: true, testTimeout: 20_000 },
});
