import { defineConfig } from "vitest/config";

// Served by the Python service under /app, so assets use relative paths.
export default defineConfig({
  base: "./",
  build: {
    outDir: "dist",
  },
  server: {
    proxy: {
      "/v1": "http://127.0.0.1:8000",
    },
  },
  test: {
    environment: "jsdom",
    globalSetup: "./tests/global-setup.ts",
    testTimeout: 30000,
    hookTimeout: 120000,
  },
});
