import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    globals: true,
    environment: "node",
    include: ["test/**/*.test.ts"],
    // The end-to-end suite boots the Python API server and walks a whole
    // audit through the UI, so it needs room beyond the default 5 s.
    testTimeout: 120_000,
    hookTimeout: 60_000,
  },
});
