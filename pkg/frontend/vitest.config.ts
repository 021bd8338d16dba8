import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    globalSetup: ['tests/setup/service.ts'],
    environment: 'node',
    testTimeout: 90_000,
    hookTimeout: 180_000,
  },
});
