// Boots the real session service for the end-to-end test.

import { spawn, ChildProcess } from "node:child_process";
import { fileURLToPath } from "node:url";
import { dirname, resolve } from "node:path";

export const BASE = "http://127.0.0.1:8642";

let server: ChildProcess | undefined;

async function waitForReady(timeoutMs: number): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(BASE + "/stdlib");
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 200));
  }
  throw new Error("session service did not come up");
}

export async function setup(): Promise<void> {
  const here = dirname(fileURLToPath(import.meta.url));
  const repo = resolve(here, "..", "..");
  server = spawn("python3", ["-m", "dtac.cli", "serve", "--port", "8642"], {
    cwd: repo,
    stdio: "ignore",
  });
  await waitForReady(30_000);
}

export async function teardown(): Promise<void> {
  if (server && !server.killed) {
    server.kill("SIGTERM");
  }
}
