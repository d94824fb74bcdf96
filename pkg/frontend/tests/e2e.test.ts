// End-to-end: a scripted reviewer works a 20-cluster session to completion
// through the real UI against a real server, touching nothing but the
// keyboard. The exported corpus must match what the offline perfect
// reviewer produces for the same decisions, and the on-screen cost meter
// must equal the priced server-side action log exactly.

import { execFile, spawn } from "node:child_process";
import type { ChildProcess } from "node:child_process";
import { mkdtemp, readFile, rm } from "node:fs/promises";
import net from "node:net";
import os from "node:os";
import path from "node:path";
import { fileURLToPath } from "node:url";
import { promisify } from "node:util";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ReviewApi } from "../src/api.js";
import { startApp } from "../src/app.js";
import type { AppHandle } from "../src/app.js";

const execFileAsync = promisify(execFile);
const fixturesDir = path.dirname(fileURLToPath(import.meta.url)) + "/fixtures";

const VERIFY_SECONDS = 1;
const SELECT_SECONDS = 5;
const TYPE_SECONDS = 15;

let workDir: string;
let server: ChildProcess | null = null;
let serverExited: Promise<void>;
let base: string;
let plan: { clusters: number; truths: Record<string, string> };
let expectedCost: { absolute_seconds: number; v_t: number; v_d: number; v_v: number };
let expectedCorrected: string;

async function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = net.createServer();
    probe.once("error", reject);
    probe.listen(0, "127.0.0.1", () => {
      const address = probe.address();
      if (address === null || typeof address === "string") {
        reject(new Error("no port assigned"));
        return;
      }
      probe.close(() => resolve(address.port));
    });
  });
}

async function waitForServer(url: string, timeoutMs: number): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  let lastError: unknown = null;
  while (Date.now() < deadline) {
    try {
      const res = await fetch(url);
      if (res.ok) {
        return;
      }
      lastError = new Error(`status ${res.status}`);
    } catch (err) {
      lastError = err;
    }
    await new Promise((resolve) => setTimeout(resolve, 250));
  }
  throw new Error(`server never came up at ${url}: ${lastError}`);
}

beforeAll(async () => {
  workDir = await mkdtemp(path.join(os.tmpdir(), "review-e2e-"));
  await execFileAsync("python3", [path.join(fixturesDir, "make_session.py"), workDir]);

  plan = JSON.parse(await readFile(path.join(workDir, "session_plan.json"), "utf-8"));
  expectedCost = JSON.parse(await readFile(path.join(workDir, "expected_cost.json"), "utf-8"));
  expectedCorrected = await readFile(path.join(workDir, "expected_corrected.jsonl"), "utf-8");

  const port = await freePort();
  base = `http://127.0.0.1:${port}`;
  server = spawn(
    "batchcorrect",
    [
      "serve",
      "--corpus", path.join(workDir, "corpus.jsonl"),
      "--clustering", path.join(workDir, "clustering.jsonl"),
      "--dictionary", path.join(workDir, "words.txt"),
      "--dictionary-mode", "growing",
      "--log", path.join(workDir, "actions.jsonl"),
      "--host", "127.0.0.1",
      "--port", String(port),
    ],
    { stdio: ["ignore", "inherit", "inherit"] },
  );
  serverExited = new Promise((resolve) => server?.once("exit", () => resolve()));
  await waitForServer(`${base}/api/session`, 30_000);
});

afterAll(async () => {
  if (server && server.exitCode === null) {
    server.kill("SIGTERM");
    await Promise.race([serverExited, new Promise((r) => setTimeout(r, 5_000))]);
    if (server.exitCode === null) {
      server.kill("SIGKILL");
    }
  }
  await rm(workDir, { recursive: true, force: true });
});

function press(key: string, target: EventTarget = window): void {
  target.dispatchEvent(new KeyboardEvent("keydown", { key, bubbles: true, cancelable: true }));
}

function q<T extends HTMLElement>(root: HTMLElement, selector: string): T {
  const el = root.querySelector<T>(selector);
  if (!el) throw new Error(`missing ${selector}`);
  return el;
}

describe("live review session", () => {
  it("lists all twenty clusters largest-first before any work", async () => {
    const root = document.createElement("div");
    document.body.append(root);
    const handle = startApp(root, new ReviewApi(base));
    try {
      await handle.whenIdle();
      const rows = [...root.querySelectorAll("#queue-list li")];
      expect(rows).toHaveLength(plan.clusters);
      const sizes = rows.map((row) => Number(row.querySelector(".queue-size")?.textContent?.slice(1)));
      for (let i = 1; i < sizes.length; i += 1) {
        expect(sizes[i]!).toBeLessThanOrEqual(sizes[i - 1]!);
      }
      expect(q(root, "#detail").dataset.clusterId).toBe("0");
    } finally {
      handle.destroy();
      root.remove();
    }
  });

  it("a keyboard-only reviewer finishes the session; export and meter match the offline expectation", async () => {
    const root = document.createElement("div");
    document.body.append(root);
    const handle: AppHandle = startApp(root, new ReviewApi(base));
    try {
      await handle.whenIdle();

      const keystrokes: string[] = [];
      for (let step = 0; step < plan.clusters + 5; step += 1) {
        if (!q(root, "#completion").hidden) {
          break;
        }
        const detail = q(root, "#detail");
        const clusterId = detail.dataset.clusterId;
        expect(clusterId).toBeDefined();
        const truth = plan.truths[clusterId!];
        expect(truth).toBeDefined();

        const shown = q(root, "#modal-word").textContent;
        if (shown === truth) {
          keystrokes.push("Enter");
          press("Enter");
        } else {
          const offered = root.querySelector<HTMLElement>(
            `#suggestion-list li[data-word="${truth}"]`,
          );
          if (offered) {
            const digit = offered.dataset.rank!;
            keystrokes.push(digit);
            press(digit);
          } else {
            const box = q<HTMLInputElement>(root, "#type-input");
            keystrokes.push("T");
            press("t");
            expect(document.activeElement).toBe(box);
            box.value = truth!;
            box.dispatchEvent(new Event("input", { bubbles: true }));
            keystrokes.push("Enter");
            press("Enter", box);
          }
        }
        await handle.whenIdle();
        expect(q(root, "#inline-error").hidden).toBe(true);
        expect(q(root, "#retry-banner").hidden).toBe(true);
      }

      // Session complete, entirely via keys.
      expect(q(root, "#completion").hidden).toBe(false);
      expect(keystrokes.length).toBeGreaterThanOrEqual(plan.clusters);
      const snapshot = await new ReviewApi(base).session();
      expect(snapshot.clusters_pending).toBe(0);
      expect(snapshot.clusters_resolved).toBe(plan.clusters);

      // The meter shows exactly what the server-side action log prices to.
      const logLines = (await readFile(path.join(workDir, "actions.jsonl"), "utf-8"))
        .split("\n")
        .filter((line) => line.trim().length > 0);
      expect(logLines).toHaveLength(plan.clusters);
      let priced = 0;
      const kinds = { verify: 0, select: 0, type: 0 };
      for (const line of logLines) {
        const record = JSON.parse(line) as { kind: "verify" | "select" | "type" };
        kinds[record.kind] += 1;
        priced +=
          record.kind === "verify"
            ? VERIFY_SECONDS
            : record.kind === "select"
              ? SELECT_SECONDS
              : TYPE_SECONDS;
      }
      const meter = Number(q(root, "#final-cost").dataset.seconds);
      expect(meter).toBe(priced);
      expect(meter).toBe(expectedCost.absolute_seconds);
      expect(kinds.type).toBe(expectedCost.v_t);
      expect(kinds.select).toBe(expectedCost.v_d);
      expect(kinds.verify).toBe(expectedCost.v_v);

      // The export equals the offline perfect-reviewer output byte for byte.
      const res = await fetch(`${base}/api/export`);
      expect(res.ok).toBe(true);
      const exported = await res.text();
      expect(exported).toBe(expectedCorrected);
    } finally {
      handle.destroy();
      root.remove();
    }
  });
});
