/**
 * Victim-interaction loop against a live control service on a locked
 * 20-file corpus: the note state shows files_locked = 20, a wrong key
 * yields the wrong-key message with no filesystem change, the correct key
 * drives progress to 100% and phase = restored, and the event feed order
 * equals the server's seq order.
 *
 * The sandbox is built with the real CLI and the service is the real
 * process; the test drives the same state/api modules the page runs.
 */

import { generateKeyPairSync } from "node:crypto";
import { mkdtempSync, readdirSync, readFileSync, rmSync, statSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { spawn, spawnSync, type ChildProcess } from "node:child_process";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { fetchEvents, fetchStatus, submitKey } from "../src/api.js";
import {
  applyEvents,
  applyStatus,
  applyUnlockOutcome,
  beginSubmit,
  canSubmit,
  initialState,
  type UiState,
} from "../src/state.js";

const PORT = 20000 + Math.floor(Math.random() * 20000);
const BASE = `http://127.0.0.1:${PORT}`;

let lab: string;
let server: ChildProcess | null = null;

function cli(...args: string[]): void {
  const result = spawnSync("ransim", args, { encoding: "utf-8" });
  if (result.status !== 0) {
    throw new Error(
      `ransim ${args.join(" ")} failed (${result.status}): ${result.stderr}`,
    );
  }
}

function walkFiles(dir: string): string[] {
  const out: string[] = [];
  for (const name of readdirSync(dir)) {
    const p = join(dir, name);
    if (statSync(p, { throwIfNoEntry: false })?.isDirectory()) {
      out.push(...walkFiles(p));
    } else {
      out.push(p);
    }
  }
  return out;
}

function lockedCount(): number {
  return walkFiles(lab).filter((p) => p.endsWith(".locked")).length;
}

async function waitForService(timeoutMs = 30000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      await fetchStatus(BASE);
      return;
    } catch {
      await new Promise((r) => setTimeout(r, 200));
    }
  }
  throw new Error("control service did not come up");
}

beforeAll(async () => {
  lab = mkdtempSync(join(tmpdir(), "ransim-e2e-"));
  cli("init-sandbox", "--sandbox", lab);
  cli(
    "seed-corpus", "--sandbox", lab,
    "--files", "20", "--total-bytes", "2MB", "--seed", "42",
  );
  cli("keygen", "--sandbox", lab);
  cli("encrypt", "--sandbox", lab);
  expect(lockedCount()).toBe(20);

  server = spawn(
    "ransim",
    ["serve", "--sandbox", lab, "--port", String(PORT)],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  await waitForService();
});

afterAll(() => {
  server?.kill("SIGTERM");
  if (lab) rmSync(lab, { recursive: true, force: true });
});

describe("victim-interaction loop", () => {
  it("locked corpus: the note state shows files_locked = 20", async () => {
    let state = applyStatus(initialState(), await fetchStatus(BASE));
    state = applyEvents(state, await fetchEvents(state.lastSeq, BASE));
    expect(state.phase).toBe("locked");
    expect(state.filesLocked).toBe(20);
    expect(state.noteText).toContain("SIMULATION");
    expect(state.noteText).toContain("20 files");
    expect(canSubmit(state)).toBe(true);
  });

  it("wrong key: wrong-key message, input cleared, no filesystem change", async () => {
    const before = lockedCount();
    const wrongPem = generateKeyPairSync("rsa", { modulusLength: 2048 })
      .privateKey.export({ type: "pkcs8", format: "pem" }) as string;

    let state = applyStatus(initialState(), await fetchStatus(BASE));
    state = beginSubmit(state);
    const outcome = await submitKey(wrongPem, BASE);
    const applied = applyUnlockOutcome(state, outcome);

    expect(outcome.kind).toBe("wrong_key");
    expect(applied.state.keyMessage).toMatch(/wrong key/i);
    expect(applied.clearKeyInput).toBe(true);
    expect(lockedCount()).toBe(before);
    const snap = await fetchStatus(BASE);
    expect(snap.phase).toBe("locked");
  });

  it("correct key: progress reaches 100%, phase restored, feed equals server order", async () => {
    const pem = readFileSync(join(lab, "key.pem"), "utf-8");

    let state: UiState = applyStatus(initialState(), await fetchStatus(BASE));
    state = applyEvents(state, await fetchEvents(state.lastSeq, BASE));
    state = beginSubmit(state);
    const outcome = await submitKey(pem, BASE);
    expect(outcome.kind).toBe("accepted");
    state = applyUnlockOutcome(state, outcome).state;
    expect(state.phase).toBe("decrypting");

    const progressSamples: number[] = [];
    const deadline = Date.now() + 60000;
    while (Date.now() < deadline) {
      state = applyStatus(state, await fetchStatus(BASE));
      state = applyEvents(state, await fetchEvents(state.lastSeq, BASE));
      progressSamples.push(state.progress);
      if (state.phase === "restored") break;
      await new Promise((r) => setTimeout(r, 50));
    }

    expect(state.phase).toBe("restored");
    expect(state.progress).toBe(1);
    expect(state.filesLocked).toBe(0);
    for (let i = 1; i < progressSamples.length; i++) {
      expect(progressSamples[i]).toBeGreaterThanOrEqual(progressSamples[i - 1]);
    }

    // filesystem actually restored
    expect(lockedCount()).toBe(0);
    const index = JSON.parse(
      readFileSync(join(lab, "corpus_index.json"), "utf-8"),
    ) as { files: { relative_path: string; whitelisted: boolean }[] };
    for (const f of index.files) {
      expect(statSync(join(lab, f.relative_path)).isFile()).toBe(true);
    }

    // event feed order equals server seq order
    const server_events = await fetchEvents(0, BASE);
    const serverSeqs = server_events.map((e) => e.seq);
    const sorted = [...serverSeqs].sort((a, b) => a - b);
    expect(serverSeqs).toEqual(sorted);
    const feedSeqs = state.events.map((e) => e.seq);
    expect(feedSeqs).toEqual(serverSeqs.slice(-feedSeqs.length));
    const restoredEvents = server_events.filter(
      (e) => e.kind === "file_restored",
    );
    expect(restoredEvents.length).toBe(20);
  });
});
