// Scripted end-to-end session against a live service process: answers ten
// queries through the real DOM, checks that each answer moves the queried
// parameter's posterior strip, that the recommendation view always equals
// the service's recommendation endpoint, and that undo restores the
// previous state fingerprint.

import { ChildProcess, spawn } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ServiceClient } from "../src/api.js";
import { mountApp, type AppHandles } from "../src/app.js";

const PORT = 8719;
const BASE = `http://127.0.0.1:${PORT}`;

let service: ChildProcess;
let app: AppHandles;

async function until<T>(fn: () => T | Promise<T>, timeoutMs = 60_000): Promise<T> {
  const start = Date.now();
  let lastErr: unknown = new Error("condition never truthy");
  while (Date.now() - start < timeoutMs) {
    try {
      const value = await fn();
      if (value) return value;
    } catch (err) {
      lastErr = err;
    }
    await new Promise((resolve) => setTimeout(resolve, 50));
  }
  throw lastErr;
}

function stripSignature(parameterKey: string): string | null {
  const row = document.querySelector<HTMLElement>(
    `.belief-row[data-parameter="${parameterKey}"]`,
  );
  if (!row) return null;
  return Array.from(row.querySelectorAll<HTMLElement>(".belief-band"))
    .map((b) => `${b.style.left}|${b.style.width}|${b.dataset.weight}`)
    .join(";");
}

function cardParameterKey(): string {
  const { card } = app.flow.current;
  if (!card || card.factor === undefined || !card.config) throw new Error("no pending card");
  return `${card.factor}:${Object.values(card.config).join(",")}`;
}

async function settled(): Promise<void> {
  await until(() => !app.flow.current.busy);
}

beforeAll(async () => {
  const dataDir = mkdtempSync(join(tmpdir(), "gaielicit-e2e-"));
  service = spawn(
    "python3",
    ["-m", "gaielicit.cli", "serve", "--listen", `127.0.0.1:${PORT}`, "--data-dir", dataDir],
    { cwd: join(__dirname, "..", ".."), stdio: "inherit" },
  );
  const probe = new ServiceClient(BASE);
  await until(async () => (await probe.health()).status === "ok");

  document.body.innerHTML = '<div id="app"></div>';
  app = mountApp(document.getElementById("app")!, BASE);
  await until(() =>
    document.querySelectorAll<HTMLOptionElement>("#problem-select option").length > 0,
  );
});

afterAll(() => {
  service?.kill("SIGTERM");
});

describe("scripted browser session", () => {
  it("runs ten answers with live strips, matching recommendations, and undo", async () => {
    const startButton = document.getElementById("start-button") as HTMLButtonElement;
    const fallback = document.getElementById("fallback-toggle") as HTMLInputElement;
    expect(fallback.checked).toBe(true);
    startButton.click();
    await until(() => app.flow.current.phase === "active" && app.flow.current.card !== null);
    const sessionId = app.flow.current.sessionId!;
    const client = new ServiceClient(BASE);

    for (let step = 0; step < 10; step++) {
      await until(() => app.flow.current.card !== null && !app.flow.current.busy);
      const key = cardParameterKey();
      const before = stripSignature(key);
      expect(before).not.toBeNull();

      const answer: "yes" | "no" = step % 3 === 2 ? "no" : "yes";
      if (step === 4) {
        // exercise the keyboard path once
        document.dispatchEvent(new KeyboardEvent("keydown", { key: answer === "yes" ? "y" : "n" }));
      } else {
        (document.getElementById(answer === "yes" ? "yes-button" : "no-button") as HTMLButtonElement).click();
      }
      await until(() => app.flow.current.queriesAnswered === step + 1);
      await settled();

      // the answered parameter's posterior strip must have changed
      const after = stripSignature(key);
      expect(after).not.toBeNull();
      expect(after).not.toBe(before);

      // the recommendation view mirrors the service's endpoint exactly
      const served = await client.recommendation(sessionId);
      const value = document.querySelector<HTMLElement>(".recommendation-value")!;
      expect(Number(value.dataset.value)).toBe(served.expected_utility);
      const chips = document.querySelectorAll<HTMLElement>(".recommendation-outcome .chip");
      const shown: Record<string, string> = {};
      for (const chip of chips) {
        shown[chip.dataset.attribute!] = chip.querySelector(".chip-value")!.textContent!;
      }
      expect(shown).toEqual(served.outcome);
      const counter = document.querySelector<HTMLElement>(".query-counter")!;
      expect(counter.dataset.count).toBe(String(step + 1));
    }

    // undo restores the previous state fingerprint
    const beforeUndo = await client.summary(sessionId);
    await until(() => app.flow.current.card !== null && !app.flow.current.busy);
    (document.getElementById("yes-button") as HTMLButtonElement).click();
    await until(() => app.flow.current.queriesAnswered === 11);
    await settled();
    const afterAnswer = await client.summary(sessionId);
    expect(afterAnswer.state_fingerprint).not.toBe(beforeUndo.state_fingerprint);
    (document.getElementById("undo-button") as HTMLButtonElement).click();
    await until(() => app.flow.current.queriesAnswered === 10);
    await settled();
    const afterUndo = await client.summary(sessionId);
    expect(afterUndo.state_fingerprint).toBe(beforeUndo.state_fingerprint);
    expect(afterUndo.recommendation).toEqual(beforeUndo.recommendation);
  });

  it("double-click double-submission leaves state consistent", async () => {
    await until(() => app.flow.current.card !== null && !app.flow.current.busy);
    const before = app.flow.current.queriesAnswered;
    const yes = document.getElementById("yes-button") as HTMLButtonElement;
    yes.click();
    yes.click(); // second click lands while busy and is ignored client-side
    await until(() => app.flow.current.queriesAnswered === before + 1);
    await settled();
    const client = new ServiceClient(BASE);
    const summary = await client.summary(app.flow.current.sessionId!);
    expect(summary.queries_answered).toBe(before + 1);
  });
});
