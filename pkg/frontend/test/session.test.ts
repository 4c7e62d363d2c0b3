/** Unit tests for the session state machine with a scripted service stub. */

import { describe, expect, it } from "vitest";
import {
  CompletePayload,
  ResponseAck,
  ScorePayload,
  Side,
  StudyApi,
  TrialPayload,
} from "../src/api.js";
import { formatScore, SessionRunner, SessionView, TrialViewState } from "../src/session.js";

interface Recorded {
  kind: string;
  detail?: unknown;
}

class StubView implements SessionView {
  events: Recorded[] = [];
  controlsEnabled = false;
  lastScoreText = "";
  breakResume: (() => void) | null = null;

  showTrial(state: TrialViewState): void {
    this.events.push({ kind: "trial", detail: state.trialId });
  }
  showBreak(resume: () => void): void {
    this.events.push({ kind: "break" });
    this.breakResume = resume;
  }
  showScore(scoreText: string): void {
    this.events.push({ kind: "score", detail: scoreText });
    this.lastScoreText = scoreText;
  }
  showFeedback(correct: boolean): Promise<void> {
    this.events.push({ kind: "feedback", detail: correct });
    return Promise.resolve();
  }
  setControlsEnabled(enabled: boolean): void {
    this.controlsEnabled = enabled;
    this.events.push({ kind: enabled ? "unlock" : "lock" });
  }
  showStatus(): void {}
  preloadImages(urls: string[]): void {
    this.events.push({ kind: "preload", detail: urls });
  }
}

interface StubOptions {
  total?: number;
  training?: boolean;
  failuresBeforeSuccess?: number;
}

/** Server-side bookkeeping double: serves trials, records responses in
 * order, never exposes which side carries the signal. */
class StubService {
  submitted: { trialId: string; side: Side }[] = [];
  private answered = 0;
  private failures: number;
  readonly total: number;
  readonly training: boolean;

  constructor(options: StubOptions = {}) {
    this.total = options.total ?? 5;
    this.training = options.training ?? false;
    this.failures = options.failuresBeforeSuccess ?? 0;
  }

  api(): StudyApi {
    const stub = this;
    return {
      async currentTrial(): Promise<TrialPayload | CompletePayload> {
        if (stub.failures > 0) {
          stub.failures -= 1;
          throw new Error("connection reset");
        }
        if (stub.answered >= stub.total) {
          return { complete: true, index: stub.answered, total: stub.total };
        }
        const i = stub.answered;
        return {
          complete: false,
          trial_id: `t${String(i).padStart(4, "0")}`,
          index: i,
          total: stub.total,
          left_image_url: `/images/c/im${i}a.png`,
          right_image_url: `/images/c/im${i}b.png`,
          signal_ref_url: "/images/c/template.png",
        };
      },
      async submitResponse(_sid: string, trialId: string, side: Side): Promise<ResponseAck> {
        stub.submitted.push({ trialId, side });
        stub.answered += 1;
        const ack: ResponseAck = {
          accepted: true,
          next_exists: stub.answered < stub.total,
        };
        if (stub.training) ack.correct = side === "left"; // arbitrary server truth
        return ack;
      },
      async score(): Promise<ScorePayload> {
        return {
          session_id: "s",
          observer: "o",
          condition: "c",
          percent_correct: 62.5,
          n_trials: stub.answered,
          n_correct: Math.round(0.625 * stub.answered),
          complete: stub.answered >= stub.total,
        };
      },
    } as unknown as StudyApi;
  }
}

function makeRunner(service: StubService, view: StubView, breakEvery = 0) {
  return new SessionRunner(service.api(), "s", service.training, view, {
    breakEvery,
    retryDelayMs: 1,
    now: () => 1000,
  });
}

describe("SessionRunner", () => {
  it("submits every response in order and ends on the score screen", async () => {
    const service = new StubService({ total: 5 });
    const view = new StubView();
    const runner = makeRunner(service, view);
    await runner.start();
    for (let i = 0; i < 5; i++) {
      await runner.choose(i % 2 === 0 ? "left" : "right");
    }
    expect(service.submitted.map((s) => s.trialId)).toEqual([
      "t0000", "t0001", "t0002", "t0003", "t0004",
    ]);
    expect(runner.finished).toBe(true);
    expect(view.lastScoreText).toBe("62.5");
  });

  it("never computes correctness: score text is the service value verbatim", () => {
    const score: ScorePayload = {
      session_id: "s", observer: "o", condition: "c",
      percent_correct: 87.33333333333333, n_trials: 30, n_correct: 26, complete: true,
    };
    expect(formatScore(score)).toBe(String(87.33333333333333));
  });

  it("locks controls from submission until the next trial renders", async () => {
    const service = new StubService({ total: 2 });
    const view = new StubView();
    const runner = makeRunner(service, view);
    await runner.start();
    await runner.choose("left");
    const kinds = view.events.map((e) => e.kind);
    const lock = kinds.indexOf("lock", kinds.indexOf("trial"));
    const nextTrial = kinds.indexOf("trial", lock);
    const unlock = kinds.indexOf("unlock", lock);
    expect(lock).toBeGreaterThan(-1);
    expect(nextTrial).toBeGreaterThan(lock);
    expect(unlock).toBeGreaterThan(nextTrial);
  });

  it("ignores choices while a submission is in flight", async () => {
    const service = new StubService({ total: 3 });
    const view = new StubView();
    const runner = makeRunner(service, view);
    await runner.start();
    await Promise.all([runner.choose("left"), runner.choose("right")]);
    expect(service.submitted.length).toBe(1);
  });

  it("shows feedback only in training mode", async () => {
    for (const training of [false, true]) {
      const service = new StubService({ total: 1, training });
      const view = new StubView();
      const runner = makeRunner(service, view);
      await runner.start();
      await runner.choose("left");
      const feedback = view.events.filter((e) => e.kind === "feedback");
      expect(feedback.length).toBe(training ? 1 : 0);
    }
  });

  it("offers a break every N trials", async () => {
    const service = new StubService({ total: 4 });
    const view = new StubView();
    const runner = makeRunner(service, view, 2);
    await runner.start();
    await runner.choose("left");
    const pending = runner.choose("right"); // triggers the break at 2 answered
    await new Promise((r) => setTimeout(r, 5));
    expect(view.events.some((e) => e.kind === "break")).toBe(true);
    view.breakResume?.();
    await pending;
    await runner.choose("left");
    await runner.choose("right");
    expect(runner.finished).toBe(true);
  });

  it("preloads both side images for each trial", async () => {
    const service = new StubService({ total: 1 });
    const view = new StubView();
    const runner = makeRunner(service, view);
    await runner.start();
    const preloads = view.events.filter((e) => e.kind === "preload");
    expect(preloads.length).toBe(1);
    expect((preloads[0].detail as string[]).length).toBe(2);
  });

  it("retries transient network failures with state preserved", async () => {
    const service = new StubService({ total: 1, failuresBeforeSuccess: 2 });
    const view = new StubView();
    const runner = makeRunner(service, view);
    await runner.start();
    expect(view.events.some((e) => e.kind === "trial")).toBe(true);
    await runner.choose("right");
    expect(service.submitted.length).toBe(1);
    expect(runner.finished).toBe(true);
  });
});
