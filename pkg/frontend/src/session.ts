/** Session state machine: drives trials against the service, independent of
 * the DOM so it can be tested with a stub view.
 *
 * Invariants it maintains:
 *  - one response per trial, controls locked from submission until the next
 *    trial is on screen;
 *  - correctness is never computed here (the service owns it; the optional
 *    training-mode flag is display-only);
 *  - the final score text is exactly the service's value, stringified.
 */

import { ApiError, ScorePayload, Side, StudyApi, TrialPayload } from "./api.js";

export interface TrialViewState {
  trialId: string;
  index: number;
  total: number;
  leftUrl: string;
  rightUrl: string;
  signalUrl: string;
}

export interface SessionView {
  showTrial(state: TrialViewState): void;
  showBreak(resume: () => void): void;
  showScore(scoreText: string, score: ScorePayload): void;
  showFeedback(correct: boolean): Promise<void>;
  setControlsEnabled(enabled: boolean): void;
  showStatus(message: string): void;
  preloadImages(urls: string[]): void;
}

export interface RunnerOptions {
  breakEvery?: number; // trials between rest screens; 0 disables
  maxRetries?: number;
  retryDelayMs?: number;
  now?: () => number;
}

export function formatScore(score: ScorePayload): string {
  return String(score.percent_correct);
}

export class SessionRunner {
  private accepting = false;
  private current: TrialViewState | null = null;
  private shownAt = 0;
  private readonly breakEvery: number;
  private readonly maxRetries: number;
  private readonly retryDelayMs: number;
  private readonly now: () => number;
  finished = false;

  constructor(
    private api: StudyApi,
    private sessionId: string,
    private training: boolean,
    private view: SessionView,
    options: RunnerOptions = {},
  ) {
    this.breakEvery = options.breakEvery ?? 50;
    this.maxRetries = options.maxRetries ?? 3;
    this.retryDelayMs = options.retryDelayMs ?? 500;
    this.now = options.now ?? (() => Date.now());
  }

  async start(): Promise<void> {
    await this.advance();
  }

  /** Arrow-key or click choice; ignored while controls are locked. */
  async choose(side: Side): Promise<void> {
    if (!this.accepting || this.current === null) return;
    this.accepting = false;
    this.view.setControlsEnabled(false);
    const trial = this.current;
    const latency = this.now() - this.shownAt;

    let ack;
    try {
      ack = await this.withRetries(() =>
        this.api.submitResponse(this.sessionId, trial.trialId, side, latency),
      );
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // lost a race (duplicate tab, replay): resync with the service
        await this.advance();
        return;
      }
      throw err;
    }

    if (this.training && ack.correct !== undefined) {
      await this.view.showFeedback(ack.correct);
    }
    const answered = trial.index + 1;
    if (ack.next_exists && this.breakEvery > 0 && answered % this.breakEvery === 0) {
      await new Promise<void>((resolve) => this.view.showBreak(resolve));
    }
    await this.advance();
  }

  private async advance(): Promise<void> {
    const payload = await this.withRetries(() => this.api.currentTrial(this.sessionId));
    if (payload.complete) {
      const score = await this.withRetries(() => this.api.score(this.sessionId));
      this.finished = true;
      this.current = null;
      this.view.showScore(formatScore(score), score);
      return;
    }
    const trial = payload as TrialPayload;
    const state: TrialViewState = {
      trialId: trial.trial_id,
      index: trial.index,
      total: trial.total,
      leftUrl: trial.left_image_url,
      rightUrl: trial.right_image_url,
      signalUrl: trial.signal_ref_url,
    };
    this.view.preloadImages([state.leftUrl, state.rightUrl]);
    this.current = state;
    this.view.showTrial(state);
    this.shownAt = this.now();
    this.accepting = true;
    this.view.setControlsEnabled(true);
  }

  private async withRetries<T>(call: () => Promise<T>): Promise<T> {
    let lastError: unknown;
    for (let attempt = 0; attempt <= this.maxRetries; attempt++) {
      try {
        return await call();
      } catch (err) {
        if (err instanceof ApiError && err.status >= 400 && err.status < 500) {
          throw err; // the request itself is wrong; retrying cannot help
        }
        lastError = err;
        this.view.showStatus(`connection problem, retrying (${attempt + 1})`);
        await new Promise((resolve) => setTimeout(resolve, this.retryDelayMs));
      }
    }
    throw lastError;
  }
}
