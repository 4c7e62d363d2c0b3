/** DOM renderer for the three-panel trial layout. */

import { ScorePayload } from "./api.js";
import { SessionView, TrialViewState } from "./session.js";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

export class DomView implements SessionView {
  private leftImg = byId<HTMLImageElement>("left-image");
  private rightImg = byId<HTMLImageElement>("right-image");
  private signalImg = byId<HTMLImageElement>("signal-image");
  private progress = byId<HTMLElement>("progress");
  private status = byId<HTMLElement>("status");
  private trialPanel = byId<HTMLElement>("trial-panel");
  private breakPanel = byId<HTMLElement>("break-panel");
  private scorePanel = byId<HTMLElement>("score-panel");
  private scoreValue = byId<HTMLElement>("score-value");
  private scoreDetail = byId<HTMLElement>("score-detail");
  private feedback = byId<HTMLElement>("feedback");
  private leftButton = byId<HTMLButtonElement>("choose-left");
  private rightButton = byId<HTMLButtonElement>("choose-right");
  private resumeButton = byId<HTMLButtonElement>("resume");

  constructor(private feedbackMs = 450) {}

  bindChoice(handler: (side: "left" | "right") => void): void {
    this.leftButton.addEventListener("click", () => handler("left"));
    this.rightButton.addEventListener("click", () => handler("right"));
    document.addEventListener("keydown", (event) => {
      if (event.key === "ArrowLeft") handler("left");
      if (event.key === "ArrowRight") handler("right");
    });
  }

  private show(panel: HTMLElement): void {
    for (const el of [this.trialPanel, this.breakPanel, this.scorePanel]) {
      el.hidden = el !== panel;
    }
  }

  showTrial(state: TrialViewState): void {
    this.leftImg.src = state.leftUrl;
    this.rightImg.src = state.rightUrl;
    this.signalImg.src = state.signalUrl;
    this.progress.textContent = `Trial ${state.index + 1} / ${state.total}`;
    this.feedback.textContent = "";
    this.status.textContent = "";
    this.show(this.trialPanel);
  }

  showBreak(resume: () => void): void {
    this.show(this.breakPanel);
    const once = () => {
      this.resumeButton.removeEventListener("click", once);
      resume();
    };
    this.resumeButton.addEventListener("click", once);
  }

  showScore(scoreText: string, score: ScorePayload): void {
    this.scoreValue.textContent = scoreText;
    this.scoreDetail.textContent =
      `${score.n_correct} of ${score.n_trials} trials correct — ${score.condition}`;
    this.show(this.scorePanel);
  }

  showFeedback(correct: boolean): Promise<void> {
    this.feedback.textContent = correct ? "correct" : "incorrect";
    this.feedback.className = correct ? "good" : "bad";
    return new Promise((resolve) => setTimeout(resolve, this.feedbackMs));
  }

  setControlsEnabled(enabled: boolean): void {
    this.leftButton.disabled = !enabled;
    this.rightButton.disabled = !enabled;
  }

  showStatus(message: string): void {
    this.status.textContent = message;
  }

  preloadImages(urls: string[]): void {
    for (const url of urls) {
      const img = new Image();
      img.src = url;
    }
  }
}
