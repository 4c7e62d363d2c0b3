/** Typed client for the observer-study HTTP service. */

export interface DatasetInfo {
  condition: string;
  n_pairs: number;
  patch: number | null;
}

export interface SessionInfo {
  session_id: string;
  total: number;
  answered: number;
  training: boolean;
  condition: string;
}

export interface TrialPayload {
  complete: false;
  trial_id: string;
  index: number;
  total: number;
  left_image_url: string;
  right_image_url: string;
  signal_ref_url: string;
}

export interface CompletePayload {
  complete: true;
  index: number;
  total: number;
}

export interface ResponseAck {
  accepted: boolean;
  next_exists: boolean;
  correct?: boolean; // present only for training-mode sessions
}

export interface ScorePayload {
  session_id: string;
  observer: string;
  condition: string;
  percent_correct: number;
  n_trials: number;
  n_correct: number;
  complete: boolean;
}

export type Side = "left" | "right";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(url, init);
  const text = await resp.text();
  let doc: unknown = null;
  try {
    doc = text ? JSON.parse(text) : null;
  } catch {
    throw new ApiError(resp.status, `non-JSON response from ${url}`);
  }
  if (!resp.ok) {
    const message =
      doc && typeof doc === "object" && "error" in (doc as Record<string, unknown>)
        ? String((doc as Record<string, unknown>).error)
        : `HTTP ${resp.status}`;
    throw new ApiError(resp.status, message);
  }
  return doc as T;
}

export class StudyApi {
  constructor(private base: string = "") {}

  listDatasets(): Promise<{ datasets: DatasetInfo[] }> {
    return request(`${this.base}/datasets`);
  }

  createSession(
    observer: string,
    condition: string,
    seed: number,
    training: boolean,
    n?: number,
  ): Promise<SessionInfo> {
    const body: Record<string, unknown> = { observer, condition, seed, training };
    if (n !== undefined) body.n = n;
    return request(`${this.base}/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  currentTrial(sessionId: string): Promise<TrialPayload | CompletePayload> {
    return request(`${this.base}/sessions/${sessionId}/current`);
  }

  submitResponse(
    sessionId: string,
    trialId: string,
    side: Side,
    latencyMs: number,
  ): Promise<ResponseAck> {
    return request(`${this.base}/sessions/${sessionId}/response`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ trial_id: trialId, chosen_side: side, latency_ms: latencyMs }),
    });
  }

  score(sessionId: string): Promise<ScorePayload> {
    return request(`${this.base}/sessions/${sessionId}/score`);
  }
}
