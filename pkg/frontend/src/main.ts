/** Bootstrap: pick a condition, create (or resume) the session, run it.
 *
 * Query parameters: observer, condition, seed, n, training, break.
 * Without observer/condition a small start form is shown listing the
 * service's datasets.
 */

import { StudyApi } from "./api.js";
import { SessionRunner } from "./session.js";
import { DomView } from "./view.js";

const api = new StudyApi("");

function byId<T extends HTMLElement>(id: string): T {
  return document.getElementById(id) as T;
}

function acquireTabLease(sessionId: string): boolean {
  // one active tab per session: the holder refreshes a heartbeat; a second
  // tab sees a fresh heartbeat and backs off
  const key = `afc-lease-${sessionId}`;
  const now = Date.now();
  const existing = localStorage.getItem(key);
  if (existing && now - Number(existing) < 5000) return false;
  localStorage.setItem(key, String(now));
  setInterval(() => localStorage.setItem(key, String(Date.now())), 2000);
  return true;
}

async function runSession(observer: string, condition: string, seed: number,
                          training: boolean, n: number | undefined,
                          breakEvery: number): Promise<void> {
  const session = await api.createSession(observer, condition, seed, training, n);
  if (!acquireTabLease(session.session_id)) {
    byId("status").textContent =
      "this session is already running in another tab; close it first";
    return;
  }
  byId("start-panel").hidden = true;
  const view = new DomView();
  const runner = new SessionRunner(api, session.session_id, session.training, view,
                                   { breakEvery });
  view.bindChoice((side) => {
    void runner.choose(side);
  });
  await runner.start();
}

async function showStartForm(): Promise<void> {
  const panel = byId("start-panel");
  panel.hidden = false;
  const select = byId<HTMLSelectElement>("condition-select");
  const { datasets } = await api.listDatasets();
  for (const ds of datasets) {
    const option = document.createElement("option");
    option.value = ds.condition;
    option.textContent = `${ds.condition} (${ds.n_pairs} pairs)`;
    select.appendChild(option);
  }
  byId<HTMLButtonElement>("start-button").addEventListener("click", () => {
    const observer = byId<HTMLInputElement>("observer-input").value.trim();
    const seed = Number(byId<HTMLInputElement>("seed-input").value) || 0;
    const training = byId<HTMLInputElement>("training-input").checked;
    if (!observer || !select.value) {
      byId("status").textContent = "enter an observer id and pick a condition";
      return;
    }
    void runSession(observer, select.value, seed, training, undefined, 50).catch(
      (err) => {
        byId("status").textContent = String(err);
      },
    );
  });
}

export async function boot(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const observer = params.get("observer");
  const condition = params.get("condition");
  if (observer && condition) {
    const seed = Number(params.get("seed") ?? "0");
    const training = params.get("training") === "1";
    const n = params.get("n") ? Number(params.get("n")) : undefined;
    const breakEvery = Number(params.get("break") ?? "50");
    await runSession(observer, condition, seed, training, n, breakEvery);
  } else {
    await showStartForm();
  }
}

void boot().catch((err) => {
  const status = document.getElementById("status");
  if (status) status.textContent = String(err);
});
