"""Two-alternative forced-choice studies: trials, sessions, scoring.

Sessions are durable: the trial list is written once at creation and
every response is appended to a JSON-lines log and fsynced before it is
acknowledged, so replaying the log reconstructs the session exactly.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ParameterError, SessionStateError
from .metrics import format_mean_std
from .signals import AFCImageSet, _image_id


@dataclass(frozen=True)
class Trial:
    trial_id: str
    condition: str
    signal_ref: str  # image id carrying the lesion
    background_ref: str  # image id shown on the other side
    signal_side: str  # "left" | "right"
    template_ref: str = "template"

    def side_refs(self) -> dict[str, str]:
        if self.signal_side == "left":
            return {"left": self.signal_ref, "right": self.background_ref}
        return {"left": self.background_ref, "right": self.signal_ref}


@dataclass(frozen=True)
class Response:
    trial_id: str
    chosen_side: str
    correct: bool
    latency_ms: float = 0.0
    timestamp: float = 0.0


@dataclass
class Session:
    session_id: str
    observer: str
    condition: str
    seed: int
    trials: list[Trial]
    training: bool = False
    dataset_digest: str = ""
    responses: list[Response] = field(default_factory=list)

    @property
    def total(self) -> int:
        return len(self.trials)

    @property
    def answered(self) -> int:
        return len(self.responses)

    @property
    def complete(self) -> bool:
        return self.answered >= self.total

    @property
    def state(self) -> str:
        return "complete" if self.complete else "active"

    def current_trial(self) -> Trial:
        if self.complete:
            raise SessionStateError(f"session {self.session_id} is complete")
        return self.trials[self.answered]


@dataclass
class SessionScore:
    percent_correct: float
    n_trials: int
    n_correct: int


def dataset_digest(manifest_bytes: bytes) -> str:
    return hashlib.sha256(manifest_bytes).hexdigest()


def generate_trials(image_set: AFCImageSet, n: int = 200, seed: int = 0,
                    condition: str | None = None) -> list[Trial]:
    """Deterministic trial list: n pairs, exactly balanced sides.

    Trial i shows the signal image of pair ``p_i`` against the background
    image of a *different* pair (variable background), with the side
    assignment an exactly balanced, seeded shuffle.
    """
    return generate_trials_for(image_set.condition if condition is None else condition,
                               image_set.n_pairs, n=n, seed=seed)


def generate_trials_for(condition: str, n_pairs: int, n: int = 200,
                        seed: int = 0) -> list[Trial]:
    """Trial generation from pair count alone (image ids are derived)."""
    if n > n_pairs:
        raise DataError(f"need at least {n} image pairs, dataset has {n_pairs}")
    if n < 2:
        raise ParameterError(f"a session needs at least 2 trials, got {n}")
    rng = np.random.default_rng(seed)

    order = rng.permutation(n_pairs)[:n]
    backgrounds = _derangement(order, rng)
    sides = np.array(["left"] * (n // 2) + ["right"] * (n - n // 2))
    rng.shuffle(sides)

    trials = []
    for i in range(n):
        trials.append(
            Trial(
                trial_id=f"t{i:04d}",
                condition=condition,
                signal_ref=_image_id(condition, "signal", int(order[i])),
                background_ref=_image_id(condition, "background", int(backgrounds[i])),
                signal_side=str(sides[i]),
            )
        )
    return trials


def _derangement(order: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Background pair indices, drawn without replacement, never equal to
    the signal pair at the same position."""
    for _ in range(1000):
        perm = rng.permutation(order)
        if not np.any(perm == order):
            return perm
    # fall back: fix collisions by cyclic swap (only reachable for tiny n)
    perm = np.roll(order, 1)
    return perm


# -- persistence ------------------------------------------------------------------


class SessionStore:
    """One directory per session: session.json (static) + responses.jsonl (append-only)."""

    def __init__(self, root):
        self.root = str(root)
        os.makedirs(self.root, exist_ok=True)

    def _dir(self, session_id: str) -> str:
        return os.path.join(self.root, session_id)

    def create(self, observer: str, condition: str, seed: int, trials: list[Trial],
               training: bool = False, digest: str = "",
               metadata: dict | None = None) -> Session:
        session_id = f"{observer}-{condition}-s{seed}"
        sdir = self._dir(session_id)
        if os.path.exists(os.path.join(sdir, "session.json")):
            return self.load(session_id)
        os.makedirs(sdir, exist_ok=True)
        doc = {
            "session_id": session_id,
            "observer": observer,
            "condition": condition,
            "seed": seed,
            "training": training,
            "dataset_digest": digest,
            "metadata": metadata or {},
            "trials": [
                {
                    "trial_id": t.trial_id,
                    "condition": t.condition,
                    "signal_ref": t.signal_ref,
                    "background_ref": t.background_ref,
                    "signal_side": t.signal_side,
                    "template_ref": t.template_ref,
                }
                for t in trials
            ],
        }
        with open(os.path.join(sdir, "session.json"), "w") as fh:
            json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
            fh.write("\n")
        return Session(
            session_id=session_id, observer=observer, condition=condition, seed=seed,
            trials=trials, training=training, dataset_digest=digest,
        )

    def load(self, session_id: str) -> Session:
        sdir = self._dir(session_id)
        with open(os.path.join(sdir, "session.json")) as fh:
            doc = json.load(fh)
        trials = [
            Trial(
                trial_id=t["trial_id"], condition=t["condition"],
                signal_ref=t["signal_ref"], background_ref=t["background_ref"],
                signal_side=t["signal_side"], template_ref=t.get("template_ref", "template"),
            )
            for t in doc["trials"]
        ]
        session = Session(
            session_id=doc["session_id"], observer=doc["observer"],
            condition=doc["condition"], seed=doc["seed"], trials=trials,
            training=doc.get("training", False), dataset_digest=doc.get("dataset_digest", ""),
        )
        log = os.path.join(sdir, "responses.jsonl")
        if os.path.exists(log):
            with open(log) as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    rec = json.loads(line)
                    session.responses.append(
                        Response(
                            trial_id=rec["trial_id"], chosen_side=rec["chosen_side"],
                            correct=rec["correct"], latency_ms=rec.get("latency_ms", 0.0),
                            timestamp=rec.get("timestamp", 0.0),
                        )
                    )
        return session

    def list_sessions(self) -> list[str]:
        if not os.path.isdir(self.root):
            return []
        return sorted(
            d for d in os.listdir(self.root)
            if os.path.exists(os.path.join(self.root, d, "session.json"))
        )

    def append_response(self, session: Session, response: Response) -> None:
        """Durably persist one response before the caller acknowledges it."""
        path = os.path.join(self._dir(session.session_id), "responses.jsonl")
        record = {
            "trial_id": response.trial_id,
            "chosen_side": response.chosen_side,
            "correct": response.correct,
            "latency_ms": response.latency_ms,
            "timestamp": response.timestamp,
        }
        with open(path, "a") as fh:
            fh.write(json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n")
            fh.flush()
            os.fsync(fh.fileno())


def record_response(session: Session, chosen_side: str, store: SessionStore | None = None,
                    trial_id: str | None = None, latency_ms: float = 0.0,
                    timestamp: float = 0.0) -> Response:
    """Answer the session's current trial.

    Correctness is computed here (never by the client).  Responses to a
    complete session, or a duplicate response to an already-answered
    trial, are rejected and the original record stands.
    """
    if chosen_side not in ("left", "right"):
        raise ParameterError(f"chosen_side must be 'left' or 'right', got {chosen_side!r}")
    if session.complete:
        raise SessionStateError(f"session {session.session_id} is already complete")
    trial = session.current_trial()
    if trial_id is not None and trial_id != trial.trial_id:
        answered = {r.trial_id for r in session.responses}
        if trial_id in answered:
            raise SessionStateError(f"trial {trial_id} already has a recorded response")
        raise SessionStateError(
            f"response targets trial {trial_id}, but the current trial is {trial.trial_id}"
        )
    response = Response(
        trial_id=trial.trial_id,
        chosen_side=chosen_side,
        correct=chosen_side == trial.signal_side,
        latency_ms=latency_ms,
        timestamp=timestamp,
    )
    if store is not None:
        store.append_response(session, response)
    session.responses.append(response)
    return response


def score_session(session: Session) -> SessionScore:
    """Percent correct over the answered trials."""
    n = session.answered
    if n == 0:
        raise SessionStateError("cannot score a session with no responses")
    n_correct = sum(1 for r in session.responses if r.correct)
    return SessionScore(percent_correct=100.0 * n_correct / n, n_trials=n,
                        n_correct=n_correct)


def aggregate_observers(scores: dict[str, float]) -> tuple[float, float | None, str]:
    """Mean and sample std of per-observer percent-correct values.

    Returns (mean, std, rendered "mean/std" cell); std is None for a
    single observer.
    """
    if len(scores) < 1:
        raise DataError("need at least one observer score")
    values = np.asarray(list(scores.values()), dtype=np.float64)
    mean = float(values.mean())
    std = float(values.std(ddof=1)) if values.size >= 2 else None
    return mean, std, format_mean_std(mean, std)


# -- synthetic observer ------------------------------------------------------------


def synthetic_observer(left: np.ndarray, right: np.ndarray, template: np.ndarray,
                       rng: np.random.Generator) -> str:
    """Matched-filter chooser: zero-mean template correlation per side.

    The template is the known signal rendering at image size; the side
    with the larger correlation wins, ties break by a seeded coin flip.
    """
    left = np.asarray(left, dtype=np.float64)
    right = np.asarray(right, dtype=np.float64)
    template = np.asarray(template, dtype=np.float64)
    if left.shape != template.shape or right.shape != template.shape:
        raise DataError(
            f"template {template.shape} must match image shapes {left.shape}/{right.shape}"
        )
    t = template - template.mean()
    score_left = float(np.sum(t * (left - left.mean())))
    score_right = float(np.sum(t * (right - right.mean())))
    if score_left == score_right:
        return "left" if rng.random() < 0.5 else "right"
    return "left" if score_left > score_right else "right"


def run_synthetic_session(image_set: AFCImageSet, n: int = 200, seed: int = 0,
                          observer: str = "matched-filter",
                          store: SessionStore | None = None) -> Session:
    """Drive a full session with the matched-filter observer."""
    trials = generate_trials(image_set, n=n, seed=seed)
    lookup = {}
    for i in range(image_set.n_pairs):
        lookup[_image_id(image_set.condition, "background", i)] = image_set.backgrounds[i]
        lookup[_image_id(image_set.condition, "signal", i)] = image_set.signals[i]
    rng = np.random.default_rng(seed + 1)

    if store is not None:
        session = store.create(observer, image_set.condition, seed, trials)
    else:
        session = Session(
            session_id=f"{observer}-{image_set.condition}-s{seed}", observer=observer,
            condition=image_set.condition, seed=seed, trials=trials,
        )
    while not session.complete:
        trial = session.current_trial()
        refs = trial.side_refs()
        choice = synthetic_observer(
            lookup[refs["left"]], lookup[refs["right"]], image_set.template, rng
        )
        record_response(session, choice, store=store)
    return session
