"""End-to-end synthetic pipeline checks.

One code path backs both the ``pipeline-smoke`` CLI command and the
acceptance suite: phantom slices are simulated, masked, reconstructed
(zero-filled and with small trained networks), scored with SSIM/NRMSE,
turned into observer-study image sets, and scored by the synthetic
matched-filter observer.  Every check returns a dict with a ``pass``
flag plus the numbers it looked at.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .afc import (
    SessionStore,
    generate_trials,
    record_response,
    run_synthetic_session,
    score_session,
)
from .errors import DataError
from .metrics import EvaluationSet, nrmse_set, round_half_up, ssim_set, write_metrics_csv
from .sampling import MaskSpec, build_network_input, make_mask, reference_recon
from .signals import SignalSpec, build_afc_dataset
from .synth import make_phantom_slices
from .training import TrainRun, train
from .unet import UNetConfig, UNetModel

# Frozen anchors: sampled column counts and effective factors for the
# canonical 320-column geometry with 16 low-frequency columns.
MASK_ANCHORS = {2: (168, 1.90), 3: (118, 2.71), 4: (92, 3.48), 5: (77, 4.16)}

AFC_CENTERS_64 = ((26, 26), (26, 38), (38, 26), (38, 38))


@dataclass(frozen=True)
class SmokeConfig:
    seed: int = 7
    shape: tuple[int, int] = (64, 64)
    coils: int = 3
    low_count: int = 8
    train_slices: int = 32
    eval_slices: int = 64
    epochs: int = 60
    lr: float = 3e-2
    afc_slices: int = 50
    afc_trials: int = 200
    amplitude_high: float = 14.0
    amplitude_mid: float = 5.0


def check_mask_fidelity() -> dict:
    """Sampled counts and 2-decimal effective factors for W=320, low=16."""
    rows = {}
    ok = True
    for k, (count, factor) in MASK_ANCHORS.items():
        mask = make_mask(MaskSpec(width=320, k=k, low_count=16))
        got = (mask.sampled_count, round_half_up(mask.effective_factor, 2))
        rows[f"{k}x"] = {"sampled": got[0], "effective": got[1]}
        ok = ok and got == (count, factor)
    return {"pass": ok, "factors": rows}


def check_nrmse_unit_cases() -> dict:
    """The closed-form normalization cases, exact to 1e-12."""
    y = np.array([[[3.0, 4.0]]])
    cases = {
        "identical": (nrmse_set(EvaluationSet(y, y.copy())), 0.0),
        "zero_recon": (nrmse_set(EvaluationSet(y, np.zeros_like(y))), 1.0),
        "three_four": (nrmse_set(EvaluationSet(y, np.array([[[3.0, 0.0]]]))), 0.8),
    }
    scale = nrmse_set(EvaluationSet(7.5 * y, 7.5 * np.array([[[3.0, 0.0]]])))
    ok = all(abs(got - want) <= 1e-12 for got, want in cases.values())
    ok = ok and abs(scale - 0.8) <= 1e-12
    return {"pass": bool(ok), "cases": {k: got for k, (got, _) in cases.items()},
            "scale_invariant": scale}


def check_degradation_ordering(cfg: SmokeConfig) -> dict:
    """Zero-filled quality degrades strictly with k; small trained networks
    beat zero-filled on both metrics at every undersampled k."""
    shape = cfg.shape
    train_data = make_phantom_slices(cfg.train_slices, shape, cfg.coils,
                                     seed=cfg.seed + 294, texture=0.1, support=0.45)
    eval_data = make_phantom_slices(cfg.eval_slices, shape, cfg.coils,
                                    seed=cfg.seed + 295, texture=0.1, support=0.45)
    train_refs = np.stack([reference_recon(s) for s in train_data])
    eval_refs = np.stack([reference_recon(s) for s in eval_data])

    zf_ssim, zf_nrmse, rows = [], [], []
    for k in (1, 2, 3, 4, 5):
        mask = make_mask(MaskSpec(width=shape[1], k=k, low_count=cfg.low_count))
        xe = np.stack([build_network_input(s, mask) for s in eval_data])
        es = EvaluationSet(eval_refs, xe)
        zf_ssim.append(ssim_set(es))
        zf_nrmse.append(nrmse_set(es))
        rows.append({"k": k, "label": "zero-filled", "ssim_mean": zf_ssim[-1],
                     "ssim_std": 0.0, "nrmse_mean": zf_nrmse[-1], "nrmse_std": 0.0})

    ordering_ok = all(zf_nrmse[i] < zf_nrmse[i + 1] for i in range(4)) and all(
        zf_ssim[i] > zf_ssim[i + 1] for i in range(4)
    )

    net_rows = []
    improved = {}
    for idx, k in enumerate((2, 3, 4, 5)):
        mask = make_mask(MaskSpec(width=shape[1], k=k, low_count=cfg.low_count))
        xt = np.stack([build_network_input(s, mask) for s in train_data])
        xe = np.stack([build_network_input(s, mask) for s in eval_data])
        model = UNetModel(
            UNetConfig(start_channels=8, depth=2, dropout_rate=0.1, loss_kind="mse"),
            seed=104 + cfg.seed + k,
        )
        train(model, xt, train_refs,
              run=TrainRun(epochs=cfg.epochs, batch_size=8, seed=204 + cfg.seed + k,
                           lr=cfg.lr, lr_decay="cosine"))
        recons = np.stack([model.predict(x) for x in xe])
        es = EvaluationSet(eval_refs, recons)
        net_ssim, net_nrmse = ssim_set(es), nrmse_set(es)
        improved[f"{k}x"] = bool(net_ssim > zf_ssim[k - 1] and net_nrmse < zf_nrmse[k - 1])
        net_rows.append({"k": k, "label": "trained", "ssim_mean": net_ssim,
                         "ssim_std": 0.0, "nrmse_mean": net_nrmse, "nrmse_std": 0.0})

    return {
        "pass": bool(ordering_ok and all(improved.values())),
        "zero_filled": {"ssim": zf_ssim, "nrmse": zf_nrmse},
        "ordering_strict": bool(ordering_ok),
        "network_improves": improved,
        "rows": rows + net_rows,
    }


def check_task_performance(cfg: SmokeConfig) -> dict:
    """Matched-filter percent correct: ceiling at high amplitude on 1x,
    chance at zero amplitude, non-increasing with k at mid amplitude."""
    shape = cfg.shape
    slices = make_phantom_slices(cfg.afc_slices, shape, cfg.coils, seed=cfg.seed + 71,
                                 texture=0.03, support=0.5, n_ellipses=0,
                                 texture_cutoff=0.035, base="plateau")
    n = min(cfg.afc_trials, 4 * cfg.afc_slices)

    def percent_correct(amplitude: float, k: int) -> float:
        mask = make_mask(MaskSpec(width=shape[1], k=k, low_count=cfg.low_count))
        ds = build_afc_dataset(slices, SignalSpec(amplitude=amplitude), mask,
                               patch=24, centers=AFC_CENTERS_64,
                               condition=f"zf-{k}x-a{amplitude:g}")
        session = run_synthetic_session(ds, n=n, seed=cfg.seed + 4)
        return score_session(session).percent_correct

    pc_high_1x = percent_correct(cfg.amplitude_high, 1)
    pc_zero = percent_correct(0.0, 1)
    half = 100.0 * 1.96 * np.sqrt(0.25 / n)
    chance_ok = (50.0 - half) <= pc_zero <= (50.0 + half)

    pc_mid = [percent_correct(cfg.amplitude_mid, k) for k in (1, 2, 3, 4, 5)]
    increases = [pc_mid[i + 1] - pc_mid[i] for i in range(4) if pc_mid[i + 1] > pc_mid[i]]
    monotone_ok = len(increases) <= 1 and all(inc <= 3.0 for inc in increases)

    return {
        "pass": bool(pc_high_1x == 100.0 and chance_ok and monotone_ok),
        "n_trials": n,
        "high_amplitude_1x": pc_high_1x,
        "zero_amplitude": pc_zero,
        "chance_interval": [50.0 - half, 50.0 + half],
        "mid_amplitude_curve": pc_mid,
        "inversions": increases,
    }


def check_afc_bookkeeping(cfg: SmokeConfig, work_dir) -> dict:
    """Scoring equals a brute-force recount; the response log replays to
    identical state; trial generation is deterministic and side-balanced."""
    slices = make_phantom_slices(13, cfg.shape, cfg.coils, seed=cfg.seed + 50,
                                 texture=0.03, support=0.5, n_ellipses=0,
                                 texture_cutoff=0.035, base="plateau")
    mask = make_mask(MaskSpec(width=cfg.shape[1], k=3, low_count=cfg.low_count))
    ds = build_afc_dataset(slices, SignalSpec(amplitude=cfg.amplitude_mid), mask,
                           patch=24, centers=AFC_CENTERS_64, condition="book-3x")

    trials_a = generate_trials(ds, n=50, seed=9)
    trials_b = generate_trials(ds, n=50, seed=9)
    deterministic = trials_a == trials_b
    balanced = sum(t.signal_side == "left" for t in trials_a) == 25

    store = SessionStore(os.path.join(work_dir, "sessions"))
    session = store.create("bookkeeper", "book-3x", 9, trials_a)
    rng = np.random.default_rng(3)
    while not session.complete:
        choice = "left" if rng.random() < 0.5 else "right"
        record_response(session, choice, store=store)
    score = score_session(session)
    recount = sum(
        1 for resp, t in zip(session.responses, trials_a)
        if resp.chosen_side == t.signal_side
    )
    recount_ok = score.n_correct == recount

    replayed = store.load(session.session_id)
    replay_ok = (
        replayed.answered == session.answered
        and [r.chosen_side for r in replayed.responses]
        == [r.chosen_side for r in session.responses]
        and [r.correct for r in replayed.responses]
        == [r.correct for r in session.responses]
        and score_session(replayed).percent_correct == score.percent_correct
    )

    exact_75 = 100.0 * 150 / 200 == 75.0

    return {
        "pass": bool(deterministic and balanced and recount_ok and replay_ok and exact_75),
        "deterministic_trials": bool(deterministic),
        "side_balanced": bool(balanced),
        "score_matches_recount": bool(recount_ok),
        "replay_identical": bool(replay_ok),
        "percent_correct": score.percent_correct,
    }


def run_pipeline_smoke(out_dir, seed: int = 7, config: SmokeConfig | None = None) -> dict:
    """Run every check, write the summary JSON, report tables and figures."""
    cfg = config or SmokeConfig(seed=seed)
    os.makedirs(out_dir, exist_ok=True)

    checks = {
        "mask_fidelity": check_mask_fidelity(),
        "nrmse_unit_cases": check_nrmse_unit_cases(),
        "degradation_ordering": check_degradation_ordering(cfg),
        "task_performance": check_task_performance(cfg),
        "afc_bookkeeping": check_afc_bookkeeping(cfg, out_dir),
    }
    summary = {
        "seed": cfg.seed,
        "image_shape": list(cfg.shape),
        "checks": checks,
        "all_pass": all(c["pass"] for c in checks.values()),
    }

    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")

    rows = checks["degradation_ordering"]["rows"]
    write_metrics_csv(
        os.path.join(out_dir, "metrics.csv"),
        [(f"{r['label']}-{r['k']}x", m, r[f"{m}_mean"], r[f"{m}_std"], cfg.eval_slices)
         for r in rows for m in ("ssim", "nrmse")],
    )
    pc = checks["task_performance"]["mid_amplitude_curve"]
    with open(os.path.join(out_dir, "percent_correct.csv"), "w") as fh:
        fh.write("condition,percent_correct,n\n")
        for k, v in zip((1, 2, 3, 4, 5), pc):
            fh.write(f"zf-{k}x,{v},{checks['task_performance']['n_trials']}\n")

    from . import reporting

    reporting.metric_curves_figure(os.path.join(out_dir, "metrics.png"), rows,
                                   title="Synthetic pipeline: quality vs undersampling")
    reporting.pc_curve_figure(
        os.path.join(out_dir, "percent_correct.png"),
        [{"k": k, "percent_correct": v, "observer": "matched-filter"}
         for k, v in zip((1, 2, 3, 4, 5), pc)],
        title="Synthetic observer",
    )
    return summary
