"""Cross-validation orchestration and the results table renderer."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ParameterError, TrainingDiverged
from .metrics import EvaluationSet, SSIMParams, format_mean_std, nrmse_set, ssim_set
from .training import TrainRun, train
from .unet import UNetConfig, UNetModel, save_model


@dataclass(frozen=True)
class FoldSplit:
    fold: int
    train_indices: np.ndarray
    val_indices: np.ndarray


def make_folds(n: int, k: int = 5, seed: int = 0) -> list[FoldSplit]:
    """Seeded shuffle, then contiguous partition into k folds.

    Validation sets are disjoint, cover every index exactly once, and
    differ in size by at most one.
    """
    if k < 1:
        raise ParameterError(f"fold count must be >= 1, got {k}")
    if n < k:
        raise DataError(f"cannot split {n} items into {k} folds")
    order = np.random.default_rng(seed).permutation(n)
    bounds = [round(i * n / k) for i in range(k + 1)]
    folds = []
    for i in range(k):
        val = np.sort(order[bounds[i] : bounds[i + 1]])
        trn = np.sort(np.concatenate([order[: bounds[i]], order[bounds[i + 1] :]]))
        folds.append(FoldSplit(fold=i, train_indices=trn, val_indices=val))
    return folds


@dataclass(frozen=True)
class ExperimentGrid:
    """The study's experiment axes."""

    losses: tuple[str, ...] = ("ssim", "mse")
    undersamplings: tuple[int, ...] = (1, 2, 3, 4, 5)
    sizes: dict = field(default_factory=lambda: {"small": 500, "large": 4000})
    seed: int = 0

    def __post_init__(self):
        if not self.losses or not self.undersamplings or not self.sizes:
            raise ParameterError("grid axes must be nonempty")

    def cells(self):
        for loss in self.losses:
            for k in self.undersamplings:
                for size_label in self.sizes:
                    yield (loss, k, size_label)


@dataclass
class CvResult:
    """Per-fold scores plus their mean/std summary for one grid cell."""

    condition: str
    fold_ssim: list[float]
    fold_nrmse: list[float]
    failures: list[str] = field(default_factory=list)

    def _summary(self, values: list[float]):
        arr = np.asarray(values, dtype=np.float64)
        mean = float(arr.mean())
        std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
        return mean, std

    @property
    def ssim(self):
        return self._summary(self.fold_ssim)

    @property
    def nrmse(self):
        return self._summary(self.fold_nrmse)

    def cells(self) -> dict[str, str]:
        return {
            "ssim": format_mean_std(*self.ssim),
            "nrmse": format_mean_std(*self.nrmse),
        }


def run_cv(inputs, targets, condition: str, folds: list[FoldSplit],
           model_config: UNetConfig | None = None, run_template: TrainRun | None = None,
           out_dir: str | None = None, ssim_params: SSIMParams | None = None) -> CvResult:
    """Train one model per fold and score each on its held-out fold.

    ``model_config=None`` runs the identity pipeline (the fully sampled
    1x row: the reconstruction is the zero-filled input itself).  A fold
    whose training diverges is recorded in ``failures`` and skipped in
    the summary.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if inputs.shape != targets.shape:
        raise DataError("inputs and targets must match in shape")

    result = CvResult(condition=condition, fold_ssim=[], fold_nrmse=[])
    for split in folds:
        recon_inputs = inputs[split.val_indices]
        refs = targets[split.val_indices]
        model = None
        history = None
        if model_config is not None:
            run = TrainRun(**_run_kwargs(run_template)) if run_template else TrainRun()
            run.seed = (run_template.seed if run_template else 0) + split.fold
            model = UNetModel(model_config, seed=run.seed)
            try:
                history = train(model, inputs[split.train_indices],
                                targets[split.train_indices], run=run)
            except TrainingDiverged as exc:
                result.failures.append(f"fold {split.fold}: {exc}")
                continue
        recons = (
            np.stack([model.predict(x) for x in recon_inputs])
            if model is not None
            else recon_inputs
        )
        es = EvaluationSet(refs, recons, condition)
        result.fold_ssim.append(ssim_set(es, ssim_params))
        result.fold_nrmse.append(nrmse_set(es))
        if out_dir is not None:
            fold_dir = os.path.join(out_dir, f"fold{split.fold}")
            os.makedirs(fold_dir, exist_ok=True)
            if model is not None:
                save_model(model, os.path.join(fold_dir, "weights.unw"),
                           meta={"condition": condition, "fold": split.fold})
            if history is not None:
                _write_history_csv(os.path.join(fold_dir, "history.csv"), history)
            with open(os.path.join(fold_dir, "metrics.csv"), "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["condition", "fold", "ssim", "nrmse"])
                writer.writerow([condition, split.fold, result.fold_ssim[-1],
                                 result.fold_nrmse[-1]])
    if not result.fold_ssim:
        result.failures.append("all folds failed")
    return result


def _run_kwargs(run: TrainRun) -> dict:
    return {
        "epochs": run.epochs,
        "batch_size": run.batch_size,
        "lr": run.lr,
        "rho": run.rho,
        "eps": run.eps,
        "seed": run.seed,
        "pixel_average": run.pixel_average,
    }


def _write_history_csv(path, run: TrainRun) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss"])
        for i, tl in enumerate(run.train_loss):
            vl = run.val_loss[i] if i < len(run.val_loss) else ""
            writer.writerow([i, tl, vl])


# -- table rendering ------------------------------------------------------------


@dataclass
class TableRow:
    """One undersampling row; cells maps column name -> (mean, std) or None."""

    factor: int  # 1 for the fully sampled row
    cells: dict

    @property
    def label(self) -> str:
        return f"{self.factor}x"


# Columns whose metric improves as the value grows.
_HIGHER_BETTER = {"ssim": True, "nrmse": False, "afc": True}


def preferred_rows(rows: list[TableRow], column: str, threshold: float = 0.01) -> int | None:
    """The bold-marking rule: among undersampled rows, pick the largest
    factor whose mean degrades by less than ``threshold`` relative to the
    best across factors.  Returns the chosen factor, or None."""
    candidates = [
        (row.factor, row.cells[column][0])
        for row in rows
        if row.factor > 1 and row.cells.get(column) is not None
    ]
    if not candidates:
        return None
    higher_better = _HIGHER_BETTER.get(column.split("_")[0], True)
    values = [v for _, v in candidates]
    best = max(values) if higher_better else min(values)
    chosen = None
    for factor, v in sorted(candidates):
        degradation = (best - v) / abs(best) if higher_better else (v - best) / abs(best)
        if degradation < threshold:
            chosen = factor
    return chosen


def render_table(rows: list[TableRow], columns: list[tuple[str, str]],
                 threshold: float = 0.01) -> str:
    """Plain-text table in the mean/std cell style, one row per factor.

    ``columns`` is a list of (key, header).  The preferred undersampling
    per column is wrapped in ``\\bf{...}``.
    """
    header = " & ".join(["Undersampling"] + [title for _, title in columns]) + r" \\"
    lines = [header]
    marks = {key: preferred_rows(rows, key, threshold) for key, _ in columns}
    for row in sorted(rows, key=lambda r: r.factor):
        cells = []
        for key, _ in columns:
            value = row.cells.get(key)
            if value is None:
                cells.append("-")
                continue
            text = format_mean_std(value[0], value[1])
            if marks[key] == row.factor and row.factor > 1:
                text = rf"\bf{{{text}}}"
            cells.append(text)
        lines.append(" & ".join([row.label] + cells) + r" \\")
    return "\n".join(lines) + "\n"
