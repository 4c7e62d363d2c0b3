"""Command-line interface driving every pipeline stage.

Results go under ``--out`` (or ``$MRITASK_OUT``); diagnostics go to
stderr.  Exit codes: 0 success, 1 runtime failure, 2 usage error.  Every
command that consumes randomness takes ``--seed``, and each run archives
its fully resolved configuration next to its outputs.
"""

from __future__ import annotations

import json
import logging
import os
import sys

import click
import numpy as np

from . import __version__

logger = logging.getLogger("mritask")

OUT_ENV = "MRITASK_OUT"


def _out_dir(out: str | None, default_sub: str) -> str:
    """Resolve the output directory: --out wins, else $MRITASK_OUT/<sub>."""
    if out:
        path = out
    else:
        root = os.environ.get(OUT_ENV)
        if not root:
            raise click.UsageError(
                f"no output directory: pass --out or set ${OUT_ENV}"
            )
        path = os.path.join(root, default_sub)
    os.makedirs(path, exist_ok=True)
    return path


def _archive_config(out_dir: str, command: str, resolved: dict) -> None:
    path = os.path.join(out_dir, "run-config.json")
    with open(path, "w") as fh:
        json.dump({"command": command, "version": __version__, "config": resolved},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_config_file(path: str | None) -> dict:
    """Plain key=value lines; '#' starts a comment.  Flags override these."""
    if not path:
        return {}
    values: dict[str, str] = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise click.UsageError(f"bad config line (expected key=value): {line!r}")
            key, val = line.split("=", 1)
            values[key.strip()] = val.strip()
    return values


def _merged(ctx: click.Context, config_file: str | None, **flags):
    file_values = _load_config_file(config_file)
    merged = dict(file_values)
    for key, value in flags.items():
        source = ctx.get_parameter_source(key)
        if key in merged and source == click.core.ParameterSource.DEFAULT:
            continue  # file value wins over an unset flag
        merged[key] = value
    return merged


@click.group()
@click.version_option(__version__)
@click.option("-v", "--verbose", is_flag=True, help="Log at debug level.")
def main(verbose: bool):
    """Undersampled-MRI task-based assessment toolkit."""
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )


# -- masks -----------------------------------------------------------------------


@main.command()
@click.option("--width", type=int, default=320, show_default=True)
@click.option("--k", "step", type=int, required=True, help="kx undersampling step.")
@click.option("--low", type=int, default=16, show_default=True,
              help="Fully sampled centered low-frequency columns.")
@click.option("--out", type=click.Path(), default=None,
              help="Directory for mask.txt / mask.png exports.")
def mask(width: int, step: int, low: int, out: str | None):
    """Build a sampling mask and print its sampled count and effective factor."""
    from .errors import ParameterError
    from .metrics import round_half_up
    from .sampling import MaskSpec, make_mask, mask_to_png, mask_to_text

    try:
        spec = MaskSpec(width=width, k=step, low_count=low)
    except ParameterError as exc:
        raise click.UsageError(str(exc)) from exc
    m = make_mask(spec)
    click.echo(f"sampled={m.sampled_count} effective={round_half_up(m.effective_factor, 2):.2f}")
    if out:
        out_dir = _out_dir(out, "mask")
        with open(os.path.join(out_dir, "mask.txt"), "w") as fh:
            fh.write(mask_to_text(m))
        mask_to_png(m, os.path.join(out_dir, "mask.png"))
        _archive_config(out_dir, "mask", {"width": width, "k": step, "low": low})
        logger.info("wrote mask exports to %s", out_dir)


# -- data ------------------------------------------------------------------------


@main.command("make-phantoms")
@click.option("--count", type=int, default=50, show_default=True)
@click.option("--height", type=int, default=64, show_default=True)
@click.option("--width", type=int, default=64, show_default=True)
@click.option("--coils", type=int, default=3, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--texture", type=float, default=0.1, show_default=True)
@click.option("--support", type=float, default=0.45, show_default=True)
@click.option("--base", type=click.Choice(["bump", "plateau"]), default="bump",
              show_default=True)
@click.option("--out", type=click.Path(), default=None)
def make_phantoms(count, height, width, coils, seed, texture, support, base, out):
    """Simulate multi-coil phantom acquisitions and write MCKS files."""
    from .containers import write_mcks
    from .synth import make_phantom_slices

    out_dir = _out_dir(out, "phantoms")
    slices = make_phantom_slices(count, (height, width), coils, seed=seed,
                                 texture=texture, support=support, base=base)
    for i, mck in enumerate(slices):
        write_mcks(os.path.join(out_dir, f"slice{i:04d}.mcks"), mck)
    _archive_config(out_dir, "make-phantoms",
                    {"count": count, "shape": [height, width], "coils": coils,
                     "seed": seed, "texture": texture, "support": support, "base": base})
    click.echo(f"wrote {count} slices to {out_dir}")


def _read_slices(input_dir: str) -> list:
    from .containers import read_mcks

    files = sorted(
        f for f in os.listdir(input_dir) if f.endswith(".mcks")
    )
    if not files:
        raise click.ClickException(f"no .mcks files in {input_dir}")
    return [read_mcks(os.path.join(input_dir, f)) for f in files]


@main.command("make-dataset")
@click.option("--input", "input_dir", type=click.Path(exists=True), required=True,
              help="Directory of MCKS slices.")
@click.option("--k", "step", type=int, required=True)
@click.option("--low", type=int, default=16, show_default=True)
@click.option("--out", type=click.Path(), default=None)
def make_dataset(input_dir, step, low, out):
    """Build (zero-filled input, fully sampled target) training pairs."""
    from .sampling import MaskSpec, build_network_input, make_mask, reference_recon

    slices = _read_slices(input_dir)
    width = slices[0].shape[2]
    mask_ = make_mask(MaskSpec(width=width, k=step, low_count=low))
    out_dir = _out_dir(out, "pairs")
    xs = np.stack([build_network_input(s, mask_) for s in slices]).astype(np.float32)
    ys = np.stack([reference_recon(s) for s in slices]).astype(np.float32)
    np.savez_compressed(os.path.join(out_dir, "pairs.npz"), inputs=xs, targets=ys)
    _archive_config(out_dir, "make-dataset",
                    {"input": input_dir, "k": step, "low": low, "pairs": len(slices)})
    click.echo(f"wrote {len(slices)} pairs to {out_dir}/pairs.npz")


@main.command()
@click.option("--input", "input_path", type=click.Path(exists=True), required=True,
              help="One MCKS slice.")
@click.option("--k", "step", type=int, default=1, show_default=True)
@click.option("--low", type=int, default=16, show_default=True)
@click.option("--model", "model_path", type=click.Path(exists=True), default=None)
@click.option("--out", type=click.Path(), default=None)
def recon(input_path, step, low, model_path, out):
    """Reconstruct one slice (zero-filled, optionally through a model)."""
    from .containers import read_mcks
    from .images import save_png16
    from .sampling import MaskSpec, build_network_input, make_mask
    from .unet import load_model

    mck = read_mcks(input_path)
    mask_ = make_mask(MaskSpec(width=mck.shape[2], k=step, low_count=low))
    img = build_network_input(mck, mask_)
    tag = f"zf-{step}x"
    if model_path:
        model = load_model(model_path)
        img = model.predict(img)
        tag = f"net-{step}x"
    out_dir = _out_dir(out, "recon")
    stem = os.path.splitext(os.path.basename(input_path))[0]
    save_png16(os.path.join(out_dir, f"{stem}-{tag}.png"), img)
    np.save(os.path.join(out_dir, f"{stem}-{tag}.npy"), img)
    click.echo(f"wrote {stem}-{tag}.png")


# -- training / evaluation ---------------------------------------------------------


@main.command()
@click.option("--pairs", "pairs_path", type=click.Path(exists=True), required=True,
              help="pairs.npz from make-dataset.")
@click.option("--loss", type=click.Choice(["ssim", "mse"]), default="ssim",
              show_default=True)
@click.option("--epochs", type=int, default=150, show_default=True)
@click.option("--batch", type=int, default=8, show_default=True)
@click.option("--x", "start_channels", type=int, default=64, show_default=True)
@click.option("--depth", type=int, default=4, show_default=True)
@click.option("--dropout", type=float, default=0.1, show_default=True)
@click.option("--lr", type=float, default=1e-3, show_default=True)
@click.option("--lr-decay", type=click.Choice(["none", "cosine"]), default="none",
              show_default=True)
@click.option("--val-fraction", type=float, default=0.2, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--config", "config_file", type=click.Path(exists=True), default=None,
              help="key=value config file; flags override it.")
@click.option("--out", type=click.Path(), default=None)
@click.pass_context
def train(ctx, pairs_path, loss, epochs, batch, start_channels, depth, dropout, lr,
          lr_decay, val_fraction, seed, config_file, out):
    """Train the reconstruction network on prepared pairs."""
    from . import reporting
    from .errors import TrainingDiverged
    from .evalharness import _write_history_csv
    from .training import TrainRun
    from .training import train as train_fn
    from .unet import UNetConfig, UNetModel, save_model

    merged = _merged(ctx, config_file, loss=loss, epochs=int(epochs), batch=int(batch),
                     start_channels=int(start_channels), depth=int(depth),
                     dropout=float(dropout), lr=float(lr), lr_decay=lr_decay,
                     val_fraction=float(val_fraction), seed=int(seed))
    data = np.load(pairs_path)
    xs = data["inputs"].astype(np.float64)
    ys = data["targets"].astype(np.float64)
    n_val = int(round(float(merged["val_fraction"]) * len(xs)))
    val_x, val_y = (xs[:n_val], ys[:n_val]) if n_val else (None, None)
    trn_x, trn_y = xs[n_val:], ys[n_val:]

    model = UNetModel(
        UNetConfig(start_channels=int(merged["start_channels"]), depth=int(merged["depth"]),
                   dropout_rate=float(merged["dropout"]), loss_kind=str(merged["loss"])),
        seed=int(merged["seed"]),
    )
    run = TrainRun(epochs=int(merged["epochs"]), batch_size=int(merged["batch"]),
                   lr=float(merged["lr"]), lr_decay=str(merged["lr_decay"]),
                   seed=int(merged["seed"]))
    out_dir = _out_dir(out, "train")
    _archive_config(out_dir, "train", merged)
    try:
        train_fn(model, trn_x, trn_y, val_x, val_y, run)
    except TrainingDiverged as exc:
        raise click.ClickException(str(exc)) from exc
    save_model(model, os.path.join(out_dir, "weights.unw"),
               meta={"loss": merged["loss"], "epochs": merged["epochs"],
                     "seed": merged["seed"]})
    _write_history_csv(os.path.join(out_dir, "history.csv"), run)
    reporting.loss_curves_figure(os.path.join(out_dir, "loss.png"), run.train_loss,
                                 run.val_loss, title=f"{merged['loss']} training")
    click.echo(
        f"final train loss {run.train_loss[-1]:.6g} "
        f"(initial {run.train_loss[0]:.6g}); weights in {out_dir}"
    )


@main.command()
@click.option("--pairs", "pairs_path", type=click.Path(exists=True), required=True)
@click.option("--model", "model_path", type=click.Path(exists=True), default=None)
@click.option("--condition", default=None, help="Label for the report row.")
@click.option("--out", type=click.Path(), default=None)
def evaluate(pairs_path, model_path, condition, out):
    """Score reconstructions (SSIM and NRMSE) against their references."""
    from .metrics import EvaluationSet, format_mean_std, nrmse_set, ssim_set, write_metrics_csv
    from .unet import load_model

    data = np.load(pairs_path)
    xs = data["inputs"].astype(np.float64)
    ys = data["targets"].astype(np.float64)
    model = load_model(model_path) if model_path else None
    recons = np.stack([model.predict(x) for x in xs]) if model else xs
    es = EvaluationSet(ys, recons, condition or "condition")
    ssim_v, nrmse_v = ssim_set(es), nrmse_set(es)
    out_dir = _out_dir(out, "evaluate")
    write_metrics_csv(os.path.join(out_dir, "metrics.csv"),
                      [(es.condition, "ssim", ssim_v, 0.0, es.m),
                       (es.condition, "nrmse", nrmse_v, 0.0, es.m)])
    _archive_config(out_dir, "evaluate",
                    {"pairs": pairs_path, "model": model_path, "condition": es.condition})
    click.echo(f"ssim={format_mean_std(ssim_v, None)} nrmse={format_mean_std(nrmse_v, None)}")


@main.command()
@click.option("--input", "input_dir", type=click.Path(exists=True), required=True,
              help="Directory of MCKS slices.")
@click.option("--losses", default="ssim,mse", show_default=True)
@click.option("--ks", default="1,2,3,4,5", show_default=True)
@click.option("--low", type=int, default=16, show_default=True)
@click.option("--folds", type=int, default=5, show_default=True)
@click.option("--epochs", type=int, default=30, show_default=True)
@click.option("--batch", type=int, default=8, show_default=True)
@click.option("--x", "start_channels", type=int, default=8, show_default=True)
@click.option("--depth", type=int, default=2, show_default=True)
@click.option("--dropout", type=float, default=0.1, show_default=True)
@click.option("--lr", type=float, default=3e-2, show_default=True)
@click.option("--lr-decay", type=click.Choice(["none", "cosine"]), default="cosine",
              show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--config", "config_file", type=click.Path(exists=True), default=None)
@click.option("--out", type=click.Path(), default=None)
@click.pass_context
def cv(ctx, input_dir, losses, ks, low, folds, epochs, batch, start_channels, depth,
       dropout, lr, lr_decay, seed, config_file, out):
    """Cross-validated metric tables over (loss x undersampling)."""
    from . import reporting
    from .evalharness import TableRow, make_folds, render_table, run_cv
    from .metrics import write_metrics_csv
    from .sampling import MaskSpec, build_network_input, make_mask, reference_recon
    from .training import TrainRun
    from .unet import UNetConfig

    merged = _merged(ctx, config_file, losses=losses, ks=ks, low=int(low),
                     folds=int(folds), epochs=int(epochs), batch=int(batch),
                     start_channels=int(start_channels), depth=int(depth),
                     dropout=float(dropout), lr=float(lr), lr_decay=lr_decay,
                     seed=int(seed))
    loss_list = [s.strip() for s in str(merged["losses"]).split(",") if s.strip()]
    k_list = [int(s) for s in str(merged["ks"]).split(",") if s.strip()]
    slices = _read_slices(input_dir)
    width = slices[0].shape[2]
    refs = np.stack([reference_recon(s) for s in slices])
    splits = make_folds(len(slices), int(merged["folds"]), seed=int(merged["seed"]))

    out_dir = _out_dir(out, "cv")
    _archive_config(out_dir, "cv", merged)
    csv_rows = []
    table_rows: dict[int, dict] = {}
    for loss_kind in loss_list:
        for k in k_list:
            mask_ = make_mask(MaskSpec(width=width, k=k, low_count=int(merged["low"])))
            xs = np.stack([build_network_input(s, mask_) for s in slices])
            condition = f"{loss_kind}/{k}x"
            cfg = None
            if k > 1:
                cfg = UNetConfig(start_channels=int(merged["start_channels"]),
                                 depth=int(merged["depth"]),
                                 dropout_rate=float(merged["dropout"]),
                                 loss_kind=loss_kind)
            template = TrainRun(epochs=int(merged["epochs"]), batch_size=int(merged["batch"]),
                                lr=float(merged["lr"]), lr_decay=str(merged["lr_decay"]),
                                seed=int(merged["seed"]))
            result = run_cv(xs, refs, condition, splits, model_config=cfg,
                            run_template=template,
                            out_dir=os.path.join(out_dir, loss_kind, f"{k}x"))
            for failure in result.failures:
                logger.warning("%s: %s", condition, failure)
            if not result.fold_ssim:
                continue
            csv_rows.append((condition, "ssim", *result.ssim, len(result.fold_ssim)))
            csv_rows.append((condition, "nrmse", *result.nrmse, len(result.fold_nrmse)))
            table_rows.setdefault(k, {})[f"ssim_{loss_kind}"] = result.ssim
            table_rows.setdefault(k, {})[f"nrmse_{loss_kind}"] = result.nrmse

    write_metrics_csv(os.path.join(out_dir, "metrics.csv"), csv_rows)
    columns = [(f"{m}_{l}", f"{m.upper()} {l}") for m in ("ssim", "nrmse") for l in loss_list]
    rows = [TableRow(k, cells) for k, cells in sorted(table_rows.items())]
    table = render_table(rows, columns)
    with open(os.path.join(out_dir, "table.txt"), "w") as fh:
        fh.write(table)
    fig_rows = [
        {"k": k, "label": l, "ssim_mean": cells[f"ssim_{l}"][0],
         "ssim_std": cells[f"ssim_{l}"][1], "nrmse_mean": cells[f"nrmse_{l}"][0],
         "nrmse_std": cells[f"nrmse_{l}"][1]}
        for k, cells in sorted(table_rows.items()) for l in loss_list
        if f"ssim_{l}" in cells
    ]
    if fig_rows:
        reporting.metric_curves_figure(os.path.join(out_dir, "metrics.png"), fig_rows,
                                       title="Cross-validated image quality")
    click.echo(table)


# -- observer studies ---------------------------------------------------------------


@main.command("make-afc")
@click.option("--input", "input_dir", type=click.Path(exists=True), required=True,
              help="Directory of MCKS slices (observer test set).")
@click.option("--k", "step", type=int, required=True)
@click.option("--low", type=int, default=16, show_default=True)
@click.option("--model", "model_path", type=click.Path(exists=True), default=None)
@click.option("--amplitude", type=float, required=True,
              help="Lesion amplitude in image-intensity units.")
@click.option("--radius", type=float, default=0.25, show_default=True)
@click.option("--sigma", type=float, default=1.0, show_default=True)
@click.option("--patch", type=int, default=None, help="Subimage size (default 128).")
@click.option("--condition", default=None)
@click.option("--out", type=click.Path(), default=None,
              help="Study data root; dataset goes under <out>/afc/<condition>.")
def make_afc(input_dir, step, low, model_path, amplitude, radius, sigma, patch,
             condition, out):
    """Build the paired background/signal image set for one condition."""
    from .sampling import MaskSpec, make_mask
    from .signals import SignalSpec, build_afc_dataset, save_afc_dataset
    from .unet import load_model

    slices = _read_slices(input_dir)
    width = slices[0].shape[2]
    mask_ = make_mask(MaskSpec(width=width, k=step, low_count=low))
    model = load_model(model_path) if model_path else None
    condition = condition or (f"net-{step}x" if model else f"zf-{step}x")
    spec = SignalSpec(radius_px=radius, sigma_px=sigma, amplitude=amplitude)
    dataset = build_afc_dataset(slices, spec, mask_, model=model, patch=patch,
                                condition=condition)
    root = _out_dir(out, "study")
    target = os.path.join(root, "afc", condition)
    manifest = save_afc_dataset(dataset, target)
    _archive_config(target, "make-afc",
                    {"input": input_dir, "k": step, "low": low, "model": model_path,
                     "amplitude": amplitude, "radius": radius, "sigma": sigma,
                     "patch": dataset.patch, "condition": condition})
    click.echo(f"wrote {dataset.n_pairs} image pairs; manifest at {manifest}")


@main.command("serve-afc")
@click.option("--data", "data_root", type=click.Path(exists=True), required=True,
              help="Study data root (contains afc/ and sessions/).")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8642, show_default=True)
@click.option("--ui", "ui_dir", type=click.Path(exists=True), default=None,
              help="Static observer-UI directory to serve at /.")
def serve_afc(data_root, host, port, ui_dir):
    """Start the observer-study HTTP service."""
    from .service import serve_forever

    serve_forever(data_root, host, port, ui_dir=ui_dir)


@main.command("simulate-observer")
@click.option("--data", "data_root", type=click.Path(exists=True), required=True)
@click.option("--condition", required=True)
@click.option("--n", "n_trials", type=int, default=200, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--observer", default="matched-filter", show_default=True)
def simulate_observer(data_root, condition, n_trials, seed, observer):
    """Run the synthetic matched-filter observer through a full session."""
    from .afc import SessionStore, score_session
    from .images import load_png16
    from .signals import AFCImageSet, SignalSpec

    manifest_path = os.path.join(data_root, "afc", condition, "manifest.json")
    if not os.path.exists(manifest_path):
        raise click.ClickException(f"no AFC dataset for condition {condition!r}")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    base = os.path.join(data_root, "afc", condition)
    n_pairs = len(manifest["images"]) // 2
    backgrounds = [None] * n_pairs
    signals = [None] * n_pairs
    for rec in manifest["images"]:
        img = load_png16(os.path.join(base, rec["file"]))
        (backgrounds if rec["role"] == "background" else signals)[rec["pair"]] = img
    spec = manifest["signal_spec"]
    dataset = AFCImageSet(
        condition=manifest["condition"],
        signal_spec=SignalSpec(radius_px=spec["radius_px"], sigma_px=spec["sigma_px"],
                               amplitude=spec["amplitude"]),
        mask_spec=manifest["mask_spec"],
        model_id=manifest.get("model_id"),
        patch=manifest["patch"],
        backgrounds=np.stack(backgrounds),
        signals=np.stack(signals),
        provenance=[(rec["slice"], rec["subimage"]) for rec in manifest["images"]
                    if rec["role"] == "background"],
        template=load_png16(os.path.join(base, manifest["template"])),
    )
    from .afc import run_synthetic_session

    store = SessionStore(os.path.join(data_root, "sessions"))
    session = run_synthetic_session(dataset, n=n_trials, seed=seed, observer=observer,
                                    store=store)
    score = score_session(session)
    click.echo(f"session={session.session_id} percent_correct={score.percent_correct:.1f} "
               f"n={score.n_trials}")


@main.command("score-afc")
@click.option("--data", "data_root", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), default=None,
              help="Write scores.csv and a percent-correct figure here.")
def score_afc(data_root, out):
    """Score all persisted sessions and aggregate per observer."""
    from . import reporting
    from .afc import SessionStore, aggregate_observers, score_session
    from .errors import SessionStateError

    store = SessionStore(os.path.join(data_root, "sessions"))
    session_ids = store.list_sessions()
    if not session_ids:
        raise click.ClickException(f"no sessions under {data_root}")
    rows = []
    by_condition: dict[str, dict[str, float]] = {}
    for sid in session_ids:
        session = store.load(sid)
        try:
            score = score_session(session)
        except SessionStateError:
            logger.warning("session %s has no responses; skipped", sid)
            continue
        rows.append((sid, session.observer, session.condition, score.percent_correct,
                     score.n_trials, session.complete))
        by_condition.setdefault(session.condition, {})[session.observer] = (
            score.percent_correct
        )
    for condition, scores in sorted(by_condition.items()):
        mean, std, cell = aggregate_observers(scores)
        click.echo(f"{condition}: {cell} (n_observers={len(scores)})")
    if out:
        out_dir = _out_dir(out, "scores")
        with open(os.path.join(out_dir, "scores.csv"), "w") as fh:
            fh.write("session,observer,condition,percent_correct,n_trials,complete\n")
            for row in rows:
                fh.write(",".join(str(v) for v in row) + "\n")
        points = []
        for condition, scores in by_condition.items():
            k_part = [p for p in condition.split("-") if p.endswith("x")]
            if not k_part:
                continue
            try:
                k = int(k_part[-1][:-1])
            except ValueError:
                continue
            for observer, pc in scores.items():
                points.append({"k": k, "percent_correct": pc, "observer": observer})
        if points:
            reporting.pc_curve_figure(os.path.join(out_dir, "percent_correct.png"),
                                      points, title="2-AFC performance")
        click.echo(f"wrote scores to {out_dir}")


# -- figures -------------------------------------------------------------------------


@main.command("export-compare")
@click.option("--input", "input_path", type=click.Path(exists=True), required=True,
              help="One MCKS slice.")
@click.option("--cond", "conditions", multiple=True, required=True,
              help="Repeatable: K or K:weights.unw (e.g. --cond 1 --cond 3:w.unw).")
@click.option("--low", type=int, default=16, show_default=True)
@click.option("--amplitude", type=float, required=True)
@click.option("--radius", type=float, default=0.25, show_default=True)
@click.option("--sigma", type=float, default=1.0, show_default=True)
@click.option("--row", "center_row", type=float, default=None,
              help="Signal center row (default: image center).")
@click.option("--col", "center_col", type=float, default=None)
@click.option("--out", type=click.Path(), required=True, help="Output PNG path.")
def export_compare(input_path, conditions, low, amplitude, radius, sigma,
                   center_row, center_col, out):
    """Side-by-side grid: with/without the inserted signal per condition."""
    from . import kspace, reporting
    from .containers import read_mcks
    from .sampling import MaskSpec, build_network_input, make_mask
    from .signals import SignalSpec, insert_signal
    from .unet import load_model

    mck = read_mcks(input_path)
    h, w = mck.shape[1:]
    r0 = center_row if center_row is not None else h / 2
    c0 = center_col if center_col is not None else w / 2
    spec = SignalSpec(radius_px=radius, sigma_px=sigma, amplitude=amplitude,
                      center=(r0, c0))
    smap = kspace.estimate_sensitivities(mck)
    with_signal = insert_signal(mck, smap, spec)

    panels = {}
    for cond in conditions:
        if ":" in cond:
            k_str, model_path = cond.split(":", 1)
            if not os.path.exists(model_path):
                raise click.ClickException(
                    f"condition {cond!r}: missing model weights {model_path!r}"
                )
            model = load_model(model_path)
        else:
            k_str, model = cond, None
        try:
            k = int(k_str)
        except ValueError as exc:
            raise click.UsageError(f"bad condition {cond!r}: expected K or K:weights") from exc
        mask_ = make_mask(MaskSpec(width=w, k=k, low_count=low))
        without_img = build_network_input(mck, mask_, smap=smap)
        with_img = build_network_input(with_signal, mask_, smap=smap)
        if model is not None:
            without_img = model.predict(without_img)
            with_img = model.predict(with_img)
            label = f"net-{k}x"
        else:
            label = f"{k}x"
        panels[label] = (without_img, with_img)

    os.makedirs(os.path.dirname(os.path.abspath(out)) or ".", exist_ok=True)
    reporting.comparison_grid_figure(out, panels, marker=(int(r0), int(c0)))
    click.echo(f"wrote comparison grid with {len(panels)} conditions to {out}")


@main.command("pipeline-smoke")
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--out", type=click.Path(), default=None)
def pipeline_smoke(seed, out):
    """Synthetic end-to-end run asserting the pipeline's key properties."""
    from .smoke import run_pipeline_smoke

    out_dir = _out_dir(out, "smoke")
    summary = run_pipeline_smoke(out_dir, seed=seed)
    for name, check in summary["checks"].items():
        click.echo(f"{'PASS' if check['pass'] else 'FAIL'}  {name}")
    if not summary["all_pass"]:
        raise click.ClickException("pipeline smoke checks failed; see summary.json")
    click.echo(f"all checks passed; summary under {out_dir}")


if __name__ == "__main__":
    main()
