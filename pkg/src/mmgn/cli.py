"""``mmgn`` command line: gen-data, train, reconstruct, evaluate, analyze, pod.

Every command writes into an output directory (``--out``; default taken
from $MMGN_OUTPUT_DIR, else ``runs``) and leaves a ``run.json`` manifest
there. Files are written to a temporary name and renamed, so a failed run
never leaves a half-written output. Errors print one line to stderr and
exit with status 1 (argument errors exit with 2).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from typing import Sequence

import numpy as np

from . import __version__
from .analysis import ablation_nmse, autodecoder_diagnosis, latent_dissimilarity, snapshot_pod
from .atomic import atomic_write_text
from .data import (
    GridField,
    generate_synthetic,
    normalized_lattice,
    read_field,
    read_observations,
    write_field,
    write_observations,
)
from .data.synthetic import KINDS
from .experiment import (
    OUTPUT_ENV,
    ExperimentSpec,
    describe_keys,
    loss_history_csv,
    parse_dims,
    run_experiment,
)
from .inference import InferConfig, evaluate_field, infer_latent, reconstruct
from .metrics import compute_metrics, promotion
from .models import MmgnModel, load_checkpoint, save_checkpoint
from . import plotting

log = logging.getLogger("mmgn")

COMMANDS = ("gen-data", "train", "reconstruct", "evaluate", "analyze", "pod")


class CliError(Exception):
    pass


def _out_dir(path: str | None) -> str:
    out = path or os.environ.get(OUTPUT_ENV) or "runs"
    os.makedirs(out, exist_ok=True)
    return out


def _write_manifest(out: str, command: str, payload: dict) -> None:
    manifest = {"command": command, "version": __version__, **payload}
    atomic_write_text(os.path.join(out, "run.json"),
                      json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _floats(text: str | None) -> list[float] | None:
    if text is None:
        return None
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise CliError(f"expected comma-separated numbers, got {text!r}") from None


def _parse_sets(items: Sequence[str]) -> dict:
    out = {}
    for item in items or ():
        key, sep, raw = item.partition("=")
        if not sep:
            raise CliError(f"--set expects key=value, got {item!r}")
        try:
            out[key.strip()] = json.loads(raw)
        except json.JSONDecodeError:
            out[key.strip()] = raw
    return out


# ---------------------------------------------------------------- commands

def cmd_gen_data(args) -> None:
    dims = parse_dims(args.dims)
    coord_range = tuple(_floats(args.coord_range)) if args.coord_range else (0.0, 1.0, 0.0, 1.0)
    if len(coord_range) != 4:
        raise CliError("--coord-range needs four numbers: x_min,x_max,y_min,y_max")
    field = generate_synthetic(args.kind, dims, args.seed, coord_range)
    out = _out_dir(args.out)
    path = os.path.join(out, args.name)
    write_field(field, path)
    _write_manifest(out, "gen-data", {"kind": args.kind, "dims": list(dims), "seed": args.seed,
                                      "coord_range": list(coord_range), "field": args.name})
    print(path)


_FLAG_KEYS = {
    "model": "model.arch", "task": "sampling.task", "ratio": "sampling.ratio",
    "noise": "noise.ratio", "seed": "seed", "epochs": "train.epochs", "data": "data.path",
    "width": "model.width", "latent_size": "model.d_z",
}


def build_spec(args) -> ExperimentSpec:
    flat: dict = {}
    if args.config:
        with open(args.config) as fh:
            try:
                flat.update(json.load(fh))
            except json.JSONDecodeError as exc:
                raise CliError(f"{args.config}: invalid JSON ({exc})") from None
        flat.pop("range_warnings", None)
        flat.pop("command", None)
        flat.pop("version", None)
    flat.update(_parse_sets(args.set))
    for attr, key in _FLAG_KEYS.items():
        value = getattr(args, attr, None)
        if value is not None:
            flat[key] = value
    if args.allow_out_of_range:
        flat["allow_out_of_range"] = True
    flat["output_dir"] = args.out or flat.get("output_dir") or os.environ.get(OUTPUT_ENV) or "runs"
    spec = ExperimentSpec.from_flat(flat)
    os.makedirs(spec.output_dir(), exist_ok=True)
    return spec


def cmd_train(args) -> None:
    spec = build_spec(args)
    out = spec.output_dir()
    started = time.time()

    def progress(epoch, loss, lr):
        log.info("epoch %4d  loss %.6g  lr %.3g", epoch, loss, lr)

    res = run_experiment(spec, on_epoch=progress)
    ckpt = os.path.join(out, "checkpoint.mmgn")
    save_checkpoint(ckpt, res.train.model, res.train.latents,
                    extra={"spec": spec.values, "n_h": res.truth.n_h, "n_w": res.truth.n_w,
                           "coord_range": list(res.truth.coord_range)})
    atomic_write_text(os.path.join(out, "loss_history.csv"), loss_history_csv(res.train.history))
    write_observations(res.observations, os.path.join(out, "observations.csv"))
    write_field(res.prediction, os.path.join(out, "prediction.fgrd"))
    atomic_write_text(os.path.join(out, "metrics.csv"), res.metrics.to_csv())
    if not args.no_figures:
        plotting.plot_loss_history(res.train.history, os.path.join(out, "loss_history.png"))
        mid = res.truth.n_t // 2
        plotting.plot_reconstruction(res.truth.values[mid], res.prediction.values[mid],
                                     os.path.join(out, "reconstruction.png"))
    _write_manifest(out, "train", spec.values)
    log.info("trained %s (%d parameters) in %.1fs", spec.arch, res.train.model.n_params(),
             time.time() - started)
    print(f"mse={res.metrics.mse:.6g} psnr={res.metrics.psnr:.4g} ssim={res.metrics.ssim:.4f}")


def cmd_reconstruct(args) -> None:
    model, latents, extra = load_checkpoint(args.checkpoint)
    n_h, n_w = (parse_dims("1x" + args.grid)[1:] if args.grid
                else (extra.get("n_h", 64), extra.get("n_w", 64)))
    coord_range = tuple(extra.get("coord_range", (0.0, 1.0, 0.0, 1.0)))
    if args.observations:
        if not isinstance(model, MmgnModel):
            raise CliError("nowcasting needs an MMGN checkpoint (baselines have no latent codes)")
        spec = extra.get("spec", {})
        cfg = InferConfig(steps=args.infer_steps or spec.get("infer.steps", 300),
                          lr=spec.get("infer.lr", 1e-2),
                          latent_reg=spec.get("infer.latent_reg", 1e-4),
                          init=args.infer_init or spec.get("infer.init", "zeros"))
        grid = normalized_lattice(n_h, n_w)
        frames, stamps = [], []
        for obs in read_observations(args.observations):
            z = infer_latent(model, obs, cfg, latents)
            frames.append(evaluate_field(model, z, grid))
            stamps.append(obs.time)
        field = GridField(np.stack(frames), coord_range, np.array(stamps))
    else:
        times = _floats(args.times)
        if times is None and latents is None:
            raise CliError("baseline checkpoints need --times")
        try:
            field = reconstruct(model, latents, n_h, n_w, times=times, coord_range=coord_range)
        except ValueError as exc:
            raise CliError(str(exc)) from None
    out = _out_dir(args.out)
    path = os.path.join(out, args.name)
    write_field(field, path)
    if args.heatmap is not None:
        plotting.render_heatmap(field.values[args.heatmap], os.path.join(
            out, f"frame{args.heatmap:04d}.pgm"), "value")
    _write_manifest(out, "reconstruct", {
        "checkpoint": os.path.abspath(args.checkpoint), "grid": [n_h, n_w],
        "times": [float(t) for t in field.time_stamps], "observations": args.observations,
        "field": args.name})
    print(path)


def _named_paths(items: Sequence[str]) -> list[tuple[str, str]]:
    pairs = []
    for item in items:
        name, sep, path = item.partition("=")
        if not sep:
            name, path = os.path.splitext(os.path.basename(item))[0], item
        pairs.append((name, path))
    names = [n for n, _ in pairs]
    if len(set(names)) != len(names):
        raise CliError(f"prediction names must be unique, got {names}")
    return pairs


def cmd_evaluate(args) -> None:
    preds = _named_paths(args.pred)
    if args.promotion and len(preds) < 2:
        raise CliError("--promotion needs at least two models (pass --pred more than once)")
    truth = read_field(args.truth)
    reports = {}
    for name, path in preds:
        pred = read_field(path)
        try:
            reports[name] = compute_metrics(truth, pred)
        except ValueError as exc:
            raise CliError(f"{name}: {exc}") from None
    out = _out_dir(args.out)
    rows = ["model,mse,psnr,ssim"]
    for name, rep in reports.items():
        atomic_write_text(os.path.join(out, f"metrics_{name}.csv"), rep.to_csv())
        rows.append(f"{name},{rep.mse:.17g},{rep.psnr:.17g},{rep.ssim:.17g}")
    atomic_write_text(os.path.join(out, "metrics_summary.csv"), "\n".join(rows) + "\n")
    manifest = {"truth": os.path.abspath(args.truth),
                "predictions": {n: os.path.abspath(p) for n, p in preds}}
    if args.promotion:
        pr = promotion({n: r.mse for n, r in reports.items()})
        atomic_write_text(os.path.join(out, "promotion.csv"),
                          f"best,second,promotion_pct\n{pr.best},{pr.second},"
                          f"{pr.promotion_pct:.17g}\n")
        manifest["promotion"] = pr._asdict()
        print(f"best={pr.best} second={pr.second} promotion={pr.promotion_pct:.2f}%")
    if args.heatmap is not None:
        k = args.heatmap
        plotting.render_heatmap(truth.values[k], os.path.join(out, f"truth_frame{k:04d}.pgm"))
        for name, path in preds:
            err = read_field(path).values[k] - truth.values[k]
            plotting.render_heatmap(err, os.path.join(out, f"error_{name}_frame{k:04d}.pgm"),
                                    "abs-error")
    if not args.no_figures:
        plotting.plot_metric_frames(reports, os.path.join(out, "metrics.png"))
    _write_manifest(out, "evaluate", manifest)
    for name, rep in reports.items():
        print(f"{name}: mse={rep.mse:.6g} psnr={rep.psnr:.4g} ssim={rep.ssim:.4f}")


def cmd_analyze(args) -> None:
    model, latents, _ = load_checkpoint(args.checkpoint)
    if not isinstance(model, MmgnModel) or latents is None:
        raise CliError("latent analyses need an MMGN checkpoint with a latent table")
    truth = read_field(args.truth)
    if truth.n_t != len(latents):
        raise CliError(f"truth has {truth.n_t} frames but the checkpoint holds {len(latents)} codes")
    out = _out_dir(args.out)
    dis = latent_dissimilarity(latents)
    diag = autodecoder_diagnosis(latents, truth)
    nmse = ablation_nmse(model, latents, truth)
    atomic_write_text(os.path.join(out, "latent_summary.csv"),
                      "metric,value,degenerate_pairs\n"
                      f"latent_dissimilarity,{dis.value:.17g},{dis.degenerate_pairs}\n"
                      f"autodecoder_diagnosis,{diag.value:.17g},{diag.degenerate_pairs}\n"
                      f"mean_ablation_nmse,{nmse.mean():.17g},0\n")
    atomic_write_text(os.path.join(out, "ablation_nmse.csv"),
                      "latent_index,nmse_pct\n"
                      + "".join(f"{j},{v:.17g}\n" for j, v in enumerate(nmse)))
    if not args.no_figures:
        plotting.plot_nmse(nmse, os.path.join(out, "ablation_nmse.png"),
                           title=f"d_z = {len(nmse)}")
    _write_manifest(out, "analyze", {"checkpoint": os.path.abspath(args.checkpoint),
                                     "truth": os.path.abspath(args.truth)})
    print(f"dissimilarity={dis.value:.6g} diagnosis={diag.value:.6g} "
          f"mean_nmse={nmse.mean():.6g}%")


def cmd_pod(args) -> None:
    field = read_field(args.field)
    thresholds = _floats(args.thresholds) or [0.9, 0.99]
    try:
        pod = snapshot_pod(field)
        counts = {t: pod.modes_for(t) for t in thresholds}
    except ValueError as exc:
        raise CliError(str(exc)) from None
    out = _out_dir(args.out)
    atomic_write_text(os.path.join(out, "pod_spectrum.csv"), pod.to_csv())
    if not args.no_figures:
        plotting.plot_pod_energy(pod, os.path.join(out, "pod_energy.png"), thresholds)
    _write_manifest(out, "pod", {"field": os.path.abspath(args.field),
                                 "modes_for": {str(k): v for k, v in counts.items()}})
    for t, m in counts.items():
        print(f"{m} modes reach {t:.4g} of the energy")


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mmgn", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0,
                   help="-v for progress, -vv for debug output")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def common(sp):
        sp.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./runs)")
        return sp

    def figures(sp):
        sp.add_argument("--no-figures", action="store_true", help="skip matplotlib figures")

    g = common(sub.add_parser("gen-data", help="write a synthetic field cube (FGRD)"))
    g.add_argument("--kind", choices=KINDS, default="traveling-blobs")
    g.add_argument("--dims", default="50x64x64", help="TxHxW (default %(default)s)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--coord-range", help="x_min,x_max,y_min,y_max (default 0,1,0,1)")
    g.add_argument("--name", default="field.fgrd")
    g.set_defaults(func=cmd_gen_data)

    t = common(sub.add_parser(
        "train", help="sample, train, reconstruct and score one experiment",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="config keys (flat JSON via --config, or --set key=value):\n" + describe_keys()))
    t.add_argument("--config", help="flat JSON config with dotted keys")
    t.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key (repeatable)")
    t.add_argument("--model", choices=("mmgn", "resmlp", "siren", "ffn_p", "ffn_g"))
    t.add_argument("--task", type=int, choices=(1, 2, 3, 4))
    t.add_argument("--ratio", type=float, help="sampling ratio s in (0, 1]")
    t.add_argument("--noise", type=float, help="noise ratio relative to the field std")
    t.add_argument("--seed", type=int)
    t.add_argument("--epochs", type=int)
    t.add_argument("--width", type=int)
    t.add_argument("--latent-size", type=int)
    t.add_argument("--data", help="train on an FGRD file instead of a synthetic recipe")
    t.add_argument("--allow-out-of-range", action="store_true",
                   help="permit hyperparameters outside the tuning grid (logged as warnings)")
    figures(t)
    t.set_defaults(func=cmd_train)

    r = common(sub.add_parser("reconstruct", help="decode a checkpoint into an FGRD cube"))
    r.add_argument("--checkpoint", required=True)
    r.add_argument("--times", help="comma-separated times; codes between trained stamps "
                                   "are interpolated")
    r.add_argument("--grid", help="HxW lattice (default: the training lattice)")
    r.add_argument("--observations", help="observation CSV to nowcast from (MMGN only)")
    r.add_argument("--infer-steps", type=int)
    r.add_argument("--infer-init", choices=("zeros", "nearest"))
    r.add_argument("--heatmap", type=int, metavar="FRAME", help="also write FRAME as PGM")
    r.add_argument("--name", default="reconstruction.fgrd")
    r.set_defaults(func=cmd_reconstruct)

    e = common(sub.add_parser("evaluate", help="score prediction cubes against a truth cube"))
    e.add_argument("--truth", required=True)
    e.add_argument("--pred", action="append", required=True, metavar="[NAME=]PATH",
                   help="prediction FGRD (repeatable)")
    e.add_argument("--promotion", action="store_true",
                   help="report the relative gain of the best model over the runner-up")
    e.add_argument("--heatmap", type=int, metavar="FRAME",
                   help="write PGM heatmaps of FRAME (truth values and absolute errors)")
    figures(e)
    e.set_defaults(func=cmd_evaluate)

    a = common(sub.add_parser("analyze", help="latent-code diagnostics for an MMGN checkpoint"))
    a.add_argument("--checkpoint", required=True)
    a.add_argument("--truth", required=True)
    figures(a)
    a.set_defaults(func=cmd_analyze)

    d = common(sub.add_parser("pod", help="snapshot POD energy spectrum of a field"))
    d.add_argument("--field", required=True)
    d.add_argument("--thresholds", help="energy fractions to report (default 0.9,0.99)")
    figures(d)
    d.set_defaults(func=cmd_pod)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except Exception as exc:  # noqa: BLE001 - one-line diagnostics for every failure
        log.debug("traceback", exc_info=True)
        msg = " ".join(str(exc).split()) or type(exc).__name__
        print(f"mmgn {args.command}: error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
