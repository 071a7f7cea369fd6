"""Command-line entry point: ``radsynth <subcommand> ...``.

Exit codes: 0 success, 2 usage/configuration error, 3 data or file-format
error, 4 numerical/domain error. Every command writes a ``*.config.json``
echo of its effective parameters next to its output; all files are
written atomically.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, RadsynthError
from .eval import merge_samples, collect_samples, plot_csv, report_csv, reports_from_samples
from .glcm import STRATEGIES, GlcmParams, bench, entropy_map
from .image_core import RoiMask, extract_patches, quantize
from .io import (
    atomic_write,
    read_image,
    read_map,
    read_mask,
    read_pgm_maxval,
    read_quantized,
    write_map,
    write_quantized,
)
from .surrogate.serialize import load_model, save_model
from .surrogate.train import TrainConfig, history_csv, synthesize_map, train
from .synth_data import DEFAULT_MIX, KINDS, gen_corpus

log = logging.getLogger("radsynth")

MANIFEST_FIELDS = ("index", "kind", "seed", "params", "image_path", "label_path", "g")


# -- helpers ------------------------------------------------------------------

def _seed(args):
    env = os.environ.get("RADSEED")
    if env is not None and env != "":
        try:
            return int(env, 0)
        except ValueError:
            raise ConfigError(f"RADSEED must be an integer, got {env!r}") from None
    return args.seed


def _threads(args):
    t = getattr(args, "threads", None)
    return t if t and t > 0 else (os.cpu_count() or 1)


def _glcm_params(args):
    return GlcmParams(g=args.g, window=args.window, offset=(args.offset_dr, args.offset_dc),
                      symmetric=not args.asymmetric, log_base=args.log_base)


def _params_dict(p: GlcmParams):
    return {"g": p.g, "window": p.window, "offset": list(p.offset), "symmetric": p.symmetric,
            "log_base": p.log_base}


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def config_hash(cfg):
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]


def write_config(path, command, cfg):
    echo = {"command": command, "version": __version__, "config": cfg}
    atomic_write(path, canonical_json(echo))
    return config_hash(cfg)


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def read_manifest(corpus_dir):
    path = Path(corpus_dir) / "manifest.csv"
    if not path.exists():
        raise ConfigError(f"{path} not found; run `radsynth gen` first")
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# -- subcommands --------------------------------------------------------------

def write_corpus(items, out, params: GlcmParams, write_labels=True):
    out = Path(out)
    rows = []
    for it in items:
        img_rel = f"images/img_{it.index:03d}.pgm"
        lab_rel = f"labels/img_{it.index:03d}.fmap"
        write_quantized(it.image, out / img_rel)
        if write_labels:
            write_map(it.label, out / lab_rel)
        rows.append([it.index, it.spec.kind, it.spec.seed, it.spec.params_json(), img_rel,
                     lab_rel, params.g])
    # manifest last, so its presence means the corpus is complete
    atomic_write(out / "manifest.csv", _csv_text(MANIFEST_FIELDS, rows))
    return rows


def cmd_gen(args):
    params = _glcm_params(args)
    seed = _seed(args)
    kinds = tuple(args.kinds) if args.kinds else DEFAULT_MIX
    items = gen_corpus(args.n, args.size, args.g, kinds, seed, params)
    out = Path(args.out)
    write_config(out / "gen.config.json", "gen",
                 {"n": args.n, "size": args.size, "seed": seed, "kinds": list(kinds),
                  "glcm": _params_dict(params)})
    write_corpus(items, out, params)
    print(f"wrote {len(items)} images to {out}")
    return 0


def cmd_map(args):
    params = _glcm_params(args)
    threads = _threads(args)
    if args.manifest:
        corpus = Path(args.manifest)
        rows = read_manifest(corpus)
        for row in rows:
            img = read_quantized(corpus / row["image_path"], params.g)
            write_map(entropy_map(img, params, args.strategy, threads), corpus / row["label_path"])
        write_config(corpus / "map.config.json", "map",
                     {"strategy": args.strategy, "glcm": _params_dict(params)})
        print(f"labelled {len(rows)} images in {corpus}")
        return 0
    if not args.image or not args.out:
        raise ConfigError("map needs --image and --out (or --manifest)")
    if args.quantize:
        img = quantize(read_image(args.image), params.g)
    else:
        img = read_quantized(args.image, params.g)
    t0 = time.perf_counter()
    fmap = entropy_map(img, params, args.strategy, threads)
    elapsed = time.perf_counter() - t0
    write_map(fmap, args.out)
    write_config(args.out + ".config.json", "map",
                 {"image": args.image, "strategy": args.strategy, "quantize": args.quantize,
                  "glcm": _params_dict(params)})
    print(f"{args.strategy} map {img.height}x{img.width} in {elapsed:.3f}s -> {args.out}")
    return 0


def cmd_bench(args):
    params = _glcm_params(args)
    seed = _seed(args)
    sizes = args.sizes
    report = bench(sizes, params, tuple(args.strategies), seed=seed, repeats=args.repeats,
                   threads=args.threads or 1)
    text = report.to_csv()
    if args.out:
        atomic_write(args.out, text)
        write_config(args.out + ".config.json", "bench",
                     {"sizes": sizes, "strategies": args.strategies, "seed": seed,
                      "repeats": args.repeats, "glcm": _params_dict(params)})
    sys.stdout.write(text)
    return 0


def load_dataset(corpus_dir, patch_size):
    corpus = Path(corpus_dir)
    rows = read_manifest(corpus)
    dataset, images, labels = [], [], []
    for row in rows:
        g = int(row.get("g") or 64)
        img = read_quantized(corpus / row["image_path"], g)
        lab_path = corpus / row["label_path"]
        if not lab_path.exists():
            raise ConfigError(
                f"label map {lab_path} is missing; compute oracle labels with "
                f"`radsynth map --manifest {corpus}`"
            )
        lab = read_map(lab_path)
        dataset.append(extract_patches(img, patch_size, lab))
        images.append(img)
        labels.append(lab)
    return rows, dataset, images, labels


def _train_config(args, seed):
    return TrainConfig(minibatch=args.minibatch, epochs=args.epochs,
                       learning_rate=args.lr, momentum=args.momentum,
                       lr_step_epochs=args.lr_step, folds=args.folds, seed=seed)


def cmd_train(args):
    seed = _seed(args)
    config = _train_config(args, seed)
    rows, dataset, images, _ = load_dataset(args.corpus, args.window)
    g = images[0].g
    result = train(dataset, config, g=g)
    out = Path(args.out)
    for k, model in enumerate(result.models):
        save_model(model, out / f"fold_{k}.rsyn")
    atomic_write(out / "history.csv", history_csv(result.history))
    atomic_write(out / "folds.csv", _csv_text(
        ("index", "fold"), sorted((i, k) for k, f in enumerate(result.folds) for i in f)))
    write_config(out / "train.config.json", "train",
                 {"corpus": str(args.corpus), "patch_size": args.window, "g": g,
                  **config.to_dict()})
    print(f"trained {len(result.models)} fold models -> {out}")
    return 0


def cmd_synth(args):
    model = load_model(args.model)
    img = read_quantized(args.image, model.g)
    t0 = time.perf_counter()
    fmap = synthesize_map(model, img, threads=_threads(args))
    elapsed = time.perf_counter() - t0
    write_map(fmap, args.out)
    write_config(args.out + ".config.json", "synth", {"model": args.model, "image": args.image})
    print(f"synthesized {img.height}x{img.width} map in {elapsed:.3f} seconds -> {args.out}")
    return 0


def cmd_eval(args):
    oracle = read_map(args.oracle)
    synth = read_map(args.synth)
    masks = [read_mask(m) for m in (args.mask or [])]
    samples = collect_samples(oracle, synth, masks)
    reports = reports_from_samples(samples, args.exclude_below)
    atomic_write(args.out, report_csv(reports))
    if args.plot:
        atomic_write(args.plot, plot_csv(samples))
    write_config(args.out + ".config.json", "eval",
                 {"oracle": args.oracle, "synth": args.synth, "masks": args.mask or [],
                  "exclude_below": args.exclude_below})
    sys.stdout.write(report_csv(reports))
    return 0


def run_repro(out, seed=7, n=12, size=128, params: GlcmParams | None = None,
              config: TrainConfig | None = None, bench_size=512, threads=1, exclude_below=1e-9,
              kinds=DEFAULT_MIX):
    """gen -> oracle maps -> cross-validated training -> held-out synthesis -> eval.

    Returns the summary dict (also written to ``summary.json``). Timing values
    live under ``summary["timing"]`` and in ``timing.json``; every other output
    is a pure function of the arguments.
    """
    params = params or GlcmParams()
    config = config or TrainConfig(seed=seed)
    out = Path(out)
    cfg = {"seed": seed, "n": n, "size": size, "glcm": _params_dict(params),
           "train": config.to_dict(), "bench_size": bench_size, "kinds": list(kinds),
           "exclude_below": exclude_below}
    chash = write_config(out / "repro.config.json", "repro", cfg)
    timing = {}

    t0 = time.perf_counter()
    items = gen_corpus(n, size, params.g, kinds, seed, params)
    corpus_dir = out / "corpus"
    write_corpus(items, corpus_dir, params)
    timing["gen_seconds"] = time.perf_counter() - t0

    dataset = [extract_patches(it.image, params.window, it.label) for it in items]
    t0 = time.perf_counter()
    result = train(dataset, config, g=params.g)
    timing["train_seconds"] = time.perf_counter() - t0
    models_dir = out / "models"
    for k, model in enumerate(result.models):
        save_model(model, models_dir / f"fold_{k}.rsyn")
    atomic_write(models_dir / "history.csv", history_csv(result.history, timing=False))

    synth_dir = out / "synth"
    parts = []
    synth_times = []
    for it in items:
        model = result.held_out_model(it.index)
        t0 = time.perf_counter()
        smap = synthesize_map(model, it.image, threads=threads)
        synth_times.append(time.perf_counter() - t0)
        write_map(smap, synth_dir / f"img_{it.index:03d}.fmap")
        mask = RoiMask(np.ones(it.image.shape, dtype=bool), it.spec.kind)
        parts.append(collect_samples(it.label, smap, [mask]))
    timing["synth_seconds_per_image"] = float(np.mean(synth_times))
    samples = merge_samples(parts)
    reports = reports_from_samples(samples, exclude_below)
    eval_dir = out / "eval"
    atomic_write(eval_dir / "report.csv", report_csv(reports))
    atomic_write(eval_dir / "plot.csv", plot_csv(samples))

    if bench_size:
        rep = bench([bench_size], params, STRATEGIES, seed=seed, threads=1)
        atomic_write(out / "bench.csv", rep.to_csv())
        timing["speedup_incremental_vs_naive"] = rep.speedup("incremental", bench_size)
        timing["bench_seconds"] = {r.strategy: r.seconds for r in rep.rows}

    pooled = reports[-1]
    summary = {
        "config_hash": chash,
        "pooled": {"n": pooled.n, "pearson_r": pooled.pearson_r,
                   "pct_diff_mean": pooled.pct_diff_mean, "pct_diff_std": pooled.pct_diff_std,
                   "ba_bias": pooled.ba_bias, "ba_loa_low": pooled.ba_loa_low,
                   "ba_loa_high": pooled.ba_loa_high, "excluded": pooled.excluded},
        "per_label": {r.label: {"n": r.n, "pearson_r": r.pearson_r,
                                "pct_diff_mean": r.pct_diff_mean} for r in reports[:-1]},
        "folds": result.folds,
        "final_train_rmse": [row.train_rmse for row in result.history
                             if row.epoch == config.epochs - 1],
    }
    atomic_write(out / "summary.json", canonical_json(summary))
    atomic_write(out / "timing.json", canonical_json(timing))
    atomic_write(models_dir / "history_timed.csv", history_csv(result.history))
    summary["timing"] = timing
    return summary


def cmd_repro(args):
    seed = _seed(args)
    params = _glcm_params(args)
    config = _train_config(args, seed)
    summary = run_repro(args.out, seed, args.n, args.size, params, config,
                        bench_size=args.bench_size, threads=_threads(args))
    p = summary["pooled"]
    print(f"config {summary['config_hash']}: pooled r={p['pearson_r']:.4f} "
          f"pct={p['pct_diff_mean']:.4f}±{p['pct_diff_std']:.4f} "
          f"BA bias={p['ba_bias']:.4f} [{p['ba_loa_low']:.4f}, {p['ba_loa_high']:.4f}]")
    sp = summary["timing"].get("speedup_incremental_vs_naive")
    if sp is not None:
        print(f"incremental speedup vs naive: {sp:.1f}x")
    return 0


# -- argument parsing ---------------------------------------------------------

def _add_glcm(p):
    p.add_argument("--g", type=int, default=64, help="gray levels (default 64)")
    p.add_argument("--window", type=int, default=5, help="odd window width (default 5)")
    p.add_argument("--offset-dr", type=int, default=0)
    p.add_argument("--offset-dc", type=int, default=1)
    p.add_argument("--asymmetric", action="store_true", help="count pairs one way only")
    p.add_argument("--log-base", choices=("natural", "base2"), default="natural")


def _add_train(p):
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--folds", type=int, default=2)
    p.add_argument("--minibatch", type=int, default=2000)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--lr-step", type=int, default=10, help="epochs between lr halvings")


def build_parser():
    ap = argparse.ArgumentParser(prog="radsynth", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic corpus with oracle labels")
    p.add_argument("--n", type=int, default=12)
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--kinds", nargs="+", choices=KINDS)
    p.add_argument("--out", required=True)
    _add_glcm(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("map", help="GLCM entropy map of a PGM image")
    p.add_argument("--image")
    p.add_argument("--out")
    p.add_argument("--manifest", help="label every image of a corpus directory instead")
    p.add_argument("--strategy", choices=STRATEGIES, default="incremental")
    p.add_argument("--quantize", action="store_true",
                   help="treat the PGM as raw intensities and min-max quantize to g levels")
    p.add_argument("--threads", type=int, default=0)
    _add_glcm(p)
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("bench", help="time naive vs incremental maps")
    p.add_argument("--sizes", type=int, nargs="+", default=[128, 256, 512])
    p.add_argument("--strategies", nargs="+", choices=STRATEGIES, default=list(STRATEGIES))
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out")
    _add_glcm(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("train", help="cross-validated surrogate training on a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--window", type=int, default=5, help="patch size (default 5)")
    p.add_argument("--threads", type=int, default=0)
    _add_train(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("synth", help="synthesize an entropy map with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="agreement statistics between two maps")
    p.add_argument("--oracle", required=True)
    p.add_argument("--synth", required=True)
    p.add_argument("--mask", action="append", help="PBM or FMAP ROI mask (repeatable)")
    p.add_argument("--exclude-below", type=float, default=1e-9,
                   help="oracle values below this are left out of the percentage difference")
    p.add_argument("--out", required=True)
    p.add_argument("--plot", help="scatter / Bland-Altman point CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("repro", help="full desk-scale pipeline with summary")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--n", type=int, default=12)
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--bench-size", type=int, default=512, help="0 skips the benchmark")
    p.add_argument("--threads", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_glcm(p)
    _add_train(p)
    p.set_defaults(func=cmd_repro)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except RadsynthError as exc:
        print(f"radsynth {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"radsynth {args.command}: error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
