"""Acceptance gate: one check per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are repeated in
the terminal summary) or directly with ``python tests/test_acceptance.py``.
Criterion 5 trains the full desk-scale model and takes roughly 15 minutes
on one core.
"""

from __future__ import annotations

import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import test_properties as props  # noqa: E402
from radsynth.cli import run_repro  # noqa: E402
from radsynth.eval import bland_altman, percentage_difference, pearson  # noqa: E402
from radsynth.glcm import GlcmParams, bench, entropy_map  # noqa: E402
from radsynth.image_core import QuantizedImage  # noqa: E402
from radsynth.rng import Stream  # noqa: E402
from radsynth.surrogate import build_radsynth, rmse_loss  # noqa: E402
from radsynth.surrogate.train import TrainConfig  # noqa: E402
from radsynth.synth_data import TextureSpec, gen_texture  # noqa: E402
from radsynth.image_core import quantize  # noqa: E402

RESULTS: dict[int, str] = {}


def report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = line
    print(line)
    assert ok, line


# 1 ---------------------------------------------------------------------------

def test_criterion_1_oracle_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(100):
        h, w = (int(v) for v in rng.integers(16, 129, size=2))
        g = int(rng.choice([4, 16, 64]))
        window = int(rng.choice([3, 5, 7]))
        levels = rng.integers(0, g, size=(h, w))
        img = QuantizedImage(levels, g)
        p = GlcmParams(g=g, window=window)
        d = np.abs(entropy_map(img, p, "incremental").values - entropy_map(img, p, "naive").values)
        worst = max(worst, float(d.max()))
    elapsed = time.perf_counter() - t0
    report(1, worst <= 1e-9 and elapsed < 120,
           f"max |incremental - naive| = {worst:.2e} (<= 1e-9) over 100 images in {elapsed:.1f}s")


# 2 ---------------------------------------------------------------------------

def test_criterion_2_performance_ratio():
    p = GlcmParams()
    rep = bench([512], p, ("naive", "incremental"), seed=2, repeats=3, threads=1)
    speedup = rep.speedup("incremental", 512)
    inc_s = next(r.seconds for r in rep.rows if r.strategy == "incremental")
    img = QuantizedImage((Stream(3).uniform((512, 512)) * 64).astype(int), 64)
    single = entropy_map(img, p, "incremental", threads=1).values
    multi = entropy_map(img, p, "incremental", threads=4).values
    same = single.tobytes() == multi.tobytes()
    report(2, speedup >= 10 and inc_s <= 10 and same,
           f"512x512 speedup {speedup:.1f}x (>= 10), incremental {inc_s:.3f}s (<= 10s), "
           f"threads 1 vs 4 bit-identical: {same}")


# 3 ---------------------------------------------------------------------------

def _loss(model, x, y):
    return rmse_loss(model.forward(x, training=True, rng=Stream(99)), y)[0]


def test_criterion_3_gradient_check():
    t0 = time.perf_counter()
    model = build_radsynth(filters=(2, 2, 2, 2), seed=11, dtype=np.float64)
    x = Stream(12).uniform((6, 5, 5, 1))
    y = Stream(13).uniform(6) * 3
    pred = model.forward(x, training=True, rng=Stream(99))
    analytic = {k: v.copy() for k, v in model.backward(rmse_loss(pred, y)[1]).items()}
    h = 1e-5
    worst = 0.0
    count = 0
    for i, name, p in model.parameters():
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            lp = _loss(model, x, y)
            p[idx] = old - h
            lm = _loss(model, x, y)
            p[idx] = old
            num = (lp - lm) / (2 * h)
            a = analytic[(i, name)][idx]
            worst = max(worst, abs(a - num) / max(abs(a), abs(num), 1e-6))
            count += 1
    elapsed = time.perf_counter() - t0
    report(3, worst <= 1e-4 and elapsed < 60,
           f"max relative error {worst:.2e} (<= 1e-4) over {count} parameters in {elapsed:.1f}s")


# 4 ---------------------------------------------------------------------------

EXPECTED_TRACE = [(5, 5, 128), (2, 2, 128), (2, 2, 64), (1, 1, 64), (1, 1, 32), (1, 1, 16),
                  (16,), (1,)]


def test_criterion_4_shape_trace():
    model = build_radsynth(seed=0)
    trace = []
    for _, shape in model.shape_trace():
        if not trace or trace[-1] != shape:
            trace.append(shape)
    model.forward(Stream(1).uniform((4, 5, 5, 1)), training=True, rng=Stream(2))
    out = model.forward(Stream(1).uniform((1, 5, 5, 1)))
    text = " -> ".join("x".join(map(str, s)) for s in trace)
    report(4, trace == EXPECTED_TRACE and out.shape == (1,), text)


# 5 ---------------------------------------------------------------------------

def test_criterion_5_desk_scale_agreement(tmp_path):
    t0 = time.perf_counter()
    summary = run_repro(tmp_path, seed=7, n=12, size=128, params=GlcmParams(),
                        config=TrainConfig(seed=7), bench_size=0)
    elapsed = time.perf_counter() - t0
    p = summary["pooled"]
    ok = p["pearson_r"] >= 0.90 and p["pct_diff_mean"] <= 0.10 and elapsed <= 1800
    report(5, ok,
           f"pooled held-out r = {p['pearson_r']:.4f} (>= 0.90), mean fractional difference "
           f"{p['pct_diff_mean']:.4f} +/- {p['pct_diff_std']:.4f} (<= 0.10, {p['excluded']} "
           f"zero-entropy pixels excluded), {elapsed / 60:.1f} min (<= 30)")


# 6 ---------------------------------------------------------------------------

def test_criterion_6_statistics():
    r = pearson([1, 2, 3], [2, 4, 6])
    ba = bland_altman([1, 2, 3], [2, 3, 4])
    pd = percentage_difference([2, 4], [1, 5])
    ok = (abs(r - 1) <= 1e-12
          and all(abs(a - b) <= 1e-12 for a, b in zip(ba, (-1, -1, -1)))
          and all(abs(a - b) <= 1e-12 for a, b in zip(pd, (0.375, 0.125))))
    report(6, ok, f"pearson {r!r}, bland_altman {ba}, percentage_difference {pd}")


# 7 ---------------------------------------------------------------------------

def test_criterion_7_entropy_analytic():
    zero = True
    for strategy in ("naive", "incremental"):
        m = entropy_map(QuantizedImage(np.full((20, 17), 9), 64), GlcmParams(), strategy)
        zero &= bool(np.all(m.values == 0.0))
    board = (np.indices((16, 16)).sum(0) % 2)
    checker = QuantizedImage(board, 2)
    interior = entropy_map(checker, GlcmParams(g=2))
    interior_err = float(np.abs(interior.values[2:-2, 2:-2] - math.log(2)).max())
    gen = quantize(gen_texture(TextureSpec("checker", 16, 16, 0, {"period": 1})), 2)
    gen_err = float(np.abs(entropy_map(gen, GlcmParams(g=2)).values[2:-2, 2:-2]
                           - math.log(2)).max())
    rng = np.random.default_rng(7)
    in_bounds = True
    for g in (2, 4, 16, 64):
        for window in (3, 5, 7):
            p = GlcmParams(g=g, window=window)
            img = QuantizedImage(rng.integers(0, g, size=(40, 40)), g)
            v = entropy_map(img, p).values
            in_bounds &= bool(v.min() >= 0 and v.max() <= 2 * math.log(g) + 1e-12)
    ok = zero and interior_err <= 1e-12 and gen_err <= 1e-12 and in_bounds
    report(7, ok, f"constant map all zero: {zero}; checkerboard interior |H - ln 2| = "
                  f"{max(interior_err, gen_err):.1e}; values within [0, 2 ln g]: {in_bounds}")


# 8 ---------------------------------------------------------------------------

TIMING_FILES = {"timing.json", "history_timed.csv", "bench.csv"}


def _tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*"))
            if p.is_file() and p.name not in TIMING_FILES}


def test_criterion_8_determinism(tmp_path):
    cfg = TrainConfig(epochs=2, minibatch=500, seed=5)
    runs = []
    for k, threads in enumerate((1, 4)):
        out = tmp_path / f"run{k}"
        run_repro(out, seed=5, n=4, size=32, config=cfg, bench_size=64, threads=threads)
        runs.append(_tree(out))
    same = runs[0] == runs[1]
    kinds = sorted({Path(name).suffix for name in runs[0]})
    report(8, same and {".rsyn", ".fmap", ".csv"} <= set(kinds),
           f"{len(runs[0])} output files byte-identical across thread counts 1 and 4: {same}")


# 9 ---------------------------------------------------------------------------

SUITES = [
    ("relabeling invariance", props.test_relabeling_invariance),
    ("relu idempotence", props.test_relu_idempotent_nonnegative),
    ("dropout expectation", props.test_dropout_expectation),
    ("batchnorm normalization", props.test_batchnorm_train_normalizes),
    ("bland-altman antisymmetry", props.test_bland_altman_antisymmetry),
    ("pearson affine invariance", props.test_pearson_affine_invariance),
]


def test_criterion_9_property_suites():
    failures = []
    for name, fn in SUITES:
        for seed in props.CASES:
            try:
                fn(seed)
            except AssertionError as exc:
                failures.append(f"{name}[{seed}]: {exc}")
    n = len(props.CASES)
    report(9, not failures and n >= 50,
           f"{len(SUITES)} suites x {n} cases, failures: {failures[:3] or 'none'}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
