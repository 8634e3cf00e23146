"""Benchmark the compiled kernels against the pure-numpy fallback.

Times the two hot kernels at the shape the MNIST logistic search hits
(60000 x 10 logit matrix), then a full coordinate-search run on a synthetic
problem with each backend end to end.

Usage: python benchmarks/bench_backends.py [--rows 60000] [--quick]
"""

import argparse
import statistics
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from conntra import data  # noqa: E402
from conntra._kernels import get_backend  # noqa: E402
from conntra.models import ModelSpec  # noqa: E402
from conntra.pretrain import PretrainConfig, pretrain  # noqa: E402
from conntra.rng import SplitMix64  # noqa: E402


def available_backends():
    names = ["python"]
    try:
        get_backend("compiled")
        names.append("compiled")
    except ImportError:
        print("note: compiled kernels not built (python setup.py build_ext --inplace)")
    return names


def time_call(fn, *args, repeats=30):
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples)


def bench_kernels(rows, repeats):
    rng = SplitMix64(0)
    logits = np.ascontiguousarray(rng.uniform_array(-4, 4, rows * 10).reshape(rows, 10))
    y_idx = np.array([rng.next_below(10) for _ in range(rows)], dtype=np.int64)
    y_onehot = np.eye(10, dtype=np.uint8)[y_idx]
    backup = logits[:, 3].copy()
    x = np.ascontiguousarray(rng.uniform_array(0, 1, rows))

    print(f"\nkernel timings, {rows} x 10 logits (median of {repeats}):")
    print(f"{'kernel':<22}" + "".join(f"{n:>14}" for n in available_backends()))
    rows_out = {
        "xent_from_logits": lambda kb: time_call(kb.xent_from_logits, logits, y_idx, repeats=repeats),
        "euclid_from_logits": lambda kb: time_call(kb.euclid_from_logits, logits, y_onehot, repeats=repeats),
        "set_column_scaled": lambda kb: time_call(
            kb.set_column_scaled, logits, 3, backup, x, 0.5, repeats=repeats
        ),
    }
    for name, runner in rows_out.items():
        cells = []
        for backend in available_backends():
            cells.append(f"{runner(get_backend(backend)) * 1e3:>11.3f} ms")
        print(f"{name:<22}" + "".join(f"{c:>14}" for c in cells))


def bench_end_to_end(quick):
    import importlib
    import os

    n = 400 if quick else 2000
    print(f"\nend-to-end coordinate search (logistic, {n} samples x 64 features, T=1):")
    results = {}
    for backend in available_backends():
        os.environ["CONNTRA_KERNELS"] = backend
        import conntra._kernels as kern
        import conntra.train as train_mod

        importlib.reload(kern)
        importlib.reload(train_mod)
        ds = data.synthetic_blobs(n, 64, 4, seed=3)
        spec = ModelSpec.logistic(64, 4)
        w_pre, _ = pretrain(spec, ds, PretrainConfig(epochs=5, batch_size=50, seed=1))
        t0 = time.perf_counter()
        _, eps, report = train_mod.conntra_train(
            spec, ds, w_pre, __import__("conntra.domain", fromlist=["ternary"]).ternary(),
            train_mod.ConntraConfig(iterations_T=1, seed=2, record_every=10**9),
        )
        wall = time.perf_counter() - t0
        results[backend] = (wall, eps, report.loss_evaluations)
        print(f"  {backend:<10} {wall * 1e3:>9.1f} ms   loss {eps:.6f}   evals {report.loss_evaluations}")
    os.environ.pop("CONNTRA_KERNELS", None)
    if len(results) == 2:
        speedup = results["python"][0] / results["compiled"][0]
        print(f"  compiled speedup: {speedup:.2f}x (losses agree: "
              f"{abs(results['python'][1] - results['compiled'][1]) < 1e-9})")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--rows", type=int, default=60_000)
    ap.add_argument("--repeats", type=int, default=30)
    ap.add_argument("--quick", action="store_true")
    args = ap.parse_args()
    bench_kernels(args.rows, args.repeats)
    bench_end_to_end(args.quick)
