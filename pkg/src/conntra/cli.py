"""Command-line front end: pretrain -> discretize -> train -> evaluate -> report.

Commands
--------
pretrain     continuous-weight SGD baseline; writes CNTRAWTS weights + report
train        full pipeline: (pretrain or --weights), discretize, coordinate
             global search; writes packed CNTRAPK1 weights + report + curve
evaluate     error/memory metrics for a saved weight file (float or packed)
reduce-qubo  map a QUBO text instance to a training instance and verify the
             optimal solutions coincide by brute force
report       consolidated comparison table across run directories

Every JSON document echoes the resolved run configuration and the seed, and
validates against the schemas in ``conntra/schemas``.  Datasets resolve
against --data-dir, else $CONNTRA_DATA_DIR, else ./data.  Exit codes: 0 ok,
2 usage, 3 missing file, 4 format error, 5 invalid argument/domain,
6 training diverged, 7 capacity/definiteness/state errors.
"""

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import data as data_io
from . import models, qubo, report
from .domain import DiscreteSet, load_packed, memory_account, pack, save_packed, unpack
from .errors import (
    CapacityError,
    ConntraError,
    DomainError,
    FormatError,
    InvalidArgumentError,
    InvalidStateError,
    NotPositiveDefiniteError,
    TrainingDivergedError,
)
from .models import ModelSpec, ParamVector
from .pretrain import PretrainConfig, load_weights, pretrain, save_weights
from .train import ConntraConfig, conntra_train

_EXIT_CODES = (
    (TrainingDivergedError, 6),
    (CapacityError, 7),
    (NotPositiveDefiniteError, 7),
    (InvalidStateError, 7),
    (FileNotFoundError, 3),
    (FormatError, 4),
    (DomainError, 5),
    (InvalidArgumentError, 5),
    (ConntraError, 5),
)

_MODELS = ("logreg", "mlp", "cnn")
_DATASETS = ("mnist", "iris", "synthetic")
_LOSS_FLAGS = {"xent": "cross_entropy", "euclid": "euclidean"}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="conntra",
        description="Train neural networks whose weights live in a finite discrete set.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0, help="seed for every stochastic choice")
        p.add_argument("--out", default="runs/latest", help="output directory")
        p.add_argument("--config", default=None, help="JSON file with defaults for these flags")

    def model_data(p):
        p.add_argument("--model", choices=_MODELS, default="logreg")
        p.add_argument("--dataset", choices=_DATASETS, default="synthetic")
        p.add_argument("--data-dir", default=None, help="dataset root (default $CONNTRA_DATA_DIR or ./data)")
        p.add_argument("--hidden", default="10,13", help="mlp hidden sizes, comma separated")
        p.add_argument("--train-fraction", type=float, default=0.8)
        p.add_argument("--split-seed", type=int, default=0)
        p.add_argument("--subset", type=int, default=None, help="cap the training set at N samples (stratified)")
        p.add_argument("--synthetic-n", type=int, default=600)
        p.add_argument("--synthetic-d", type=int, default=16)
        p.add_argument("--synthetic-k", type=int, default=4)
        p.add_argument("--synthetic-seed", type=int, default=0)

    def pretrain_flags(p):
        p.add_argument("--epochs", type=int, default=None, help="default: 50 (logreg/mlp), 20 (cnn)")
        p.add_argument("--learning-rate", type=float, default=None, help="default: 0.1 (logreg/mlp), 0.01 (cnn)")
        p.add_argument("--batch-size", type=int, default=100)
        p.add_argument("--init-scale", type=float, default=None)

    p = sub.add_parser("pretrain", help="continuous-weight SGD baseline")
    common(p), model_data(p), pretrain_flags(p)

    p = sub.add_parser("train", help="discretize pretrained weights and run the coordinate search")
    common(p), model_data(p), pretrain_flags(p)
    p.add_argument("--weights", default=None, help="CNTRAWTS file to start from (skips pretraining)")
    p.add_argument("--omega", default="-1,0,1", help="comma-separated discrete values (use --omega=-1,0,1)")
    p.add_argument("--iterations-T", dest="iterations_t", type=int, default=1)
    p.add_argument("--search-loss", choices=sorted(_LOSS_FLAGS), default="xent")
    p.add_argument("--eval-mode", choices=("full", "incremental"), default="incremental")
    p.add_argument("--record-every", type=int, default=None, help="default: total_epochs / 100")

    p = sub.add_parser("evaluate", help="metrics for a saved weight file")
    common(p), model_data(p)
    p.add_argument("--weights", required=False, default=None, help="CNTRAWTS or CNTRAPK1 file")
    p.add_argument("--omega", default="-1,0,1", help="domain used for the packed-memory column")

    p = sub.add_parser("reduce-qubo", help="reduce a QUBO text instance to a training instance")
    common(p)
    p.add_argument("--qubo", required=False, default=None, help="instance in the text format")
    p.add_argument("--skip-brute-force", action="store_true")

    p = sub.add_parser("report", help="comparison table across run directories")
    common(p)
    p.add_argument("--run", action="append", default=None, help="run directory (repeatable)")
    return parser


def _apply_config_file(parser, args, argv):
    if not args.config:
        return args
    try:
        cfg = json.loads(Path(args.config).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{args.config}: {exc}") from None
    if not isinstance(cfg, dict):
        raise FormatError(f"{args.config}: expected a JSON object")
    known = set(vars(args))
    unknown = sorted(set(cfg) - known)
    if unknown:
        raise InvalidArgumentError(f"unknown config keys: {', '.join(unknown)}")
    explicit = set()
    for arg in argv:
        if arg.startswith("--"):
            explicit.add(arg.split("=", 1)[0].lstrip("-").replace("-", "_"))
    for key, value in cfg.items():
        if key not in explicit:
            setattr(args, key, value)
    return args


def _parse_omega(text) -> DiscreteSet:
    try:
        values = [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise InvalidArgumentError(f"cannot parse omega {text!r}") from None
    return DiscreteSet(np.array(values))


def _data_dir(args) -> Path:
    return Path(args.data_dir or os.environ.get("CONNTRA_DATA_DIR") or "data")


def _resolve_dataset(args, flatten: bool):
    root = _data_dir(args)
    if args.dataset == "mnist":
        mnist_root = root / "mnist" if (root / "mnist").is_dir() else root
        train, val = data_io.load_mnist_dir(mnist_root, flatten=flatten)
    elif args.dataset == "iris":
        local = root / "iris.csv"
        ds = data_io.load_iris_csv(local if local.exists() else None)
        train, val = data_io.split(ds, data_io.SplitSpec(args.train_fraction, args.split_seed))
    else:
        d = 784 if not flatten else args.synthetic_d
        ds = data_io.synthetic_blobs(args.synthetic_n, d, args.synthetic_k, args.synthetic_seed)
        train, val = data_io.split(ds, data_io.SplitSpec(args.train_fraction, args.split_seed))
        if not flatten:
            train, val = data_io.as_images(train, 28, 28), data_io.as_images(val, 28, 28)
    if args.subset is not None:
        train = data_io.subset(train, args.subset, seed=args.split_seed)
    return train, val


def _resolve_model(args, train):
    k = train.class_count
    if args.model == "logreg":
        return ModelSpec.logistic(train.features.shape[1], k)
    if args.model == "mlp":
        hidden = tuple(int(h) for h in args.hidden.split(",") if h.strip())
        return ModelSpec.mlp(train.features.shape[1], hidden, k)
    if train.features.shape[1:] != (28, 28, 1):
        raise InvalidArgumentError("the cnn model needs 28x28x1 images")
    return ModelSpec.lenet5(k)


def _resolve_model_data(args):
    flatten = args.model != "cnn"
    train, val = _resolve_dataset(args, flatten)
    return _resolve_model(args, train), train, val


def _run_config(args, skip=("config", "out")):
    cfg = {k: v for k, v in vars(args).items() if k not in skip}
    if hasattr(args, "data_dir"):
        cfg["data_dir"] = str(_data_dir(args))
    return cfg


def _pretrain_config(args, model: str) -> PretrainConfig:
    epochs = args.epochs if args.epochs is not None else (20 if model == "cnn" else 50)
    lr = args.learning_rate if args.learning_rate is not None else (0.01 if model == "cnn" else 0.1)
    return PretrainConfig(
        learning_rate=lr,
        epochs=epochs,
        batch_size=args.batch_size,
        seed=args.seed,
        init_scale=args.init_scale,
    )


def _emit_report(out: Path, name: str, rep, run_config: dict):
    doc = rep.to_dict()
    # trainer-level echo wins over raw flag values on key collisions
    # (e.g. omega as a parsed list, search_loss in canonical spelling)
    doc["config"] = {**run_config, **doc["config"]}
    report.write_json(out / f"{name}_report.json", doc)
    (out / f"{name}_curve.csv").write_text(report.curve_csv(doc))
    return doc


def _run_pretrain(args, out: Path):
    spec, train, val = _resolve_model_data(args)
    cfg = _pretrain_config(args, args.model)
    params, rep = pretrain(spec, train, cfg, validation=val)
    save_weights(out / "pretrained.cntrawts", params)
    _emit_report(out, "pretrain", rep, _run_config(args))
    last = rep.curve[-1]
    print(
        f"pretrain[{args.model}/{args.dataset}] train_err={last.training_error_pct:.2f}% "
        f"val_err={last.validation_error_pct:.2f}% memory={rep.memory.kilobytes:.2f}KB "
        f"wall={rep.wall_seconds:.1f}s"
    )
    return spec, train, val, params


def cmd_pretrain(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _run_pretrain(args, out)
    return 0


def cmd_train(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    omega = _parse_omega(args.omega)
    if args.weights:
        spec, train, val = _resolve_model_data(args)
        values = load_weights(args.weights)
        w_pre = ParamVector(values, spec)
    else:
        spec, train, val, w_pre = _run_pretrain(args, out)

    total_epochs = args.iterations_t * w_pre.values.size
    record_every = args.record_every or max(1, total_epochs // 100)
    cfg = ConntraConfig(
        iterations_T=args.iterations_t,
        seed=args.seed,
        search_loss=_LOSS_FLAGS[args.search_loss],
        eval_mode=args.eval_mode,
        record_every=record_every,
    )
    w_opt, eps_opt, rep = conntra_train(spec, train, w_pre, omega, cfg, validation=val)
    save_packed(out / "weights_packed.cntrapk", pack(w_opt.values, omega))
    _emit_report(out, "train", rep, _run_config(args))

    m64 = memory_account(w_opt.values.size, 64)
    mpk = rep.memory
    last = rep.curve[-1]
    val_txt = "-" if last.validation_error_pct is None else f"{last.validation_error_pct:.2f}%"
    print(
        f"conntra[{args.model}/{args.dataset}] train_err={last.training_error_pct:.2f}% "
        f"val_err={val_txt} loss={eps_opt:.6g} "
        f"memory={mpk.kilobytes:.2f}KB (float64 {m64.kilobytes:.2f}KB, "
        f"{m64.kilobytes / mpk.kilobytes:.0f}x) wall={rep.wall_seconds:.1f}s"
    )
    return 0


def _load_any_weights(path, spec):
    with open(path, "rb") as fh:
        magic = fh.read(8)
    if magic == b"CNTRAPK1":
        packed = load_packed(path)
        values, bits = unpack(packed), packed.domain.bits_per_code
    else:
        values, bits = load_weights(path), None
    if values.size != models.param_count(spec):
        raise InvalidArgumentError(
            f"{path}: {values.size} weights do not fit the model ({models.param_count(spec)})"
        )
    return ParamVector(values, spec), bits


def cmd_evaluate(args):
    if not args.weights:
        raise InvalidArgumentError("evaluate needs --weights")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    spec, train, val = _resolve_model_data(args)
    params, packed_bits = _load_any_weights(args.weights, spec)
    bits = packed_bits if packed_bits is not None else _parse_omega(args.omega).bits_per_code

    train_err = models.classification_error(models.forward(spec, params, train), train.labels_onehot)
    val_err = models.classification_error(models.forward(spec, params, val), val.labels_onehot)
    m64 = memory_account(params.values.size, 64)
    mpk = memory_account(params.values.size, bits)
    doc = {
        "kind": "metrics",
        "seed": args.seed,
        "wall_seconds": time.perf_counter() - t0,
        "config": {**_run_config(args), "weights": str(args.weights)},
        "training_error_pct": train_err,
        "validation_error_pct": val_err,
        "memory_float64": m64.as_dict(),
        "memory_packed": mpk.as_dict(),
        "memory_ratio": m64.kilobytes / mpk.kilobytes,
    }
    report.write_json(out / "metrics.json", doc)
    print(
        f"evaluate[{args.model}/{args.dataset}] train_err={train_err:.2f}% val_err={val_err:.2f}% "
        f"memory={mpk.kilobytes:.2f}KB vs {m64.kilobytes:.2f}KB ({doc['memory_ratio']:.0f}x)"
    )
    return 0


def cmd_reduce_qubo(args):
    if not args.qubo:
        raise InvalidArgumentError("reduce-qubo needs --qubo")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    text = Path(args.qubo).read_text()
    instance = qubo.parse_qubo_text(text)
    reduced = qubo.reduce_qubo(instance)
    (out / "training_instance.txt").write_text(qubo.format_training_text(reduced))

    match = gap = qmin = tmin = None
    if not args.skip_brute_force and instance.dim <= qubo.BRUTE_FORCE_MAX_DIM:
        zq, vq = qubo.brute_force_qubo(instance)
        zt, vt = qubo.brute_force_training(reduced)
        shift = reduced.offset / reduced.X.shape[0]
        match = bool(np.array_equal(zq, zt))
        gap = abs(vq - (vt + shift))
        qmin, tmin = vq, vt
    doc = {
        "kind": "qubo_reduction",
        "seed": args.seed,
        "wall_seconds": time.perf_counter() - t0,
        "config": {**_run_config(args), "qubo": str(args.qubo)},
        "dimension": instance.dim,
        "constant_shift": reduced.offset / reduced.X.shape[0],
        "argmin_match": match,
        "max_abs_objective_gap": gap,
        "qubo_minimum": qmin,
        "training_minimum": tmin,
    }
    report.write_json(out / "reduction.json", doc)
    verdict = "skipped" if match is None else str(match).lower()
    print(f"argmin match: {verdict}")
    return 0


def cmd_report(args):
    runs = args.run or []
    if not runs:
        raise InvalidArgumentError("report needs at least one --run directory")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for run in runs:
        run = Path(run)
        if not run.is_dir():
            raise FileNotFoundError(f"run directory {run} does not exist")
        for name in ("pretrain_report.json", "train_report.json"):
            path = run / name
            if not path.exists():
                continue
            doc = json.loads(path.read_text())
            report.validate_document(doc)
            last = doc["curve"][-1]
            val = last["validation_error_pct"]
            rows.append(
                {
                    "run": run.name,
                    "algorithm": doc["algorithm"],
                    "training_error_pct": last["training_error_pct"],
                    "validation_error_pct": val if val is not None else "",
                    "memory_kilobytes": doc["memory"]["kilobytes"],
                    "wall_seconds": doc["wall_seconds"],
                }
            )
    if not rows:
        raise FileNotFoundError("no *_report.json found in the given runs")
    header = list(rows[0])
    lines = [",".join(header)]
    lines += [",".join(str(r[h]) for h in header) for r in rows]
    (out / "comparison.csv").write_text("\n".join(lines) + "\n")
    widths = [max(len(str(r[h])) for r in rows + [dict(zip(header, header))]) for h in header]
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for r in rows:
        print("  ".join(str(r[h]).ljust(w) for h, w in zip(header, widths)))
    return 0


_HANDLERS = {
    "pretrain": cmd_pretrain,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "reduce-qubo": cmd_reduce_qubo,
    "report": cmd_report,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        args = _apply_config_file(parser, args, argv)
        return _HANDLERS[args.command](args)
    except Exception as exc:
        for exc_type, code in _EXIT_CODES:
            if isinstance(exc, exc_type):
                print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
                return code
        raise


if __name__ == "__main__":
    sys.exit(main())
