"""Continuous-weight minibatch gradient descent.

This is both the producer of the pretrained weights that the coordinate
search discretizes, and the comparison baseline for the benchmark harness.
Plain SGD, no momentum: the baseline stays auditable and every number it
produces is reproducible from (spec, data, config).

Weight files use the ``CNTRAWTS`` container: 8-byte magic, u64-le length,
then the flat vector as float64-le.
"""

import math
import struct
import time
from dataclasses import asdict, dataclass

import numpy as np

from . import models
from ._kernels import xent_from_logits
from .domain import memory_account
from .errors import FormatError, InvalidArgumentError, TrainingDivergedError
from .models import LabeledDataset, ModelSpec, ParamVector, _layers
from .report import CurvePoint, TrainReport
from .rng import SplitMix64

WEIGHTS_MAGIC = b"CNTRAWTS"


@dataclass(frozen=True)
class PretrainConfig:
    learning_rate: float = 0.1
    epochs: int = 50
    batch_size: int = 100
    seed: int = 0
    init_scale: float | None = None  # None: per-layer sqrt(6 / (fan_in + fan_out))

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise InvalidArgumentError("learning_rate must be positive")
        # epochs == 0 is allowed and returns the initialization unchanged.
        if self.epochs < 0 or self.batch_size < 1:
            raise InvalidArgumentError("epochs must be >= 0 and batch_size >= 1")


def _fans(layer):
    if isinstance(layer, models._Dense):
        return layer.n_in, layer.n_out
    # conv: receptive-field convention
    k2 = layer.k * layer.k
    return k2 * layer.c_in, k2 * layer.c_out


def init_params(spec: ModelSpec, seed: int, init_scale: float | None = None) -> ParamVector:
    """Uniform init in [-s, s] per layer, s = sqrt(6/(fan_in+fan_out)) by default."""
    rng = SplitMix64(seed)
    chunks = []
    for layer in _layers(spec):
        if layer.n_params == 0:
            continue
        s = init_scale if init_scale is not None else math.sqrt(6.0 / sum(_fans(layer)))
        chunks.append(rng.uniform_array(-s, s, layer.n_params))
    return ParamVector(np.concatenate(chunks), spec)


def backprop_gradient(spec: ModelSpec, params: ParamVector, batch: LabeledDataset) -> np.ndarray:
    """Exact gradient of mean cross-entropy w.r.t. every parameter (flat layout)."""
    if params.spec != spec:
        raise InvalidArgumentError("params were built for a different model spec")
    _, grad = models.forward_backward(
        spec, params.values, batch.features, batch.labels_onehot.astype(np.float64)
    )
    return grad


def _errors_and_loss(spec, values, data, validation):
    pv = ParamVector(values, spec)
    z = models.logits(spec, pv, data.features)
    loss = xent_from_logits(z, data.label_indices)
    train_err = 100.0 * np.count_nonzero(np.argmax(z, axis=1) != data.label_indices) / data.n
    val_err = None
    if validation is not None:
        pred = models.forward(spec, pv, validation)
        val_err = models.classification_error(pred, validation.labels_onehot)
    return train_err, val_err, loss


def pretrain(
    spec: ModelSpec,
    data: LabeledDataset,
    cfg: PretrainConfig,
    validation: LabeledDataset | None = None,
) -> tuple[ParamVector, TrainReport]:
    """Minibatch SGD for cfg.epochs; deterministic given cfg.seed."""
    t0 = time.perf_counter()
    values = init_params(spec, cfg.seed, cfg.init_scale).values.copy()
    rng = SplitMix64(cfg.seed + 1)  # batch-order stream, distinct from init stream
    n = data.n

    curve = []
    train_err, val_err, loss = _errors_and_loss(spec, values, data, validation)
    curve.append(CurvePoint(0, train_err, val_err, loss))

    steps = 0
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            batch_X = data.features[idx]
            batch_Y = data.labels_onehot[idx].astype(np.float64)
            _, grad = models.forward_backward(spec, values, batch_X, batch_Y)
            values -= cfg.learning_rate * grad
            steps += 1
        train_err, val_err, loss = _errors_and_loss(spec, values, data, validation)
        if not math.isfinite(loss):
            raise TrainingDivergedError(f"loss became non-finite at epoch {epoch}", epoch)
        curve.append(CurvePoint(epoch, train_err, val_err, loss))

    params = ParamVector(values, spec)
    report = TrainReport(
        algorithm="sgd",
        seed=cfg.seed,
        curve=tuple(curve),
        final_params=params,
        final_loss=curve[-1].optimal_loss,
        wall_seconds=time.perf_counter() - t0,
        memory=memory_account(params.values.size, 64),
        loss_evaluations=steps,
        config=asdict(cfg),
    )
    return params, report


def save_weights(path, params) -> None:
    """Write a flat weight vector in the CNTRAWTS container."""
    values = params.values if isinstance(params, ParamVector) else np.asarray(params)
    with open(path, "wb") as fh:
        fh.write(WEIGHTS_MAGIC)
        fh.write(struct.pack("<Q", values.size))
        fh.write(values.astype("<f8").tobytes())


def load_weights(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != WEIGHTS_MAGIC:
        raise FormatError(f"bad magic at byte 0: {data[:8]!r} != {WEIGHTS_MAGIC!r}")
    if len(data) < 16:
        raise FormatError("truncated header at byte 8")
    (length,) = struct.unpack_from("<Q", data, 8)
    if len(data) != 16 + 8 * length:
        raise FormatError(f"weight payload at byte 16: {len(data) - 16} bytes, expected {8 * length}")
    return np.frombuffer(data, dtype="<f8", count=length, offset=16).copy()
