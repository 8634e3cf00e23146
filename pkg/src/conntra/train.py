"""Coordinate global-search training over a finite discrete weight domain.

The trainer (CoNNTrA) runs in three phases:

1. Discretize the pretrained weights onto the domain.
2. Evaluate the initial loss and set the optimum (W_opt, eps_opt).
3. For T iterations, run |W| epochs.  Each epoch draws one coordinate
   uniformly at random (with replacement), tries every domain value in
   ascending order, and accepts whenever the loss is <= eps_opt, so among
   tied candidates the largest value wins.  After the scan the coordinate is
   set back to W_opt's entry.

Phase 3 therefore performs exactly ``T * |W| * |omega|`` loss evaluations,
and eps_opt never increases.  Everything is deterministic given the seed.

Candidate evaluation strategies (``eval_mode``):

* ``full`` -- recompute the whole forward pass per candidate (reference).
* ``incremental`` -- for logistic regression, keep the logit matrix cached
  and rewrite only the affected column from a per-scan snapshot (losses
  track the full recompute within 1e-9); for deeper models, keep every
  layer input cached and recompute only from the layer owning the changed
  weight, which is bit-identical to the full pass.
"""

import math
import time
import zlib
from dataclasses import asdict, dataclass

import numpy as np

from . import models
from ._kernels import (
    euclid_from_logits,
    set_column_scaled,
    set_column_shift,
    xent_from_logits,
)
from .domain import DiscreteSet, discretize, memory_account
from .errors import (
    DomainError,
    InvalidArgumentError,
    InvalidStateError,
    TrainingDivergedError,
)
from .models import LabeledDataset, ModelSpec, ParamVector, softmax
from .report import CurvePoint, TrainReport
from .rng import SplitMix64

SEARCH_LOSSES = ("cross_entropy", "euclidean")
EVAL_MODES = ("full", "incremental")


@dataclass(frozen=True)
class ConntraConfig:
    iterations_T: int = 1
    seed: int = 0
    search_loss: str = "cross_entropy"
    eval_mode: str = "incremental"
    record_every: int = 1  # epochs between error-curve samples

    def __post_init__(self):
        if self.iterations_T < 1:
            raise InvalidArgumentError("iterations_T must be >= 1")
        if self.record_every < 1:
            raise InvalidArgumentError("record_every must be >= 1")
        if self.search_loss not in SEARCH_LOSSES:
            raise InvalidArgumentError(f"search_loss must be one of {SEARCH_LOSSES}")
        if self.eval_mode not in EVAL_MODES:
            raise InvalidArgumentError(f"eval_mode must be one of {EVAL_MODES}")


def _logit_loss(kind):
    if kind == "cross_entropy":
        return lambda z, y_idx, y_onehot: xent_from_logits(z, y_idx)
    return lambda z, y_idx, y_onehot: euclid_from_logits(z, y_onehot)


class _FullEvaluator:
    """Reference strategy: every evaluation is a complete forward pass."""

    def __init__(self, spec, values, data, loss_kind, loss_callable=None):
        self.spec, self.values = spec, values
        self.X, self.y_idx = data.features, data.label_indices
        self.y_onehot = data.labels_onehot
        self.loss_callable = loss_callable
        self._loss = _logit_loss(loss_kind)

    def _eval(self):
        z = models.logits(self.spec, ParamVector(self.values, self.spec), self.X)
        if self.loss_callable is not None:
            return float(self.loss_callable(softmax(z), self.y_onehot))
        return self._loss(z, self.y_idx, self.y_onehot)

    def current_loss(self):
        return self._eval()

    def begin_scan(self, i):
        pass

    def eval_candidate(self, i, v):
        self.values[i] = v
        return self._eval()

    def commit(self, i, v):
        self.values[i] = v

    def train_error_pct(self):
        z = models.logits(self.spec, ParamVector(self.values, self.spec), self.X)
        wrong = np.count_nonzero(np.argmax(z, axis=1) != self.y_idx)
        return 100.0 * wrong / self.X.shape[0]


class _ColumnEvaluator:
    """Logistic regression: a changed weight touches one logit column only.

    Per scan, the affected column is snapshotted once and every candidate is
    written as ``snapshot + (v - original) * x``, so an unchanged coordinate
    restores the column bit-exactly and no drift accumulates across epochs.
    Between scans the cached loss equals the loss of the cached logits, so
    the candidate matching the pre-scan value is answered from the cache
    (bit-identical to recomputing, since the zero-delta write restores the
    column exactly).
    """

    def __init__(self, spec, values, data, loss_kind):
        self.spec, self.values = spec, values
        self.d, self.k = spec.input_shape[0], spec.class_count
        # column-contiguous feature copy: the scan reads whole columns
        self.Xf = np.asfortranarray(data.features)
        self.y_idx, self.y_onehot = data.label_indices, data.labels_onehot
        self._loss = _logit_loss(loss_kind)
        self.logits = np.ascontiguousarray(
            models.logits(spec, ParamVector(values, spec), data.features)
        )
        self._cached_loss = self._loss(self.logits, self.y_idx, self.y_onehot)
        self._backup = None
        self._orig = None

    def _coord(self, i):
        if i < self.d * self.k:
            return self.Xf[:, i // self.k], i % self.k
        return None, i - self.d * self.k

    def current_loss(self):
        return self._cached_loss

    def begin_scan(self, i):
        _, col = self._coord(i)
        self._backup = self.logits[:, col].copy()
        self._orig = self.values[i]

    def _write(self, i, v):
        x, col = self._coord(i)
        delta = v - self._orig
        if x is None:
            set_column_shift(self.logits, col, self._backup, delta)
        else:
            set_column_scaled(self.logits, col, self._backup, x, delta)
        self.values[i] = v

    def eval_candidate(self, i, v):
        if v == self._orig:
            self.values[i] = v
            return self._cached_loss
        self._write(i, v)
        return self._loss(self.logits, self.y_idx, self.y_onehot)

    def commit(self, i, v):
        self._write(i, v)
        if v != self._orig:
            self._cached_loss = self._loss(self.logits, self.y_idx, self.y_onehot)

    def train_error_pct(self):
        wrong = np.count_nonzero(np.argmax(self.logits, axis=1) != self.y_idx)
        return 100.0 * wrong / self.logits.shape[0]


class _LayerCachedEvaluator:
    """Deep models: cache every layer input, recompute from the owning layer.

    The suffix recompute uses the same layer code as the full pass on
    identical cached inputs, so losses are bit-identical to ``full`` mode.
    A candidate equal to the pre-scan weight leaves every activation as
    cached (recomputing would reproduce them bit for bit), so it is answered
    from the cached loss, and a no-change commit skips the recompute.
    """

    def __init__(self, spec, values, data, loss_kind):
        self.spec, self.values = spec, values
        self.y_idx, self.y_onehot = data.label_indices, data.labels_onehot
        self._loss = _logit_loss(loss_kind)
        self.acts = models.layer_inputs(spec, ParamVector(values, spec), data.features)
        self._cached_loss = self._loss(self.acts[-1], self.y_idx, self.y_onehot)
        self._orig = None

    def current_loss(self):
        return self._cached_loss

    def begin_scan(self, i):
        self._orig = self.values[i]

    def eval_candidate(self, i, v):
        self.values[i] = v
        if v == self._orig:
            return self._cached_loss
        start = models.owning_layer(self.spec, i)
        z = models.logits_from(self.spec, self.values, self.acts, start)
        return self._loss(z, self.y_idx, self.y_onehot)

    def commit(self, i, v):
        self.values[i] = v
        if v == self._orig:
            return
        start = models.owning_layer(self.spec, i)
        layers = models._layers(self.spec)
        slices = models._layer_params(self.spec, self.values)
        x = self.acts[start]
        for j in range(start, len(layers)):
            x = layers[j].forward(x, slices[j])
            self.acts[j + 1] = x
        self._cached_loss = self._loss(self.acts[-1], self.y_idx, self.y_onehot)

    def train_error_pct(self):
        z = self.acts[-1]
        wrong = np.count_nonzero(np.argmax(z, axis=1) != self.y_idx)
        return 100.0 * wrong / z.shape[0]


def _build_evaluator(spec, values, data, cfg, loss_callable):
    if loss_callable is not None or cfg.eval_mode == "full":
        return _FullEvaluator(spec, values, data, cfg.search_loss, loss_callable)
    if spec.kind == "logistic_regression":
        return _ColumnEvaluator(spec, values, data, cfg.search_loss)
    return _LayerCachedEvaluator(spec, values, data, cfg.search_loss)


def conntra_train(
    spec: ModelSpec,
    data: LabeledDataset,
    w_pre: ParamVector,
    omega: DiscreteSet,
    cfg: ConntraConfig,
    loss=None,
    validation: LabeledDataset | None = None,
) -> tuple[ParamVector, float, TrainReport]:
    """Run the three-phase coordinate global search; see the module docstring.

    ``loss`` may be a callable ``(probabilities, labels_onehot) -> float``;
    it overrides ``cfg.search_loss`` and forces full evaluation.  Returns
    (optimal weights, optimal loss, report).
    """
    if w_pre.spec != spec:
        raise InvalidArgumentError("w_pre was built for a different model spec")
    if not isinstance(omega, DiscreteSet):
        raise InvalidArgumentError("omega must be a DiscreteSet")
    t0 = time.perf_counter()

    # Phase 1: discretization
    values = discretize(w_pre.values, omega)

    # Phase 2: initialization
    evaluator = _build_evaluator(spec, values, data, cfg, loss)
    eps_opt = evaluator.current_loss()
    if not math.isfinite(eps_opt):
        raise TrainingDivergedError("initial loss is non-finite", 0)
    w_opt = values.copy()

    n_weights = values.size
    total_epochs = cfg.iterations_T * n_weights
    candidates = omega.values

    def _record(epoch, curve):
        val_err = None
        if validation is not None:
            pred = models.forward(spec, ParamVector(values, spec), validation)
            val_err = models.classification_error(pred, validation.labels_onehot)
        curve.append(CurvePoint(epoch, evaluator.train_error_pct(), val_err, eps_opt))

    curve = []
    _record(0, curve)

    # Phase 3: training
    rng = SplitMix64(cfg.seed)
    n_evals = 0
    epoch = 0
    for _ in range(cfg.iterations_T):
        for _ in range(n_weights):
            epoch += 1
            i = rng.next_below(n_weights)
            evaluator.begin_scan(i)
            for v in candidates:
                eps = evaluator.eval_candidate(i, v)
                n_evals += 1
                if not math.isfinite(eps):
                    raise TrainingDivergedError(f"loss became non-finite at epoch {epoch}", epoch)
                if eps <= eps_opt:
                    eps_opt = eps
                    w_opt[i] = v
            evaluator.commit(i, w_opt[i])
            if epoch % cfg.record_every == 0 or epoch == total_epochs:
                _record(epoch, curve)

    params = ParamVector(w_opt, spec)
    config = asdict(cfg)
    config["omega"] = [float(v) for v in omega.values]
    report = TrainReport(
        algorithm="conntra",
        seed=cfg.seed,
        curve=tuple(curve),
        final_params=params,
        final_loss=eps_opt,
        wall_seconds=time.perf_counter() - t0,
        memory=memory_account(n_weights, omega.bits_per_code),
        loss_evaluations=n_evals,
        config=config,
    )
    return params, eps_opt, report


# ---------------------------------------------------------------------------
# Discrete gradient diagnostics


def _loss_at(spec, values, data, loss):
    pred = models.forward(spec, ParamVector(values, spec), data.features)
    if callable(loss):
        return float(loss(pred.probabilities, data.labels_onehot))
    z = models.logits(spec, ParamVector(values, spec), data.features)
    return _logit_loss(loss)(z, data.label_indices, data.labels_onehot)


def discrete_gradients(
    spec: ModelSpec,
    params: ParamVector,
    data: LabeledDataset,
    omega: DiscreteSet,
    index: int,
    loss="cross_entropy",
) -> tuple[float | None, float | None]:
    """Finite-difference slopes toward the neighbouring domain values.

    With the current weight at omega position j, the left slope is
    ``(e(w=omega[j]) - e(w=omega[j-1])) / (omega[j] - omega[j-1])`` (None at
    the lower boundary); the right slope is the analogue toward j+1.  The
    parameter vector is left untouched.
    """
    if not 0 <= index < params.values.size:
        raise InvalidArgumentError(f"index {index} out of range")
    w = params.values[index]
    pos = int(np.searchsorted(omega.values, w))
    if pos >= len(omega) or omega.values[pos] != w:
        raise DomainError(f"params[{index}] = {w!r} is not a member of the discrete set")

    values = params.values.copy()
    e_here = _loss_at(spec, values, data, loss)
    left = right = None
    if pos > 0:
        values[index] = omega.values[pos - 1]
        e_left = _loss_at(spec, values, data, loss)
        left = (e_here - e_left) / (omega.values[pos] - omega.values[pos - 1])
    if pos + 1 < len(omega):
        values[index] = omega.values[pos + 1]
        e_right = _loss_at(spec, values, data, loss)
        right = (e_right - e_here) / (omega.values[pos + 1] - omega.values[pos])
    return left, right


# ---------------------------------------------------------------------------
# Public single-weight incremental evaluation (logistic regression only)


class LogitCache:
    """Logit matrix kept in sync with a logistic ParamVector it mirrors.

    The cache stores a checksum of the parameter bytes; any out-of-band
    mutation of the vector is detected on the next call and rejected.
    """

    def __init__(self, spec, params, data, search_loss="cross_entropy"):
        if spec.kind != "logistic_regression":
            raise InvalidArgumentError("incremental evaluation requires a logistic model")
        if params.spec != spec:
            raise InvalidArgumentError("params were built for a different model spec")
        if search_loss not in SEARCH_LOSSES:
            raise InvalidArgumentError(f"search_loss must be one of {SEARCH_LOSSES}")
        self.spec, self.params = spec, params
        self.d, self.k = spec.input_shape[0], spec.class_count
        self.Xf = np.asfortranarray(data.features)
        self.y_idx, self.y_onehot = data.label_indices, data.labels_onehot
        self._loss = _logit_loss(search_loss)
        self.logits = np.ascontiguousarray(models.logits(spec, params, data.features))
        self._checksum = zlib.crc32(params.values.tobytes())

    def loss(self) -> float:
        return self._loss(self.logits, self.y_idx, self.y_onehot)


def make_logit_cache(
    spec: ModelSpec, params: ParamVector, data: LabeledDataset, search_loss="cross_entropy"
) -> LogitCache:
    return LogitCache(spec, params, data, search_loss)


def incremental_eval(cache: LogitCache, index: int, new_value: float) -> float:
    """Set one weight, update only its logit column, return the new loss.

    The loss agrees with a full recompute within 1e-9.  Raises
    InvalidStateError if the cached checksum shows the parameter vector was
    modified behind the cache's back.
    """
    values = cache.params.values
    if not 0 <= index < values.size:
        raise InvalidArgumentError(f"index {index} out of range")
    if zlib.crc32(values.tobytes()) != cache._checksum:
        raise InvalidStateError("parameter vector changed outside the cache")
    delta = new_value - values[index]
    if index < cache.d * cache.k:
        cache.logits[:, index % cache.k] += delta * cache.Xf[:, index // cache.k]
    else:
        cache.logits[:, index - cache.d * cache.k] += delta
    values[index] = new_value
    cache._checksum = zlib.crc32(values.tobytes())
    return cache.loss()
