"""Model architectures, flat parameter layout, forward pass and error metrics.

Three classifier families are supported, all ending in softmax:

* ``logistic_regression`` -- one dense layer, ``X @ W + b``.
* ``mlp`` -- dense layers with ReLU hidden activations.
* ``cnn_lenet`` -- LeNet-5: input zero-padded 28x28 -> 32x32, conv 6@5x5,
  2x2 average pool, conv 16@5x5, 2x2 average pool, dense 120 -> 84 -> classes,
  ReLU activations on all but the last layer.

Every model exposes its parameters as one flat float64 vector so a single
weight can be addressed by flat index.  The layout is the layer order, each
layer contributing its weight tensor (C order) followed by its bias:
``fc1.W, fc1.b, fc2.W, ...``.  ``param_layout`` returns the offset table and
is a bijection onto ``range(param_count)``.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import InvalidArgumentError

# Probability floor: discrete weights can drive a class probability to an
# exact zero, so cross-entropy clamps before the log.
PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class LabeledDataset:
    """Feature array (N x d, or N x H x W x C for images) with one-hot labels."""

    features: np.ndarray
    labels_onehot: np.ndarray
    name: str = ""

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        Y = np.asarray(self.labels_onehot)
        if X.shape[0] == 0:
            raise InvalidArgumentError("dataset must contain at least one sample")
        if not np.all(np.isfinite(X)):
            raise InvalidArgumentError("dataset features must be finite")
        if Y.ndim != 2 or Y.shape[0] != X.shape[0]:
            raise InvalidArgumentError("labels_onehot must be N x k")
        if not np.array_equal(np.sort(np.unique(Y)), [0, 1]) or np.any(Y.sum(axis=1) != 1):
            raise InvalidArgumentError("labels must be one-hot: exactly one 1 per row")
        X.flags.writeable = False
        Y = Y.astype(np.uint8)
        Y.flags.writeable = False
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels_onehot", Y)

    @property
    def n(self) -> int:
        return int(self.features.shape[0])

    @property
    def class_count(self) -> int:
        return int(self.labels_onehot.shape[1])

    @property
    def label_indices(self) -> np.ndarray:
        return np.argmax(self.labels_onehot, axis=1).astype(np.int64)


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    input_shape: tuple
    class_count: int
    hidden: tuple = ()

    def __post_init__(self):
        if self.kind not in ("logistic_regression", "mlp", "cnn_lenet"):
            raise InvalidArgumentError(f"unknown model kind {self.kind!r}")
        if self.class_count < 2:
            raise InvalidArgumentError("class_count must be >= 2")

    @classmethod
    def logistic(cls, input_dim: int, class_count: int) -> "ModelSpec":
        return cls("logistic_regression", (int(input_dim),), int(class_count))

    @classmethod
    def mlp(cls, input_dim: int, hidden, class_count: int) -> "ModelSpec":
        hidden = tuple(int(h) for h in hidden)
        if not hidden or any(h < 1 for h in hidden):
            raise InvalidArgumentError("mlp needs at least one positive hidden size")
        return cls("mlp", (int(input_dim),), int(class_count), hidden)

    @classmethod
    def lenet5(cls, class_count: int = 10) -> "ModelSpec":
        return cls("cnn_lenet", (28, 28, 1), int(class_count))

    @property
    def param_count(self) -> int:
        return param_count(self)


# ---------------------------------------------------------------------------
# Layer machinery


class _Dense:
    def __init__(self, name, n_in, n_out, relu):
        self.name, self.n_in, self.n_out, self.relu = name, n_in, n_out, relu
        self.n_params = n_in * n_out + n_out
        self.w_shape = (n_in, n_out)

    def split(self, w):
        k = self.n_in * self.n_out
        return w[:k].reshape(self.n_in, self.n_out), w[k:]

    def forward(self, x, w):
        W, b = self.split(w)
        z = x @ W + b
        return np.maximum(z, 0.0) if self.relu else z

    def forward_cache(self, x, w):
        W, b = self.split(w)
        z = x @ W + b
        out = np.maximum(z, 0.0) if self.relu else z
        return out, (x, z)

    def backward(self, w, cache, dout):
        x, z = cache
        W, _ = self.split(w)
        dz = np.where(z > 0, dout, 0.0) if self.relu else dout
        dw = np.concatenate([(x.T @ dz).ravel(), dz.sum(axis=0)])
        return dz @ W.T, dw


class _Conv:
    """5x5 valid convolution, weight (k, k, c_in, c_out) + bias, optional ReLU."""

    def __init__(self, name, h, w, c_in, c_out, k=5, relu=True):
        self.name, self.k, self.relu = name, k, relu
        self.h_in, self.w_in, self.c_in, self.c_out = h, w, c_in, c_out
        self.h_out, self.w_out = h - k + 1, w - k + 1
        self.n_params = k * k * c_in * c_out + c_out
        self.w_shape = (k, k, c_in, c_out)

    def split(self, w):
        k = self.k * self.k * self.c_in * self.c_out
        return w[:k].reshape(self.k * self.k * self.c_in, self.c_out), w[k:]

    def _cols(self, x):
        win = np.lib.stride_tricks.sliding_window_view(x, (self.k, self.k), axis=(1, 2))
        # (N, OH, OW, C, kh, kw) -> (N, OH*OW, kh*kw*C) matching weight order
        cols = win.transpose(0, 1, 2, 4, 5, 3)
        return cols.reshape(x.shape[0], self.h_out * self.w_out, -1)

    def forward(self, x, w):
        out, _ = self.forward_cache(x, w)
        return out

    def forward_cache(self, x, w):
        Wmat, b = self.split(w)
        cols = self._cols(x)
        z = cols @ Wmat + b
        out = np.maximum(z, 0.0) if self.relu else z
        out = out.reshape(x.shape[0], self.h_out, self.w_out, self.c_out)
        return out, (cols, z, x.shape)

    def backward(self, w, cache, dout):
        cols, z, x_shape = cache
        Wmat, _ = self.split(w)
        n = x_shape[0]
        dz = dout.reshape(n, self.h_out * self.w_out, self.c_out)
        if self.relu:
            dz = np.where(z > 0, dz, 0.0)
        dW = np.einsum("npk,npc->kc", cols, dz)
        db = dz.sum(axis=(0, 1))
        dcols = (dz @ Wmat.T).reshape(n, self.h_out, self.w_out, self.k, self.k, self.c_in)
        dx = np.zeros(x_shape)
        for a in range(self.k):
            for b_ in range(self.k):
                dx[:, a : a + self.h_out, b_ : b_ + self.w_out, :] += dcols[:, :, :, a, b_, :]
        return dx, np.concatenate([dW.ravel(), db])


class _AvgPool:
    """2x2 average pooling, stride 2."""

    n_params = 0

    def __init__(self, name):
        self.name = name

    def forward(self, x, w=None):
        n, h, w_, c = x.shape
        return x.reshape(n, h // 2, 2, w_ // 2, 2, c).mean(axis=(2, 4))

    def forward_cache(self, x, w=None):
        return self.forward(x), x.shape

    def backward(self, w, cache, dout):
        n, h, w_, c = cache
        dx = np.broadcast_to(
            dout[:, :, None, :, None, :] / 4.0, (n, h // 2, 2, w_ // 2, 2, c)
        )
        return dx.reshape(n, h, w_, c), None


class _Pad:
    """Zero-pad height/width by a fixed margin."""

    n_params = 0

    def __init__(self, name, pad):
        self.name, self.pad = name, pad

    def forward(self, x, w=None):
        p = self.pad
        return np.pad(x, ((0, 0), (p, p), (p, p), (0, 0)))

    def forward_cache(self, x, w=None):
        return self.forward(x), None

    def backward(self, w, cache, dout):
        p = self.pad
        return dout[:, p:-p, p:-p, :], None


class _Flatten:
    n_params = 0

    def __init__(self, name):
        self.name = name

    def forward(self, x, w=None):
        return x.reshape(x.shape[0], -1)

    def forward_cache(self, x, w=None):
        return self.forward(x), x.shape

    def backward(self, w, cache, dout):
        return dout.reshape(cache), None


@lru_cache(maxsize=None)
def _layers(spec: ModelSpec):
    if spec.kind == "logistic_regression":
        return (_Dense("fc1", spec.input_shape[0], spec.class_count, relu=False),)
    if spec.kind == "mlp":
        sizes = (spec.input_shape[0],) + spec.hidden + (spec.class_count,)
        layers = []
        for i in range(len(sizes) - 1):
            last = i == len(sizes) - 2
            layers.append(_Dense(f"fc{i + 1}", sizes[i], sizes[i + 1], relu=not last))
        return tuple(layers)
    return (
        _Pad("pad", 2),
        _Conv("conv1", 32, 32, 1, 6),
        _AvgPool("pool1"),
        _Conv("conv2", 14, 14, 6, 16),
        _AvgPool("pool2"),
        _Flatten("flatten"),
        _Dense("fc1", 400, 120, relu=True),
        _Dense("fc2", 120, 84, relu=True),
        _Dense("fc3", 84, spec.class_count, relu=False),
    )


def param_count(spec: ModelSpec) -> int:
    """Closed-form number of weights + biases for the architecture."""
    return sum(layer.n_params for layer in _layers(spec))


@dataclass(frozen=True)
class ParamBlock:
    name: str
    offset: int
    shape: tuple

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))


@lru_cache(maxsize=None)
def param_layout(spec: ModelSpec) -> tuple:
    """Offset table mapping (layer, weight/bias) blocks to flat index ranges."""
    blocks, offset = [], 0
    for layer in _layers(spec):
        if layer.n_params == 0:
            continue
        w_size = int(np.prod(layer.w_shape))
        blocks.append(ParamBlock(f"{layer.name}.W", offset, layer.w_shape))
        offset += w_size
        blocks.append(ParamBlock(f"{layer.name}.b", offset, (layer.n_params - w_size,)))
        offset += layer.n_params - w_size
    return tuple(blocks)


@lru_cache(maxsize=None)
def _layer_slices(spec: ModelSpec) -> tuple:
    """(layer_index, start, stop) flat ranges for parameterized layers."""
    out, offset = [], 0
    for i, layer in enumerate(_layers(spec)):
        if layer.n_params:
            out.append((i, offset, offset + layer.n_params))
            offset += layer.n_params
    return tuple(out)


def owning_layer(spec: ModelSpec, index: int) -> int:
    """Index (into the layer stack) of the layer owning flat parameter ``index``."""
    for i, start, stop in _layer_slices(spec):
        if start <= index < stop:
            return i
    raise InvalidArgumentError(f"parameter index {index} out of range")


@dataclass(frozen=True)
class ParamVector:
    """Flat float64 view of every weight and bias of a model."""

    values: np.ndarray
    spec: ModelSpec

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size != param_count(self.spec):
            raise InvalidArgumentError(
                f"expected {param_count(self.spec)} parameters, got {values.size}"
            )
        object.__setattr__(self, "values", values)

    def copy(self) -> "ParamVector":
        return ParamVector(self.values.copy(), self.spec)


def _check_features(spec: ModelSpec, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1:] != spec.input_shape:
        raise InvalidArgumentError(
            f"feature shape {X.shape[1:]} does not match model input {spec.input_shape}"
        )
    return X


def _layer_params(spec, values):
    """Per-layer flat slices (None for parameterless layers)."""
    out, offset = [], 0
    for layer in _layers(spec):
        if layer.n_params:
            out.append(values[offset : offset + layer.n_params])
            offset += layer.n_params
        else:
            out.append(None)
    return out


def logits(spec: ModelSpec, params: ParamVector, X) -> np.ndarray:
    if params.spec != spec:
        raise InvalidArgumentError("params were built for a different model spec")
    x = _check_features(spec, X)
    for layer, w in zip(_layers(spec), _layer_params(spec, params.values)):
        x = layer.forward(x, w)
    return x


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


@dataclass(frozen=True)
class Prediction:
    """Row-stochastic class probabilities plus the argmax decision per row."""

    probabilities: np.ndarray
    predicted_class: np.ndarray

    @classmethod
    def from_logits(cls, z: np.ndarray) -> "Prediction":
        p = softmax(z)
        # np.argmax takes the lowest index on ties, which is the pinned rule.
        return cls(p, np.argmax(z, axis=1).astype(np.int64))


def forward(spec: ModelSpec, params: ParamVector, data) -> Prediction:
    """Deterministic forward pass; ``data`` is a LabeledDataset or feature array."""
    X = data.features if isinstance(data, LabeledDataset) else data
    return Prediction.from_logits(logits(spec, params, X))


# ---------------------------------------------------------------------------
# Error functions


def _probs(pred) -> np.ndarray:
    return pred.probabilities if isinstance(pred, Prediction) else np.asarray(pred)


def cross_entropy(pred, labels_onehot) -> float:
    """Mean negative log-probability of the true class, floored at 1e-12."""
    P = _probs(pred)
    Y = np.asarray(labels_onehot)
    if P.shape != Y.shape:
        raise InvalidArgumentError(f"prediction shape {P.shape} != labels shape {Y.shape}")
    p_true = P[np.arange(P.shape[0]), np.argmax(Y, axis=1)]
    return float(np.mean(-np.log(np.maximum(p_true, PROB_FLOOR))))


def classification_error(pred, labels_onehot) -> float:
    """Percentage of rows whose argmax disagrees with the label."""
    P = _probs(pred)
    Y = np.asarray(labels_onehot)
    if P.shape[0] == 0:
        raise InvalidArgumentError("classification error undefined on empty input")
    if P.shape != Y.shape:
        raise InvalidArgumentError(f"prediction shape {P.shape} != labels shape {Y.shape}")
    if isinstance(pred, Prediction):
        decided = pred.predicted_class
    else:
        decided = np.argmax(P, axis=1)
    wrong = np.count_nonzero(decided != np.argmax(Y, axis=1))
    return 100.0 * wrong / P.shape[0]


def euclidean_error(pred, truth, n: int) -> float:
    """Squared Euclidean distance between vectors, scaled by 1/n."""
    p = np.asarray(pred, dtype=np.float64).ravel()
    y = np.asarray(truth, dtype=np.float64).ravel()
    if p.size != y.size:
        raise InvalidArgumentError(f"length mismatch: {p.size} != {y.size}")
    d = p - y
    return float(d @ d) / n


# ---------------------------------------------------------------------------
# Cached forward machinery (used by the trainers)


def layer_inputs(spec: ModelSpec, params: ParamVector, X) -> list:
    """Activations entering each layer, plus the final logits.

    ``out[i]`` is the input to layer ``i``; ``out[-1]`` is the logits array.
    Recomputing layers ``i..`` from ``out[i]`` is bit-identical to a full
    forward pass, which is what the suffix-cached evaluator relies on.
    """
    x = _check_features(spec, X)
    acts = [x]
    for layer, w in zip(_layers(spec), _layer_params(spec, params.values)):
        x = layer.forward(x, w)
        acts.append(x)
    return acts


def logits_from(spec: ModelSpec, values: np.ndarray, acts: list, start: int) -> np.ndarray:
    """Recompute logits from cached layer input ``acts[start]`` onward."""
    layers = _layers(spec)
    slices = _layer_params(spec, values)
    x = acts[start]
    for i in range(start, len(layers)):
        x = layers[i].forward(x, slices[i])
    return x


def forward_backward(spec: ModelSpec, values: np.ndarray, X, Y_onehot):
    """Logits plus the gradient of mean cross-entropy w.r.t. every parameter."""
    x = _check_features(spec, X)
    layers = _layers(spec)
    slices = _layer_params(spec, values)
    caches = []
    for layer, w in zip(layers, slices):
        x, cache = layer.forward_cache(x, w)
        caches.append(cache)
    z = x
    P = softmax(z)
    dz = (P - Y_onehot) / X.shape[0]
    grad = np.zeros_like(values)
    offset_map = {}
    offset = 0
    for i, layer in enumerate(layers):
        offset_map[i] = offset
        offset += layer.n_params
    dout = dz
    for i in range(len(layers) - 1, -1, -1):
        dout, dw = layers[i].backward(slices[i], caches[i], dout)
        if dw is not None:
            grad[offset_map[i] : offset_map[i] + layers[i].n_params] = dw
    return z, grad
