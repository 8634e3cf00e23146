"""QUBO instances and their reduction to binary-weight least-squares training.

A QUBO asks for ``min over binary z of z'Az + z'b + c`` with A symmetric
positive definite.  Factoring ``A = L L'`` (Cholesky) produces an equivalent
single-layer training instance with binary weights under the scaled squared
error ``(1/N)(W'X'XW - 2W'X'Y + Y'Y)``:

    X = sqrt(N) * L'      (N = d, rows are samples)
    Y = -(sqrt(N)/2) * inv(L) b     (by forward substitution, never inversion)
    offset c' chosen so (Y'Y + c') / N = c

For every binary z the two objectives then differ by the constant ``c'/N``,
so the argmin sets coincide.  Brute-force enumerators for both sides act as
each other's oracle; ties resolve to the lexicographically smallest vector.

Text format: first line d, then d lines of d reals (A), one line of d reals
(b), one line c.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, FormatError, InvalidArgumentError, NotPositiveDefiniteError

BRUTE_FORCE_MAX_DIM = 24
_CHUNK = 1 << 16


def symmetrize(A) -> np.ndarray:
    """Average A with its transpose; the quadratic form z'Az is unchanged."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidArgumentError(f"expected a square matrix, got shape {A.shape}")
    return (A + A.T) / 2.0


def cholesky(A) -> np.ndarray:
    """Lower-triangular L with positive diagonal and L L' = A.

    Pivots are required to exceed ``1e-12 * max|A|``; anything smaller means
    the matrix is not usefully positive definite and raises.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidArgumentError(f"expected a square matrix, got shape {A.shape}")
    if not np.allclose(A, A.T, rtol=0.0, atol=1e-12):
        raise InvalidArgumentError("matrix must be symmetric (see symmetrize)")
    d = A.shape[0]
    tol = 1e-12 * max(np.abs(A).max(), 1e-300)
    L = np.zeros((d, d))
    for j in range(d):
        pivot = A[j, j] - L[j, :j] @ L[j, :j]
        if pivot <= tol:
            raise NotPositiveDefiniteError(f"non-positive pivot {pivot!r} at column {j}")
        L[j, j] = math.sqrt(pivot)
        if j + 1 < d:
            L[j + 1 :, j] = (A[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]) / L[j, j]
    return L


def forward_substitution(L, rhs) -> np.ndarray:
    """Solve L y = rhs for lower-triangular L."""
    L = np.asarray(L, dtype=np.float64)
    rhs = np.asarray(rhs, dtype=np.float64)
    d = L.shape[0]
    y = np.zeros(d)
    for i in range(d):
        y[i] = (rhs[i] - L[i, :i] @ y[:i]) / L[i, i]
    return y


@dataclass(frozen=True)
class QuboInstance:
    """min over binary z of z'Az + z'b + c, with A symmetric positive definite."""

    A: np.ndarray
    b: np.ndarray
    c: float

    def __post_init__(self):
        A = np.asarray(self.A, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
            raise InvalidArgumentError(f"A must be square and non-empty, got {A.shape}")
        if b.shape != (A.shape[0],):
            raise InvalidArgumentError(f"b must have shape ({A.shape[0]},), got {b.shape}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b)) and np.isfinite(self.c)):
            raise InvalidArgumentError("instance entries must be finite")
        if not np.allclose(A, A.T, rtol=0.0, atol=1e-12):
            raise InvalidArgumentError("A must be symmetric (see symmetrize)")
        cholesky(A)  # positive definiteness gate
        A.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", float(self.c))

    @property
    def dim(self) -> int:
        return int(self.A.shape[0])


@dataclass(frozen=True)
class BinaryTrainingInstance:
    """Single-layer binary-weight training data (X rows are samples, N == d)."""

    X: np.ndarray
    Y: np.ndarray
    offset: float

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        Y = np.asarray(self.Y, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] != X.shape[1]:
            raise InvalidArgumentError("the reduction produces square X (N == d)")
        if Y.shape != (X.shape[0],):
            raise InvalidArgumentError("Y must be an N-vector")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y)) and np.isfinite(self.offset)):
            raise InvalidArgumentError("instance entries must be finite")
        X.flags.writeable = False
        Y.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def dim(self) -> int:
        return int(self.X.shape[1])


def qubo_value(q: QuboInstance, z) -> float:
    z = np.asarray(z, dtype=np.float64)
    return float(z @ q.A @ z + z @ q.b + q.c)


def training_value(t: BinaryTrainingInstance, w) -> float:
    """The expanded squared-error objective (1/N)(W'X'XW - 2W'X'Y + Y'Y)."""
    w = np.asarray(w, dtype=np.float64)
    n = t.X.shape[0]
    return float(w @ (t.X.T @ t.X) @ w - 2.0 * w @ (t.X.T @ t.Y) + t.Y @ t.Y) / n


def reduce_qubo(q: QuboInstance) -> BinaryTrainingInstance:
    """Map a QUBO to a training instance whose objective differs by offset/N."""
    L = cholesky(q.A)
    n = q.dim
    X = math.sqrt(n) * L.T
    Y = -(math.sqrt(n) / 2.0) * forward_substitution(L, q.b)
    offset = n * q.c - Y @ Y
    return BinaryTrainingInstance(X, Y, offset)


def _enumerate_min(d: int, batch_value):
    """Minimize over all binary vectors; counting order == lexicographic order.

    ``batch_value`` maps a (chunk, d) 0/1 matrix to a value vector.  Strict
    improvement keeps the first (lexicographically smallest) minimizer.
    """
    if d > BRUTE_FORCE_MAX_DIM:
        raise CapacityError(f"enumeration over 2^{d} assignments exceeds the d <= {BRUTE_FORCE_MAX_DIM} guard")
    shifts = np.arange(d - 1, -1, -1, dtype=np.uint64)
    best_val, best_z = math.inf, None
    for start in range(0, 1 << d, _CHUNK):
        stop = min(start + _CHUNK, 1 << d)
        ints = np.arange(start, stop, dtype=np.uint64)
        Z = ((ints[:, None] >> shifts) & np.uint64(1)).astype(np.float64)
        vals = batch_value(Z)
        k = int(np.argmin(vals))  # first minimum within the chunk
        if vals[k] < best_val:
            best_val, best_z = float(vals[k]), Z[k].astype(np.int8)
    return best_z, best_val


def brute_force_qubo(q: QuboInstance):
    """Exact global minimum of the QUBO objective (d <= 24)."""
    return _enumerate_min(q.dim, lambda Z: ((Z @ q.A) * Z).sum(axis=1) + Z @ q.b + q.c)


def brute_force_training(t: BinaryTrainingInstance):
    """Exact global minimum of the expanded training objective (d <= 24)."""
    g = t.X.T @ t.X
    h = t.X.T @ t.Y
    yty = float(t.Y @ t.Y)
    n = t.X.shape[0]
    return _enumerate_min(
        t.dim, lambda Z: (((Z @ g) * Z).sum(axis=1) - 2.0 * (Z @ h) + yty) / n
    )


# ---------------------------------------------------------------------------
# Text formats


def format_qubo_text(q: QuboInstance) -> str:
    lines = [str(q.dim)]
    lines += [" ".join(repr(float(v)) for v in row) for row in q.A]
    lines.append(" ".join(repr(float(v)) for v in q.b))
    lines.append(repr(float(q.c)))
    return "\n".join(lines) + "\n"


def parse_qubo_text(text: str) -> QuboInstance:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError("line 1: empty instance")
    try:
        d = int(lines[0])
    except ValueError:
        raise FormatError(f"line 1: expected the dimension, got {lines[0]!r}") from None
    if d < 1 or len(lines) != d + 3:
        raise FormatError(f"expected {d + 3} lines for dimension {d}, got {len(lines)}")

    def _floats(line_no, expect):
        parts = lines[line_no - 1].split()
        if len(parts) != expect:
            raise FormatError(f"line {line_no}: expected {expect} values, got {len(parts)}")
        try:
            return [float(p) for p in parts]
        except ValueError:
            raise FormatError(f"line {line_no}: non-numeric value") from None

    A = np.array([_floats(i + 2, d) for i in range(d)])
    b = np.array(_floats(d + 2, d))
    (c,) = _floats(d + 3, 1)
    return QuboInstance(A, b, c)


def format_training_text(t: BinaryTrainingInstance) -> str:
    lines = [str(t.X.shape[0])]
    lines += [" ".join(repr(float(v)) for v in row) for row in t.X]
    lines.append(" ".join(repr(float(v)) for v in t.Y))
    lines.append(repr(float(t.offset)))
    return "\n".join(lines) + "\n"
