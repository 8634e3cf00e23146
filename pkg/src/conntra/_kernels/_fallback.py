"""Pure-numpy implementations of the hot candidate-evaluation kernels.

The coordinate search evaluates the loss once per (epoch, candidate value),
so these functions dominate training time.  ``_core.pyx`` provides compiled
equivalents with the same signatures; either backend must satisfy the same
contracts (agreement within 1e-9 is asserted by the tests, exactness of the
zero-delta case is relied on by the trainer).
"""

import numpy as np

# -log(1e-12): per-row cross-entropy is capped here, mirroring the
# probability floor in conntra.models.
MAX_ROW_LOSS = 27.631021115928547


def xent_from_logits(logits: np.ndarray, y_idx: np.ndarray) -> float:
    """Mean cross-entropy of softmax(logits) against integer class labels."""
    n = logits.shape[0]
    m = logits.max(axis=1)
    z = logits - m[:, None]
    lse = np.log(np.exp(z).sum(axis=1))
    row = lse - z[np.arange(n), y_idx]
    np.minimum(row, MAX_ROW_LOSS, out=row)
    return float(row.mean())


def euclid_from_logits(logits: np.ndarray, y_onehot: np.ndarray) -> float:
    """(1/N) * squared Frobenius distance between softmax(logits) and one-hot labels."""
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)
    d = p - y_onehot
    return float((d * d).sum()) / logits.shape[0]


def set_column_scaled(logits: np.ndarray, col: int, backup: np.ndarray,
                      x: np.ndarray, delta: float) -> None:
    """logits[:, col] = backup + delta * x  (delta == 0 restores backup exactly)."""
    if delta == 0.0:
        logits[:, col] = backup
    else:
        np.multiply(x, delta, out=logits[:, col])
        logits[:, col] += backup


def set_column_shift(logits: np.ndarray, col: int, backup: np.ndarray,
                     delta: float) -> None:
    """logits[:, col] = backup + delta  (bias coordinate variant)."""
    if delta == 0.0:
        logits[:, col] = backup
    else:
        np.add(backup, delta, out=logits[:, col])
