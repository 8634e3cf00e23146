# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled candidate-evaluation kernels (single-pass, no temporaries).

Same contracts as ``_fallback``; see that module.  Row reductions accumulate
left to right, so results are deterministic for a given input.
"""

from libc.math cimport exp, log

import numpy as np

cdef double MAX_ROW_LOSS = 27.631021115928547  # -log(1e-12)


def xent_from_logits(const double[:, ::1] logits, const long long[::1] y_idx):
    cdef Py_ssize_t n = logits.shape[0]
    cdef Py_ssize_t k = logits.shape[1]
    cdef Py_ssize_t i, j
    cdef double m, s, row, total = 0.0
    for i in range(n):
        m = logits[i, 0]
        for j in range(1, k):
            if logits[i, j] > m:
                m = logits[i, j]
        s = 0.0
        for j in range(k):
            s += exp(logits[i, j] - m)
        row = log(s) - (logits[i, y_idx[i]] - m)
        if row > MAX_ROW_LOSS:
            row = MAX_ROW_LOSS
        total += row
    return total / n


def euclid_from_logits(const double[:, ::1] logits, const unsigned char[:, ::1] y_onehot):
    cdef Py_ssize_t n = logits.shape[0]
    cdef Py_ssize_t k = logits.shape[1]
    cdef Py_ssize_t i, j
    cdef double m, s, p, d, total = 0.0
    for i in range(n):
        m = logits[i, 0]
        for j in range(1, k):
            if logits[i, j] > m:
                m = logits[i, j]
        s = 0.0
        for j in range(k):
            s += exp(logits[i, j] - m)
        for j in range(k):
            p = exp(logits[i, j] - m) / s
            d = p - y_onehot[i, j]
            total += d * d
    return total / n


def set_column_scaled(double[:, ::1] logits, Py_ssize_t col,
                      const double[::1] backup, const double[::1] x, double delta):
    cdef Py_ssize_t i, n = logits.shape[0]
    if delta == 0.0:
        for i in range(n):
            logits[i, col] = backup[i]
    else:
        for i in range(n):
            logits[i, col] = backup[i] + delta * x[i]


def set_column_shift(double[:, ::1] logits, Py_ssize_t col,
                     const double[::1] backup, double delta):
    cdef Py_ssize_t i, n = logits.shape[0]
    for i in range(n):
        logits[i, col] = backup[i] + delta
