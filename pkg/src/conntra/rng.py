"""Seedable pseudo-randomness with a pinned, documented algorithm.

All stochastic choices in this package (weight init, minibatch order,
train/validation splits, coordinate selection) flow through SplitMix64 so
that a seed fully determines a run on any platform, independent of numpy's
generator versioning.

The stream is the classic splitmix64: output ``k`` is ``mix(seed + k * GAMMA)``
over uint64 arithmetic.  Because outputs depend only on the counter, scalar
and vectorized draws produce the same stream.
"""

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


class SplitMix64:
    """Deterministic 64-bit generator; one instance per reproducible stream."""

    def __init__(self, seed: int):
        self._seed = int(seed) & _MASK
        self._count = 0

    def next_uint64(self) -> int:
        self._count += 1
        return _mix((self._seed + self._count * _GAMMA) & _MASK)

    def uint64_array(self, n: int) -> np.ndarray:
        """Next ``n`` raw outputs as uint64, consuming n counter steps."""
        counts = np.arange(self._count + 1, self._count + n + 1, dtype=np.uint64)
        self._count += n
        with np.errstate(over="ignore"):
            z = np.uint64(self._seed) + counts * np.uint64(_GAMMA)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
            return z ^ (z >> np.uint64(31))

    def next_below(self, n: int) -> int:
        """Unbiased uniform integer in [0, n) by modulo rejection."""
        if n <= 0:
            raise ValueError("bound must be positive")
        threshold = ((1 << 64) - n) % n  # first 2**64 % n raw values are rejected
        while True:
            u = self.next_uint64()
            if u >= threshold:
                return u % n

    def next_float(self) -> float:
        """Uniform in [0, 1) with 53 random bits."""
        return (self.next_uint64() >> 11) * 2.0**-53

    def float_array(self, n: int) -> np.ndarray:
        return (self.uint64_array(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def uniform_array(self, low: float, high: float, n: int) -> np.ndarray:
        return low + (high - low) * self.float_array(n)

    def normal_array(self, n: int) -> np.ndarray:
        """Standard normals via Box-Muller on consecutive uniform pairs."""
        m = (n + 1) // 2
        u1 = self.float_array(m)
        u2 = self.float_array(m)
        u1 = np.maximum(u1, 2.0**-53)  # avoid log(0)
        r = np.sqrt(-2.0 * np.log(u1))
        out = np.concatenate([r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)])
        return out[:n]

    def permutation(self, n: int) -> np.ndarray:
        """Deterministic permutation of range(n).

        Sorts indices by per-index uint64 keys (stable sort; equal keys keep
        index order).  One raw draw per element.
        """
        keys = self.uint64_array(n)
        return np.argsort(keys, kind="stable")
