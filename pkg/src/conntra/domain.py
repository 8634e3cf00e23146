"""The finite discrete weight domain and its bit-packed storage.

A DiscreteSet holds the sorted value set the learning parameters may take
(ternary {-1, 0, +1} being the common case).  ``discretize`` snaps a
continuous weight vector onto the set: each weight goes to the first value
whose upper midpoint bound covers it, which is the nearest member with exact
midpoint ties resolved toward the smaller value.

Packed storage layout
---------------------
Each weight is stored as a ``bits_per_code``-bit index into the value set,
``bits_per_code = ceil(log2(len(values)))``.  Codes are laid out
contiguously, little-endian bit order within each byte: code ``i`` occupies
bits ``[i*b, (i+1)*b)`` of the buffer, where bit ``j`` of the buffer is byte
``j // 8``, bit position ``j % 8``.  When ``b`` divides 64 no code straddles
a 64-bit word.  Buffer size is ``ceil(length * b / 8)`` bytes.

File format ``CNTRAPK1``: 8-byte magic, u32-le count of domain values, the
values as float64-le, u64-le weight count, then the bit buffer.
"""

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, FormatError, InvalidArgumentError

PACKED_MAGIC = b"CNTRAPK1"


@dataclass(frozen=True)
class DiscreteSet:
    """Sorted finite set of values a learning parameter may take."""

    values: np.ndarray
    bits_per_code: int = field(init=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size < 2:
            raise InvalidArgumentError("discrete set needs at least 2 values")
        if not np.all(np.isfinite(values)):
            raise DomainError("discrete set values must be finite")
        values = np.sort(values)
        if np.any(np.diff(values) == 0.0):
            raise DomainError("discrete set values must be distinct")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "bits_per_code", max(1, math.ceil(math.log2(values.size))))

    def __len__(self):
        return int(self.values.size)

    def __eq__(self, other):
        return isinstance(other, DiscreteSet) and np.array_equal(self.values, other.values)

    @property
    def midpoints(self) -> np.ndarray:
        """Upper decision bounds: midpoint between consecutive values."""
        return (self.values[:-1] + self.values[1:]) / 2.0

    def codes_of(self, values) -> np.ndarray:
        """Exact-membership lookup; raises DomainError for non-members."""
        values = np.asarray(values, dtype=np.float64)
        codes = np.searchsorted(self.values, values)
        codes = np.minimum(codes, len(self) - 1)
        if values.size and not np.array_equal(self.values[codes], values):
            bad = values[self.values[codes] != values]
            raise DomainError(f"value {bad.flat[0]!r} is not a member of the discrete set")
        return codes.astype(np.uint32)


def ternary() -> DiscreteSet:
    """The default {-1, 0, +1} domain (2 bits per weight)."""
    return DiscreteSet(np.array([-1.0, 0.0, 1.0]))


def discretize(w_pre, omega: DiscreteSet) -> np.ndarray:
    """Snap each entry of ``w_pre`` onto ``omega``.

    Entry ``w`` maps to ``omega.values[j]`` for the smallest ``j`` with
    ``w <= (values[j] + values[j+1]) / 2``, else to the largest value.
    Equivalently: the nearest member, midpoint ties toward the smaller value.
    """
    if not isinstance(omega, DiscreteSet):
        raise InvalidArgumentError("omega must be a DiscreteSet")
    w = np.asarray(w_pre, dtype=np.float64)
    if not np.all(np.isfinite(w)):
        raise DomainError("weights to discretize must be finite")
    idx = np.searchsorted(omega.midpoints, w, side="left")
    return omega.values[idx]


@dataclass(frozen=True)
class PackedCodes:
    """Bit-packed per-weight indices into a DiscreteSet (see module layout)."""

    length: int
    domain: DiscreteSet
    buffer: bytes

    def __post_init__(self):
        expected = _buffer_size(self.length, self.domain.bits_per_code)
        if len(self.buffer) != expected:
            raise FormatError(
                f"packed buffer is {len(self.buffer)} bytes, expected {expected}"
            )


def _buffer_size(length: int, bits: int) -> int:
    return (length * bits + 7) // 8


def pack(values, omega: DiscreteSet) -> PackedCodes:
    """Pack a vector whose entries are all exact members of ``omega``.

    Entries that are not members raise DomainError; nothing is silently
    re-discretized here.
    """
    codes = omega.codes_of(values)
    bits = omega.bits_per_code
    if codes.size == 0:
        return PackedCodes(0, omega, b"")
    # (n, bits) little-endian bit matrix, flattened then packed 8 bits/byte.
    bit_matrix = (codes[:, None] >> np.arange(bits, dtype=np.uint32)) & 1
    buf = np.packbits(bit_matrix.astype(np.uint8).ravel(), bitorder="little")
    return PackedCodes(int(codes.size), omega, buf.tobytes())


def unpack(packed: PackedCodes) -> np.ndarray:
    """Recover the exact value vector stored in ``packed``."""
    n, bits = packed.length, packed.domain.bits_per_code
    if n == 0:
        return np.zeros(0, dtype=np.float64)
    raw = np.unpackbits(
        np.frombuffer(packed.buffer, dtype=np.uint8), count=n * bits, bitorder="little"
    )
    codes = raw.reshape(n, bits).astype(np.uint32) @ (1 << np.arange(bits, dtype=np.uint32))
    if np.any(codes >= len(packed.domain)):
        bad = int(codes[codes >= len(packed.domain)][0])
        raise FormatError(f"corrupt code {bad} >= domain size {len(packed.domain)}")
    return packed.domain.values[codes]


@dataclass(frozen=True)
class MemoryAccount:
    """Storage cost of a parameter vector at a given per-parameter width."""

    param_count: int
    bits_per_param: int
    kilobytes: float = field(init=False)

    def __post_init__(self):
        if self.param_count <= 0 or self.bits_per_param <= 0:
            raise InvalidArgumentError("param_count and bits_per_param must be positive")
        # 1 KB = 1000 bytes; evaluation order pinned so the 64-vs-2-bit
        # ratio is exactly 32.0 for every count.
        kb = self.param_count * self.bits_per_param / 8 / 1000
        object.__setattr__(self, "kilobytes", kb)

    def as_dict(self):
        return {
            "param_count": self.param_count,
            "bits_per_param": self.bits_per_param,
            "kilobytes": self.kilobytes,
        }


def memory_account(param_count: int, bits_per_param: int) -> MemoryAccount:
    return MemoryAccount(param_count, bits_per_param)


def save_packed(path, packed: PackedCodes) -> None:
    """Write the CNTRAPK1 container (bit-exact round-trip with load_packed)."""
    omega = packed.domain
    with open(path, "wb") as fh:
        fh.write(PACKED_MAGIC)
        fh.write(struct.pack("<I", len(omega)))
        fh.write(omega.values.astype("<f8").tobytes())
        fh.write(struct.pack("<Q", packed.length))
        fh.write(packed.buffer)


def load_packed(path) -> PackedCodes:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != PACKED_MAGIC:
        raise FormatError(f"bad magic at byte 0: {data[:8]!r} != {PACKED_MAGIC!r}")
    off = 8
    if len(data) < off + 4:
        raise FormatError(f"truncated header at byte {off}")
    (count,) = struct.unpack_from("<I", data, off)
    off += 4
    if len(data) < off + 8 * count + 8:
        raise FormatError(f"truncated domain values at byte {off}")
    values = np.frombuffer(data, dtype="<f8", count=count, offset=off)
    off += 8 * count
    (length,) = struct.unpack_from("<Q", data, off)
    off += 8
    omega = DiscreteSet(values)
    nbytes = _buffer_size(length, omega.bits_per_code)
    if len(data) != off + nbytes:
        raise FormatError(
            f"buffer at byte {off}: file holds {len(data) - off} bytes, expected {nbytes}"
        )
    return PackedCodes(int(length), omega, data[off:])
