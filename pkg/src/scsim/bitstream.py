"""Stochastic bitstreams and the elementary single-gate arithmetic on them.

A bitstream is a finite 0/1 sequence in time order (index 0 = first clock
cycle) together with an encoding.  Unipolar streams decode to ones/k in
[0, 1]; bipolar streams decode to (2*ones - k)/k in [-1, 1].  Multiplication
is a single AND (unipolar) or XNOR (bipolar) gate; OR acts as a saturating
combine that turns into an exact maximum for correlated streams.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

import numpy as np


class Encoding(Enum):
    UNIPOLAR = "unipolar"
    BIPOLAR = "bipolar"


@dataclass(frozen=True)
class Bitstream:
    """Immutable bit sequence plus encoding.

    ``group`` labels the correlation group (streams generated from the same
    per-cycle random words carry the same label).  Operators that rely on
    correlation (ReLU/max-pool) refuse to mix groups.
    """

    bits: np.ndarray
    encoding: Encoding
    group: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        arr = np.asarray(self.bits, dtype=np.uint8)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("bitstream must be a non-empty 1-d bit sequence")
        if np.any(arr > 1):
            raise ValueError("bitstream symbols must be 0 or 1")
        arr.setflags(write=False)
        object.__setattr__(self, "bits", arr)

    @property
    def k(self) -> int:
        return int(self.bits.size)

    def ones(self) -> int:
        return int(self.bits.sum())

    def decode(self) -> float:
        return decode(self)

    def with_group(self, group: Optional[str]) -> "Bitstream":
        return Bitstream(self.bits, self.encoding, group)

    @classmethod
    def from_bits(cls, bits: Iterable[int], encoding: Encoding,
                  group: Optional[str] = None) -> "Bitstream":
        return cls(np.fromiter(bits, dtype=np.uint8), encoding, group)


def decode(stream: Bitstream) -> float:
    """Decoded real value of a stream under its encoding (exact division)."""
    ones = stream.ones()
    k = stream.k
    if stream.encoding is Encoding.UNIPOLAR:
        return ones / k
    return (2 * ones - k) / k


def _check_pair(a: Bitstream, b: Bitstream, encoding: Optional[Encoding]) -> None:
    if a.k != b.k:
        raise ValueError(f"stream length mismatch: {a.k} vs {b.k}")
    if a.encoding is not b.encoding:
        raise ValueError(
            f"encoding mismatch: {a.encoding.value} vs {b.encoding.value}")
    if encoding is not None and a.encoding is not encoding:
        raise ValueError(
            f"operation requires {encoding.value} streams, got {a.encoding.value}")


def _joint_group(a: Bitstream, b: Bitstream) -> Optional[str]:
    return a.group if a.group == b.group else None


def and_mul(a: Bitstream, b: Bitstream) -> Bitstream:
    """Unipolar multiply: output bit i = a_i AND b_i."""
    _check_pair(a, b, Encoding.UNIPOLAR)
    return Bitstream(a.bits & b.bits, Encoding.UNIPOLAR, _joint_group(a, b))


def xnor_mul(a: Bitstream, b: Bitstream) -> Bitstream:
    """Bipolar multiply: output bit i = NOT(a_i XOR b_i)."""
    _check_pair(a, b, Encoding.BIPOLAR)
    return Bitstream((a.bits ^ b.bits) ^ 1, Encoding.BIPOLAR, _joint_group(a, b))


def or_combine(a: Bitstream, b: Bitstream) -> Bitstream:
    """Bitwise OR.  For independent unipolar streams this approximates
    p + q - pq; for fully correlated streams it is an exact maximum."""
    _check_pair(a, b, None)
    return Bitstream(a.bits | b.bits, a.encoding, _joint_group(a, b))
