"""Random-number sources feeding the probability conversion circuits.

Three kinds: a Fibonacci LFSR with a primitive feedback polynomial (the
hardware source), a shared source that re-uses an LFSR through a bit
permutation, and a seeded ideal uniform source used as the statistical
oracle in Monte-Carlo experiments.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

# One primitive feedback polynomial per register width.  Taps are 1-based
# bit positions whose XOR forms the feedback bit; the period test validates
# every entry exhaustively (2^n - 1 states).
PRIMITIVE_TAPS = {
    3: (3, 2),
    4: (4, 3),
    5: (5, 3),
    6: (6, 5),
    7: (7, 6),
    8: (8, 6, 5, 4),
    9: (9, 5),
    10: (10, 7),
    11: (11, 9),
    12: (12, 6, 4, 1),
    13: (13, 4, 3, 1),
    14: (14, 5, 3, 1),
    15: (15, 14),
    16: (16, 15, 13, 4),
}

MIN_WIDTH = 3
MAX_WIDTH = 16


def taps_to_mask(taps: Sequence[int]) -> int:
    mask = 0
    for t in taps:
        mask |= 1 << (t - 1)
    return mask


class Lfsr:
    """Fibonacci LFSR: feedback bit = XOR of the tapped state bits, shifted
    in at the top; bit 0 of the emitted word is the output tap."""

    def __init__(self, width: int, taps: Optional[Sequence[int]] = None,
                 seed: int = 1):
        if not MIN_WIDTH <= width <= MAX_WIDTH:
            raise ValueError(f"LFSR width must be in [{MIN_WIDTH}, {MAX_WIDTH}]")
        if taps is None:
            taps = PRIMITIVE_TAPS[width]
        self.width = width
        self.taps_mask = taps_to_mask(taps)
        if self.taps_mask == 0 or self.taps_mask >> width:
            raise ValueError("tap positions must lie within the register width")
        mask = (1 << width) - 1
        state = seed & mask
        if state == 0:
            raise ValueError("all-zero LFSR state is the lock-up state")
        self._mask = mask
        self.state = state

    def step(self) -> int:
        fb = bin(self.state & self.taps_mask).count("1") & 1
        self.state = ((self.state << 1) | fb) & self._mask
        return self.state

    def words(self, n: int) -> np.ndarray:
        out = np.empty(n, dtype=np.uint32)
        for i in range(n):
            out[i] = self.step()
        return out

    def copy(self) -> "Lfsr":
        clone = Lfsr.__new__(Lfsr)
        clone.width = self.width
        clone.taps_mask = self.taps_mask
        clone._mask = self._mask
        clone.state = self.state
        return clone


def period(lfsr: Lfsr) -> int:
    """Cycle length of the state sequence from the current state."""
    probe = lfsr.copy()
    start = probe.state
    n = 0
    while True:
        probe.step()
        n += 1
        if probe.state == start or n > probe._mask + 1:
            return n


class SharedSource:
    """An LFSR shared across SNGs by permuting its output bits."""

    def __init__(self, base: Lfsr, permutation: Sequence[int]):
        perm = tuple(permutation)
        if sorted(perm) != list(range(base.width)):
            raise ValueError("permutation must be a bijection on bit positions")
        self.base = base
        self.permutation = perm
        self.width = base.width

    def _permute(self, word: int) -> int:
        out = 0
        for dst, src in enumerate(self.permutation):
            out |= ((word >> src) & 1) << dst
        return out

    def step(self) -> int:
        return self._permute(self.base.step())

    def words(self, n: int) -> np.ndarray:
        return np.fromiter((self.step() for _ in range(n)),
                           dtype=np.uint32, count=n)


class IdealSource:
    """Seeded uniform word source (PCG64 underneath); the oracle stand-in
    for ideal independent fair random bits."""

    def __init__(self, seed, width: int = 16):
        if not 1 <= width <= 32:
            raise ValueError("width must be in [1, 32]")
        self.width = width
        if isinstance(seed, np.random.SeedSequence):
            self._ss = seed
        else:
            self._ss = np.random.SeedSequence(seed)
        self._rng = np.random.Generator(np.random.PCG64(self._ss))

    def step(self) -> int:
        return int(self._rng.integers(0, 1 << self.width))

    def words(self, n: int) -> np.ndarray:
        return self._rng.integers(0, 1 << self.width, size=n, dtype=np.uint32)

    def uniform_int(self, bound: int, n: Optional[int] = None):
        """Exact uniform draw(s) over [0, bound)."""
        if n is None:
            return int(self._rng.integers(0, bound))
        return self._rng.integers(0, bound, size=n, dtype=np.int64)

    def spawn(self, n: int) -> list["IdealSource"]:
        """Derive n independent child sources deterministically."""
        return [IdealSource(c, self.width) for c in self._ss.spawn(n)]

    def fork(self) -> "IdealSource":
        """Fresh source replaying the same word sequence from the start."""
        return IdealSource(self._ss, self.width)


class BalancedSource:
    """Low-discrepancy word source: every block of 2^width draws covers each
    word exactly once, in a seeded shuffled order.

    This mimics the defining property of a maximal-period LFSR (all states
    visited once per period) without its fixed ordering, and gives stochastic
    streams whose value error falls with 1/k instead of 1/sqrt(k).
    """

    def __init__(self, seed, width: int = 8):
        if not 1 <= width <= 16:
            raise ValueError("width must be in [1, 16]")
        self.width = width
        self._rng = np.random.Generator(np.random.PCG64(
            seed if isinstance(seed, np.random.SeedSequence)
            else np.random.SeedSequence(seed)))
        self._pending = np.empty(0, dtype=np.int64)

    def _blocks(self, n: int, bound: int) -> np.ndarray:
        reps = -(-n // bound)
        out = np.concatenate([self._rng.permutation(bound)
                              for _ in range(reps)])[:n]
        return out.astype(np.int64)

    def words(self, n: int) -> np.ndarray:
        while len(self._pending) < n:
            self._pending = np.concatenate(
                [self._pending, self._blocks(1 << self.width,
                                             1 << self.width)])
        out, self._pending = self._pending[:n], self._pending[n:]
        return out.astype(np.uint32)

    def step(self) -> int:
        return int(self.words(1)[0])

    def uniform_int(self, bound: int, n: Optional[int] = None):
        """Balanced draw(s) over [0, bound): each value appears
        floor/ceil(n/bound) times, shuffled."""
        if n is None:
            return int(self._rng.integers(0, bound))
        return self._blocks(n, bound)


def uniform_below(source, bound: int) -> int:
    """Uniform integer in [0, bound) from a word source, by rejection
    (avoids modulo bias when bound is not a power of two)."""
    if bound < 1:
        raise ValueError("bound must be positive")
    if hasattr(source, "uniform_int"):
        return source.uniform_int(bound)
    nbits = (bound - 1).bit_length() or 1
    if nbits > source.width:
        raise ValueError("source too narrow for requested bound")
    mask = (1 << nbits) - 1
    while True:
        r = source.step() & mask
        if r < bound:
            return r
