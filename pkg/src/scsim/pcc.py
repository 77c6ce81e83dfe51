"""Probability conversion circuits: comparator, MUX-chain and NAND-NOR chain.

Bit-index convention: X_1 is the least significant bit of the input word
(weight 2^0), X_N the most significant.  The chain PCCs consume one fresh
random bit per stage per output cycle; R_i is bit i-1 of the source word.

The NAND-NOR chain cascades reconfigurable NAND/NOR stages from a grounded
first input.  With inverters inserted on every even-indexed X_i (N even) or
every odd-indexed X_i (N odd) the chain's expected output becomes
A_N + sum_k X_k * 2^(k-1) / 2^N, i.e. the MUX-chain ramp plus a constant
offset A_N that is independent of X.  Exhaustive enumeration over all 2^N
random vectors is the ground truth here; the closed form and the stage
recurrence are both checked against it.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterator, Optional, Union

import numpy as np

from .bitstream import Bitstream, Encoding

MAX_PRECISION = 16


class PccKind(Enum):
    COMPARATOR = "comparator"
    MUX_CHAIN = "mux_chain"
    NAND_NOR = "nand_nor"


@dataclass(frozen=True)
class PccSpec:
    kind: PccKind
    n_bits: int

    def __post_init__(self):
        if not 1 <= self.n_bits <= MAX_PRECISION:
            raise ValueError(f"precision must be in [1, {MAX_PRECISION}]")


def _check_input(x: int, n: int) -> None:
    if not 0 <= x < (1 << n):
        raise ValueError(f"input word {x} out of range for {n} bits")


def cmp_bit(x: int, r: int, n: int):
    """Comparator PCC: 1 iff X > R (strict)."""
    _check_input(x, n)
    if isinstance(r, np.ndarray):
        return (x > r).astype(np.uint8)
    _check_input(r, n)
    return int(x > r)


def mux_chain_bit(x: int, r: Union[int, np.ndarray], n: int):
    """MUX-chain PCC unrolled from a grounded first input.

    Stage i passes O_{i-1} AND NOT(R_i) when X_i = 0 and O_{i-1} OR R_i
    when X_i = 1.  ``r`` packs R_i into bit i-1; arrays evaluate many
    cycles at once.
    """
    _check_input(x, n)
    out = _zeros_like(r)
    for i in range(n):
        ri = (r >> i) & 1
        if (x >> i) & 1:
            out = out | ri
        else:
            out = out & (ri ^ 1)
    return _as_bit(out, r)


def inverter_mask(n: int) -> int:
    """Stage-inverter mask (bit i-1 set = invert X_i): even-indexed stages
    for even N, odd-indexed stages for odd N."""
    if n < 1:
        raise ValueError("n must be positive")
    if n % 2 == 0:
        return sum(1 << i for i in range(1, n, 2))
    return sum(1 << i for i in range(0, n, 2))


def inverted_stages(n: int) -> frozenset:
    mask = inverter_mask(n)
    return frozenset(i + 1 for i in range(n) if (mask >> i) & 1)


def nandnor_chain_bit(x: int, r: Union[int, np.ndarray], n: int,
                      mask_override: Optional[int] = None):
    """NAND-NOR chain PCC with the parity inverter rule applied to every
    stage.  Effective control 0 selects NAND, 1 selects NOR; the first
    stage sees a grounded data input (NAND(0, R) = 1, NOR(0, R) = NOT R).
    ``mask_override`` substitutes a wrong inverter mask (negative-control
    hook for the verification command).
    """
    _check_input(x, n)
    mask = inverter_mask(n) if mask_override is None else mask_override
    eff = x ^ mask
    out = _zeros_like(r)
    for i in range(n):
        ri = (r >> i) & 1
        if (eff >> i) & 1:
            out = (out | ri) ^ 1     # NOR
        else:
            out = (out & ri) ^ 1     # NAND
    return _as_bit(out, r)


def _zeros_like(r):
    if isinstance(r, np.ndarray):
        return np.zeros(r.shape, dtype=r.dtype)
    return 0

def _as_bit(out, r):
    if isinstance(r, np.ndarray):
        return out.astype(np.uint8)
    return int(out)


def mux_chain_probability(x: int, n: int, exact: bool = False):
    """Expected MUX-chain output over fair random bits: X / 2^N."""
    _check_input(x, n)
    p = Fraction(x, 1 << n)
    return p if exact else float(p)


def chain_offset(n: int, exact: bool = False):
    """Constant term A_N of the NAND-NOR chain's expected output."""
    a = _a_n(n)
    return a if exact else float(a)


def _a_n(n: int) -> Fraction:
    # Closed-form constant: signed sum of the per-stage constants.  Stage 1
    # contributes its full constant; later stages contribute 1/2 plus an
    # extra 1/2 on non-inverted stages (where s_i carries a constant 1).
    half = Fraction(1, 2)
    mask = inverter_mask(n)
    stage1_const = Fraction(1) if not (mask & 1) else half
    total = (-half) ** (n - 1) * stage1_const
    for k in range(2, n + 1):
        total += half * (-half) ** (n - k)
        if not (mask >> (k - 1)) & 1:
            total += half * (-half) ** (n - k)
    return total


def nandnor_expected(x: int, n: int, exact: bool = False):
    """Expected NAND-NOR chain output, computed two ways that must agree:
    the unrolled stage recurrence m_i = -m_{i-1}/2 + c_i, and the closed
    form A_N + sum_k X_k 2^(k-1) / 2^N."""
    _check_input(x, n)
    half = Fraction(1, 2)
    mask = inverter_mask(n)
    eff = x ^ mask
    m = Fraction(0)
    for i in range(n):
        c = half if (eff >> i) & 1 else Fraction(1)   # NOR -> 1/2, NAND -> 1
        m = -half * m + c
    closed = _a_n(n) + Fraction(x, 1 << n)
    if m != closed:
        raise AssertionError(
            f"recurrence/closed-form mismatch at N={n}, X={x}: {m} vs {closed}")
    return m if exact else float(m)


def enumerate_chain_mean(kind: PccKind, x: int, n: int,
                         mask_override: Optional[int] = None) -> Fraction:
    """Exact mean output over all 2^N equally likely random vectors.
    Integer counting only; this is the sampling-noise-free oracle."""
    _check_input(x, n)
    r = np.arange(1 << n, dtype=np.int64)
    if kind is PccKind.COMPARATOR:
        bits = cmp_bit(x, r, n)
    elif kind is PccKind.MUX_CHAIN:
        bits = mux_chain_bit(x, r, n)
    else:
        bits = nandnor_chain_bit(x, r, n, mask_override)
    return Fraction(int(bits.sum()), 1 << n)


def expected_value(spec: PccSpec, x: int, exact: bool = False):
    """Analytic expected output of a PCC for input word x."""
    if spec.kind is PccKind.NAND_NOR:
        return nandnor_expected(x, spec.n_bits, exact)
    return mux_chain_probability(x, spec.n_bits, exact)


def generate_stream(spec: PccSpec, x: int, k: int, source,
                    group=None) -> Bitstream:
    """Drive the PCC for k cycles from a word source; unipolar output.
    A bipolar reinterpretation is a caller-side relabeling."""
    _check_input(x, spec.n_bits)
    if k < 1:
        raise ValueError("stream length must be positive")
    if source.width < spec.n_bits:
        raise ValueError(
            f"source width {source.width} < PCC precision {spec.n_bits}")
    words = np.asarray(source.words(k), dtype=np.int64) & ((1 << spec.n_bits) - 1)
    if spec.kind is PccKind.COMPARATOR:
        bits = cmp_bit(x, words, spec.n_bits)
    elif spec.kind is PccKind.MUX_CHAIN:
        bits = mux_chain_bit(x, words, spec.n_bits)
    else:
        bits = nandnor_chain_bit(x, words, spec.n_bits)
    return Bitstream(bits, Encoding.UNIPOLAR, group)


def conversion_curve(spec: PccSpec) -> Iterator[tuple]:
    """Analytic (X, expected value) rows for every input word; noise-free."""
    for x in range(1 << spec.n_bits):
        yield x, float(expected_value(spec, x))
