"""Full-adder primitives, the accumulative parallel counter (APC) and the
stochastic/binary converters.

The APC is generated as a Wallace-style column reduction: every column is
compressed with full adders (half adders where only two bits remain) until
one wire per weight survives.  The resulting netlist is evaluated wire by
wire, so the count really flows through the adder network, and the FA/HA
tally doubles as the gate-count input to the cost model.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil, log2
from typing import Optional, Sequence

import numpy as np

from .bitstream import Bitstream, Encoding
from .rns import uniform_below


@dataclass(frozen=True)
class FullAdderResult:
    sum: int
    carry: int


def full_add(a, b, cin):
    """One full adder: sum = a^b^cin, carry = majority(a, b, cin).
    Accepts scalars or numpy bit arrays."""
    s = a ^ b ^ cin
    c = (a & b) | (a & cin) | (b & cin)
    if isinstance(s, np.ndarray):
        return FullAdderResult(s, c)
    return FullAdderResult(int(s), int(c))


def half_add(a, b):
    s = a ^ b
    c = a & b
    if isinstance(s, np.ndarray):
        return FullAdderResult(s, c)
    return FullAdderResult(int(s), int(c))


class ApcTree:
    """n-input parallel counter built from full/half adders only."""

    def __init__(self, n_inputs: int):
        if n_inputs < 1:
            raise ValueError("APC needs at least one input")
        self.n_inputs = n_inputs
        self.output_width = max(1, ceil(log2(n_inputs + 1)))
        self._build()

    def _build(self) -> None:
        # Netlist: ("fa", a, b, c, s, cout) / ("ha", a, b, s, cout);
        # wire ids 0..n-1 are the inputs.
        next_wire = self.n_inputs
        columns = {0: list(range(self.n_inputs))}
        ops = []
        w = 0
        while w in columns:
            col = columns[w]
            while len(col) > 1:
                if len(col) >= 3:
                    a, b, c = col.pop(), col.pop(), col.pop()
                    s, cout = next_wire, next_wire + 1
                    next_wire += 2
                    ops.append(("fa", a, b, c, s, cout))
                else:
                    a, b = col.pop(), col.pop()
                    s, cout = next_wire, next_wire + 1
                    next_wire += 2
                    ops.append(("ha", a, b, s, cout))
                col.append(s)
                columns.setdefault(w + 1, []).append(cout)
            w += 1
        self._ops = ops
        self._n_wires = next_wire
        self._out_wires = {w: cols[0] for w, cols in columns.items()}
        self.fa_count = sum(1 for op in ops if op[0] == "fa")
        self.ha_count = sum(1 for op in ops if op[0] == "ha")

    def count(self, inputs) -> np.ndarray:
        """Population count of the input vector(s), evaluated through the
        adder network.  ``inputs`` has the input index on the last axis."""
        bits = np.asarray(inputs, dtype=np.uint8)
        if bits.shape[-1] != self.n_inputs:
            raise ValueError(
                f"expected {self.n_inputs} inputs, got {bits.shape[-1]}")
        scalar = bits.ndim == 1
        wires: list = [None] * self._n_wires
        for i in range(self.n_inputs):
            wires[i] = bits[..., i]
        for op in self._ops:
            if op[0] == "fa":
                _, a, b, c, s, cout = op
                r = full_add(wires[a], wires[b], wires[c])
            else:
                _, a, b, s, cout = op
                r = half_add(wires[a], wires[b])
            wires[s], wires[cout] = r.sum, r.carry
        total = np.zeros(bits.shape[:-1], dtype=np.int64)
        for w, wire in self._out_wires.items():
            total += np.asarray(wires[wire], dtype=np.int64) << w
        return int(total) if scalar else total

    def gate_counts(self) -> dict:
        return {"fa_count": self.fa_count, "ha_count": self.ha_count,
                "inverter_count": 0}

    def corrupt(self) -> None:
        """Test hook: swap one adder's sum/carry outputs so the count is
        wrong; used as a negative control by the checker command."""
        if not self._ops:
            return
        op = self._ops[0]
        if op[0] == "fa":
            self._ops[0] = (op[0], op[1], op[2], op[3], op[5], op[4])
        else:
            self._ops[0] = (op[0], op[1], op[2], op[4], op[3])


def apc_count(tree: ApcTree, inputs):
    return tree.count(inputs)


@dataclass(frozen=True)
class AdderTreeSpec:
    fan_in: int
    bypass: bool = False

    def __post_init__(self):
        if self.fan_in < 1 or self.fan_in & (self.fan_in - 1):
            raise ValueError("fan_in must be a power of two")


def adder_tree_sum(spec: AdderTreeSpec, counts: Sequence[int]) -> int:
    """Integer sum of APC outputs; bypass passes a single input through."""
    vals = list(counts)
    if spec.bypass:
        if len(vals) != 1:
            raise ValueError("bypass expects exactly one input")
        return int(vals[0])
    if len(vals) != spec.fan_in:
        raise ValueError(f"expected {spec.fan_in} counts, got {len(vals)}")
    while len(vals) > 1:
        vals = [vals[i] + vals[i + 1] for i in range(0, len(vals), 2)]
    return int(vals[0])


def adder_tree_gate_counts(spec: AdderTreeSpec, input_width: int) -> dict:
    """FA/HA tally of a ripple-carry reduction tree (cost model input)."""
    fa = ha = 0
    width, n = input_width, spec.fan_in
    while n > 1:
        fa += (width - 1) * (n // 2)
        ha += n // 2
        width += 1
        n //= 2
    return {"fa_count": fa, "ha_count": ha, "inverter_count": 0}


@dataclass(frozen=True)
class FixedPointValue:
    """Exact S2B result: ones count over k cycles (datapath stays integer;
    consumers divide)."""
    ones: int
    k: int
    encoding: Encoding

    @property
    def value(self) -> float:
        if self.encoding is Encoding.UNIPOLAR:
            return self.ones / self.k
        return (2 * self.ones - self.k) / self.k


def s2b(stream: Bitstream) -> FixedPointValue:
    return FixedPointValue(stream.ones(), stream.k, stream.encoding)


def b2s(count: int, max_count: int, k: int, source,
        group: Optional[str] = None) -> Bitstream:
    """Binary-to-stochastic: each cycle emits 1 iff count > R with R
    uniform over [0, max_count); expectation count / max_count."""
    if not 0 <= count <= max_count:
        raise ValueError(f"count {count} out of range [0, {max_count}]")
    if k < 1:
        raise ValueError("stream length must be positive")
    if hasattr(source, "uniform_int"):
        r = np.asarray(source.uniform_int(max_count, k))
    else:
        r = np.fromiter((uniform_below(source, max_count) for _ in range(k)),
                        dtype=np.int64, count=k)
    return Bitstream((count > r).astype(np.uint8), Encoding.UNIPOLAR, group)
