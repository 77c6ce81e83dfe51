"""Correlation-aware SC neuron: 25 XNOR multipliers into a 25-input APC,
per-cycle re-stochasticization, and OR-based ReLU / max pooling.

Two random sources drive a neuron: one shared by all activation streams and
one shared by all weight streams.  Streams inside one correlation group see
the same random word every cycle, which is what turns the OR gate into an
exact maximum; activation/weight independence is what makes the XNOR
multipliers unbiased.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .bitstream import Bitstream, Encoding
from .counter import ApcTree
from .pcc import PccKind, PccSpec, cmp_bit, mux_chain_bit, nandnor_chain_bit

MAC_FAN_IN = 25

_tree25: Optional[ApcTree] = None


def mac_tree() -> ApcTree:
    global _tree25
    if _tree25 is None:
        _tree25 = ApcTree(MAC_FAN_IN)
    return _tree25


def pcc_bits(spec: PccSpec, x: int, words: np.ndarray) -> np.ndarray:
    """One PCC output bit per random word (vectorized over cycles)."""
    r = np.asarray(words, dtype=np.int64) & ((1 << spec.n_bits) - 1)
    if spec.kind is PccKind.COMPARATOR:
        return cmp_bit(x, r, spec.n_bits)
    if spec.kind is PccKind.MUX_CHAIN:
        return mux_chain_bit(x, r, spec.n_bits)
    return nandnor_chain_bit(x, r, spec.n_bits)


def correlated_streams(spec: PccSpec, words_x: Sequence[int], k: int, source,
                       group: str, encoding: Encoding = Encoding.BIPOLAR
                       ) -> list[Bitstream]:
    """Generate one stream per input word, all sharing the same per-cycle
    random words (a single correlation group)."""
    r = np.asarray(source.words(k), dtype=np.int64)
    return [Bitstream(pcc_bits(spec, x, r), encoding, group) for x in words_x]


@dataclass(frozen=True)
class ScNeuron:
    """One MAC's worth of work: 25 activation/weight word pairs."""
    act_words: tuple
    weight_words: tuple
    pcc_act: PccSpec
    pcc_weight: PccSpec
    k: int
    fan_in: int = MAC_FAN_IN

    def __post_init__(self):
        if len(self.act_words) != self.fan_in or len(self.weight_words) != self.fan_in:
            raise ValueError(f"neuron expects {self.fan_in} word pairs")
        if self.k < 1:
            raise ValueError("bitstream length must be positive")


def mac_cycle(act_bits, weight_bits, tree: Optional[ApcTree] = None):
    """APC count of the pairwise XNOR products for one cycle (or, with
    (..., 25)-shaped arrays, many cycles at once)."""
    a = np.asarray(act_bits, dtype=np.uint8)
    w = np.asarray(weight_bits, dtype=np.uint8)
    if a.shape != w.shape or a.shape[-1] != MAC_FAN_IN:
        raise ValueError(f"expected matching (..., {MAC_FAN_IN}) bit vectors")
    return (tree or mac_tree()).count((a ^ w) ^ 1)


def neuron_cycle_counts(neuron: ScNeuron, source_a, source_w) -> np.ndarray:
    """Per-cycle APC counts of the neuron over its k cycles."""
    ra = np.asarray(source_a.words(neuron.k), dtype=np.int64)
    rw = np.asarray(source_w.words(neuron.k), dtype=np.int64)
    acts = np.stack([pcc_bits(neuron.pcc_act, x, ra) for x in neuron.act_words],
                    axis=-1)
    wts = np.stack([pcc_bits(neuron.pcc_weight, x, rw) for x in neuron.weight_words],
                   axis=-1)
    return mac_cycle(acts, wts)


def neuron_forward(neuron: ScNeuron, source_a, source_w, source_b2s,
                   group: Optional[str] = None) -> Bitstream:
    """Full neuron pass: correlated activation streams, independent weight
    streams, per-cycle APC count, per-cycle B2S back to a stochastic bit.
    The bipolar output decodes to roughly (sum a_i w_i) / 25."""
    counts = neuron_cycle_counts(neuron, source_a, source_w)
    r = np.asarray(source_b2s.uniform_int(MAC_FAN_IN, neuron.k))
    return Bitstream((counts > r).astype(np.uint8), Encoding.BIPOLAR, group)


def _require_group(streams: Sequence[Bitstream]) -> str:
    groups = {s.group for s in streams}
    if len(groups) != 1 or None in groups:
        raise ValueError(
            "streams must share one correlation group; independent streams "
            "silently break the OR-as-max semantics")
    return streams[0].group


def relu(x_stream: Bitstream, zero_stream: Bitstream) -> Bitstream:
    """OR with a correlated zero-valued stream: max(x, 0) under shared-
    threshold generation."""
    if x_stream.encoding is not Encoding.BIPOLAR or \
            zero_stream.encoding is not Encoding.BIPOLAR:
        raise ValueError("relu operates on bipolar streams")
    if x_stream.k != zero_stream.k:
        raise ValueError("stream length mismatch")
    group = _require_group([x_stream, zero_stream])
    return Bitstream(x_stream.bits | zero_stream.bits, Encoding.BIPOLAR, group)


def max_pool(streams: Sequence[Bitstream]) -> Bitstream:
    """OR of all members of one correlation group: exact maximum under
    shared-threshold comparator generation."""
    if not streams:
        raise ValueError("max_pool needs at least one stream")
    group = _require_group(streams)
    if len({s.k for s in streams}) != 1:
        raise ValueError("stream length mismatch")
    bits = streams[0].bits
    for s in streams[1:]:
        bits = bits | s.bits
    return Bitstream(bits, streams[0].encoding, group)
