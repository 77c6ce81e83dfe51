"""Bit-exact stochastic-computing circuit simulator and analytical SCNN
accelerator model."""

from .bitstream import Bitstream, Encoding, and_mul, decode, or_combine, xnor_mul
from .counter import ApcTree, b2s, s2b
from .pcc import PccKind, PccSpec, expected_value, generate_stream
from .rns import IdealSource, Lfsr, SharedSource

__version__ = "0.1.0"

__all__ = [
    "Bitstream", "Encoding", "and_mul", "decode", "or_combine", "xnor_mul",
    "ApcTree", "b2s", "s2b",
    "PccKind", "PccSpec", "expected_value", "generate_stream",
    "IdealSource", "Lfsr", "SharedSource",
    "__version__",
]
