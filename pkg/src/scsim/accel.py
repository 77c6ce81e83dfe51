"""Analytical accelerator model: channel/MAC structure, memory-coverage
pipeline planning, technology cost profiles and channel-count sweeps.

The datapath is c channels of 16 MAC units, each MAC holding 25 stochastic
multipliers and one 25-input counter, so one MAC evaluates one neuron group
per k-cycle batch.  Off-chip bandwidth limits how many neuron operand sets
arrive per clock (n_memcover); the pipeline planner picks one of three
execution modes from the ratio of on-chip neurons to that coverage and
yields an exact integer cycle count per layer.

Profiles carry measured per-block area/delay/energy for two 10 nm
technologies; all rollups are plain arithmetic on those constants, so every
derived figure is reproducible from the shipped JSON.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from math import ceil
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

MACS_PER_CHANNEL = 16
MULTIPLIERS_PER_MAC = 25

DEFAULT_BANDWIDTH_B_PER_NS = 224.0

# MAC-group invocation counts of the default workload, a LeNet-5-shape
# network on 28x28 inputs after zero-padding every fan-in to multiples of
# 25: conv1 6x24x24, conv2 16x8x8 x6 groups, fc1 120 x16 groups,
# fc2 84 x5 groups, fc3 10 x4 groups.
DEFAULT_LAYER_MACS = (3456, 6144, 1920, 420, 40)


@dataclass(frozen=True)
class AcceleratorConfig:
    channels: int
    tau_ns: float
    n_bits: int
    k: int
    macs_per_channel: int = MACS_PER_CHANNEL
    multipliers_per_mac: int = MULTIPLIERS_PER_MAC

    def __post_init__(self):
        if min(self.channels, self.n_bits, self.k, self.macs_per_channel,
               self.multipliers_per_mac) < 1 or self.tau_ns <= 0:
            raise ValueError("all accelerator parameters must be positive")

    @property
    def n_onchip(self) -> int:
        return self.channels * self.macs_per_channel


@dataclass(frozen=True)
class MemoryModel:
    bandwidth_b_per_ns: float = DEFAULT_BANDWIDTH_B_PER_NS

    def __post_init__(self):
        if self.bandwidth_b_per_ns <= 0:
            raise ValueError("bandwidth must be positive")


def bytes_per_neuron(n_bits: int) -> float:
    """Operand bytes per neuron per batch: 25 weights + 25 activations."""
    return 2 * MULTIPLIERS_PER_MAC * n_bits / 8


@dataclass(frozen=True)
class LayerWorkload:
    n_neurons: int          # MAC-group invocations for the layer
    bytes_per_neuron: float

    def __post_init__(self):
        if self.n_neurons < 1 or self.bytes_per_neuron <= 0:
            raise ValueError("workload must be positive")


def default_workloads(n_bits: int = 8) -> list:
    b = bytes_per_neuron(n_bits)
    return [LayerWorkload(n, b) for n in DEFAULT_LAYER_MACS]


class PipelineMode(Enum):
    NON_PIPELINED = "non_pipelined"
    PARTIALLY_PIPELINED = "partially_pipelined"
    FULLY_PIPELINED = "fully_pipelined"


@dataclass(frozen=True)
class PipelinePlan:
    mode: PipelineMode
    n_parallel: int
    n_memcover: int
    cycle: int              # sequential on-chip batches, ceil(neurons/onchip)
    incycle_pipe: int       # 0 in the non-pipelined mode
    d_layer_ns: float

    @property
    def cycles(self) -> int:
        return round(self.d_layer_ns / self._tau) if self._tau else 0

    _tau: float = 0.0


def mem_cover(layer: LayerWorkload, mem: MemoryModel, tau_ns: float) -> int:
    """Neurons whose operands the memory can deliver per clock; clamped to
    at least 1 so starved configurations stay well-defined."""
    if tau_ns <= 0:
        raise ValueError("clock period must be positive")
    return max(1, int(mem.bandwidth_b_per_ns * tau_ns / layer.bytes_per_neuron))


def plan_counts(n_neurons: int, n_onchip: int, n_memcover: int, k: int,
                tau_ns: float) -> PipelinePlan:
    """Pipeline-mode selection over explicit counts.

    Non-pipelined when memory out-covers the array (D = cycle*k*tau); else
    incycle = ceil(n_onchip/n_memcover) and the layer is partially
    pipelined below incycle = k (D = [cycle*(k+1) + incycle - 1]*tau) or
    fully pipelined at and above it (D = (k + incycle)*tau).  The batch
    count cycle = ceil(n_neurons/n_onchip) in both non-pipelined and
    partial modes.
    """
    cycle = ceil(n_neurons / n_onchip)
    if n_onchip < n_memcover:
        return PipelinePlan(PipelineMode.NON_PIPELINED, n_onchip, n_memcover,
                            cycle, 0, cycle * k * tau_ns, tau_ns)
    incycle = ceil(n_onchip / n_memcover)
    if incycle < k:
        d = (cycle * (k + 1) + incycle - 1) * tau_ns
        return PipelinePlan(PipelineMode.PARTIALLY_PIPELINED, n_onchip,
                            n_memcover, cycle, incycle, d, tau_ns)
    d = (k + incycle) * tau_ns
    return PipelinePlan(PipelineMode.FULLY_PIPELINED, n_onchip, n_memcover,
                        cycle, incycle, d, tau_ns)


def plan_pipeline(layer: LayerWorkload, config: AcceleratorConfig,
                  mem: MemoryModel) -> PipelinePlan:
    cover = mem_cover(layer, mem, config.tau_ns)
    return plan_counts(layer.n_neurons, config.n_onchip, cover, config.k,
                       config.tau_ns)


def _allocate(layer: LayerWorkload, config: AcceleratorConfig,
              mem: MemoryModel) -> PipelinePlan:
    """Resource allocation: the planner may drive fewer neurons than the
    array holds (idle MACs) when that shortens the layer.  Searching the
    cycle-count breakpoints ceil(n/j) covers every locally optimal width,
    which makes layer delay non-increasing in the channel budget."""
    cover = mem_cover(layer, mem, config.tau_ns)
    budget = min(config.n_onchip, layer.n_neurons)
    j = np.arange(1, layer.n_neurons + 1)
    cands = np.unique(-(-layer.n_neurons // j))
    cands = [int(v) for v in cands[cands <= budget]]
    # smallest width already in the fully pipelined region
    fully_edge = cover * (config.k - 1) + 1
    if fully_edge <= budget:
        cands.append(fully_edge)
    best = None
    for m in cands + [budget]:
        plan = plan_counts(layer.n_neurons, m, cover, config.k, config.tau_ns)
        if best is None or plan.d_layer_ns < best.d_layer_ns:
            best = plan
    return best


def _as_workloads(model_or_workloads, n_bits: int) -> list:
    if isinstance(model_or_workloads, (list, tuple)):
        return list(model_or_workloads)
    from .network import mac_invocations
    b = bytes_per_neuron(n_bits)
    return [LayerWorkload(n, b) for n in mac_invocations(model_or_workloads)]


def network_latency(model_or_workloads, config: AcceleratorConfig,
                    mem: MemoryModel) -> float:
    """Total latency (ns): sum of per-layer delays under allocation."""
    workloads = _as_workloads(model_or_workloads, config.n_bits)
    return sum(_allocate(w, config, mem).d_layer_ns for w in workloads)


# ---------------------------------------------------------------------------
# technology profiles and cost rollup


@dataclass(frozen=True)
class BlockCost:
    area_um2: float
    delay_ns: float
    energy_pj: float

    def __post_init__(self):
        if min(self.area_um2, self.delay_ns, self.energy_pj) <= 0:
            raise ValueError("block cost entries must be positive")


@dataclass(frozen=True)
class TechProfile:
    name: str
    pcc: BlockCost
    apc: BlockCost
    channel: BlockCost
    supply_v: float
    area_scale: float = 1.0
    delay_scale: float = 1.0
    power_scale: float = 1.0


def _block(entry: dict) -> BlockCost:
    if "delay_ps" in entry:
        return BlockCost(entry["area_um2"], entry["delay_ps"] * 1e-3,
                         entry["energy_fj"] * 1e-3)
    return BlockCost(entry["area_um2"], entry["delay_ns"], entry["energy_pj"])


def load_profiles(path=None) -> dict:
    """Named profiles from JSON; the bundled file carries the two measured
    10 nm technologies and their library scaling factors."""
    if path is None:
        path = Path(__file__).parent / "data" / "tech_profiles.json"
    with open(path) as fh:
        doc = json.load(fh)
    profiles = {}
    for name, entry in doc.items():
        try:
            scaling = entry.get("scaling", {})
            profiles[name] = TechProfile(
                name, _block(entry["pcc"]), _block(entry["apc"]),
                _block(entry["channel"]), entry["supply_v"],
                scaling.get("area", 1.0), scaling.get("delay", 1.0),
                scaling.get("power", 1.0))
        except KeyError as exc:
            raise KeyError(f"profile {name!r}: missing entry {exc}") from exc
    return profiles


def gain(reference: float, proposed: float) -> float:
    """Relative improvement of `proposed` over `reference`, in percent
    (positive = proposed better for area/delay/energy)."""
    return 100.0 * (reference - proposed) / reference


def rollup_cost(config: AcceleratorConfig, profile: TechProfile,
                workloads=None, fixed_overhead_um2: float = 0.0) -> dict:
    """Area, minimum clock and switching energy of a full configuration.

    Logic area replicates the channel block; the clock floor is the worst
    per-block critical delay; switching energy charges one channel-energy
    share per active MAC-cycle (idle units draw nothing, leakage excluded).
    """
    area = config.channels * profile.channel.area_um2 + fixed_overhead_um2
    min_clock = max(profile.pcc.delay_ns, profile.apc.delay_ns,
                    profile.channel.delay_ns)
    energy = 0.0
    if workloads is not None:
        per_mac_cycle = profile.channel.energy_pj / config.macs_per_channel
        for w in _as_workloads(workloads, config.n_bits):
            energy += w.n_neurons * config.k * per_mac_cycle
    return {"area_um2": area, "min_clock_ns": min_clock,
            "energy_pj": energy}


def metrics(area: float, energy: float, delay: float) -> dict:
    if min(area, energy, delay) <= 0:
        raise ValueError("metric inputs must be positive")
    return {"adp": area * delay, "edp": energy * delay,
            "edap": energy * delay * area}


@dataclass(frozen=True)
class SweepRow:
    channels: int
    profile: str
    area_um2: float
    latency_ns: float
    energy_pj: float
    adp: float
    edp: float
    edap: float


def channel_sweep(model_or_workloads, channel_range: Sequence[int],
                  profiles: Union[dict, Sequence[TechProfile]],
                  mem: Optional[MemoryModel] = None, n_bits: int = 8,
                  k: int = 32) -> list:
    """One row per (channel count, profile): totals plus the product
    figures of merit.  Each profile runs at its own minimum clock."""
    if len(channel_range) == 0:
        raise ValueError("channel range must be non-empty")
    mem = mem or MemoryModel()
    if isinstance(profiles, dict):
        profiles = list(profiles.values())
    rows = []
    for prof in profiles:
        tau = max(prof.pcc.delay_ns, prof.apc.delay_ns, prof.channel.delay_ns)
        for c in channel_range:
            cfg = AcceleratorConfig(c, tau, n_bits, k)
            workloads = _as_workloads(model_or_workloads, n_bits)
            cost = rollup_cost(cfg, prof, workloads)
            latency = network_latency(workloads, cfg, mem)
            m = metrics(cost["area_um2"], cost["energy_pj"], latency)
            rows.append(SweepRow(c, prof.name, cost["area_um2"], latency,
                                 cost["energy_pj"], m["adp"], m["edp"],
                                 m["edap"]))
    return rows


def argmin_channels(rows: Sequence[SweepRow], metric: str) -> dict:
    """Best channel count per profile for one metric column."""
    best = {}
    for row in rows:
        val = getattr(row, metric)
        if row.profile not in best or val < getattr(best[row.profile], metric):
            best[row.profile] = row
    return {name: row.channels for name, row in best.items()}
