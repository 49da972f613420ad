"""Closed-form performance model over a replayed access log.

Accelerator kernels are modeled as compute groups: each group's arithmetic
(MAC operations) overlaps its DRAM traffic via double buffering. For a group
moving r read bytes and w written bytes with c MAC operations:

    background writes:  t = max(c / macs_per_cycle, (r + w) / BW + L)
    synchronous writes: t = max(c / macs_per_cycle, r / BW + L) + w / BW

BW is channels * bytes_per_cycle_per_channel and L a fixed access latency
charged once per group; streaming hides the rest. Background mode never
exceeds synchronous mode for the same traffic, and extra traffic never makes
a group faster, which gives the scheme orderings their shape.

Traffic increase is measured in bytes: everything the engine moved (data and
metadata classes alike) divided by the bytes the trace's events name. An
unprotected replay moves exactly the named bytes, so its ratio is 1.0.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

from .dram import DATA, META_CLASSES, AccessRecord
from .errors import ConfigError
from .replay import ReplayResult


@dataclass(frozen=True)
class DramModel:
    channels: int = 1
    bytes_per_cycle_per_channel: float = 8.0
    fixed_latency: float = 100.0
    background_writes: bool = True

    def __post_init__(self):
        if self.channels < 1:
            raise ConfigError("need at least one DRAM channel")
        if self.bytes_per_cycle_per_channel <= 0:
            raise ConfigError("bytes per cycle per channel must be positive")

    @property
    def bandwidth(self) -> float:
        """Bytes per cycle across all channels."""
        return self.channels * self.bytes_per_cycle_per_channel


@dataclass(frozen=True)
class ComputeModel:
    macs_per_cycle: float = 2048.0

    def __post_init__(self):
        if self.macs_per_cycle <= 0:
            raise ConfigError("compute throughput must be positive")


@dataclass
class ProtectionStats:
    """Byte and access counts split by DRAM traffic class."""

    read_bytes: dict[str, int] = field(default_factory=dict)
    write_bytes: dict[str, int] = field(default_factory=dict)
    read_accesses: dict[str, int] = field(default_factory=dict)
    write_accesses: dict[str, int] = field(default_factory=dict)

    @classmethod
    def from_log(cls, log: Iterable[AccessRecord]) -> "ProtectionStats":
        s = cls()
        for rec in log:
            bytes_d = s.read_bytes if rec.op == "read" else s.write_bytes
            count_d = s.read_accesses if rec.op == "read" else s.write_accesses
            bytes_d[rec.klass] = bytes_d.get(rec.klass, 0) + rec.length
            count_d[rec.klass] = count_d.get(rec.klass, 0) + 1
        return s

    @property
    def data_bytes(self) -> int:
        return self.read_bytes.get(DATA, 0) + self.write_bytes.get(DATA, 0)

    @property
    def meta_bytes(self) -> int:
        return sum(self.read_bytes.get(k, 0) + self.write_bytes.get(k, 0) for k in META_CLASSES)

    @property
    def total_bytes(self) -> int:
        return self.data_bytes + self.meta_bytes


class GroupCost(NamedTuple):
    group: int
    read_bytes: int
    write_bytes: int
    compute_macs: float
    compute_cycles: float
    mem_cycles: float
    cycles: float


def _group_traffic(result: ReplayResult) -> dict[int, tuple[int, int]]:
    """Aggregate (read bytes, write bytes) per group id over the log spans."""
    traffic: dict[int, tuple[int, int]] = {}
    for g, start, end in result.group_spans:
        r, w = traffic.get(g, (0, 0))
        for rec in result.log[start:end]:
            if rec.op == "read":
                r += rec.length
            else:
                w += rec.length
        traffic[g] = (r, w)
    return traffic


def cost_groups(
    result: ReplayResult,
    dram: DramModel | None = None,
    compute: ComputeModel | None = None,
) -> list[GroupCost]:
    dram = dram or DramModel()
    compute = compute or ComputeModel()
    bw = dram.bandwidth
    traffic = _group_traffic(result)
    groups = set(traffic) | set(result.trace.compute_macs)
    costs = []
    for g in sorted(groups):
        r, w = traffic.get(g, (0, 0))
        macs = result.trace.compute_macs.get(g, 0.0)
        cc = macs / compute.macs_per_cycle
        lat = dram.fixed_latency
        if dram.background_writes:
            mem = (r + w) / bw + lat
            total = max(cc, mem)
        else:
            mem = r / bw + lat + w / bw
            total = max(cc, r / bw + lat) + w / bw
        costs.append(GroupCost(g, r, w, macs, cc, mem, total))
    return costs


def estimate_time(
    result: ReplayResult,
    dram: DramModel | None = None,
    compute: ComputeModel | None = None,
) -> float:
    """Estimated execution time in accelerator cycles."""
    return sum(c.cycles for c in cost_groups(result, dram, compute))


def traffic_increase(result: ReplayResult) -> float:
    payload = result.trace.payload_bytes()
    if payload == 0:
        return 1.0
    return ProtectionStats.from_log(result.log).total_bytes / payload


@dataclass
class SimResult:
    replay: ReplayResult
    stats: ProtectionStats
    groups: list[GroupCost]
    est_time: float
    traffic_increase: float
    dram: DramModel
    compute: ComputeModel

    @property
    def scheme(self) -> str:
        return self.replay.scheme


def evaluate(
    result: ReplayResult,
    dram: DramModel | None = None,
    compute: ComputeModel | None = None,
) -> SimResult:
    dram = dram or DramModel()
    compute = compute or ComputeModel()
    return SimResult(
        replay=result,
        stats=ProtectionStats.from_log(result.log),
        groups=cost_groups(result, dram, compute),
        est_time=estimate_time(result, dram, compute),
        traffic_increase=traffic_increase(result),
        dram=dram,
        compute=compute,
    )


def simulate(
    trace,
    scheme: str,
    dram: DramModel | None = None,
    compute: ComputeModel | None = None,
    **replay_kwargs,
) -> SimResult:
    """Replay a trace under a scheme and evaluate the performance model.

    Tamper rejections and payload mismatches abort the run; the exception
    carries the stats accumulated up to the aborting event so callers can
    still report partial traffic.
    """
    from .replay import replay

    result = replay(trace, scheme, **replay_kwargs)
    sim = evaluate(result, dram, compute)
    if result.detected is not None:
        result.detected.partial_stats = sim.stats
        raise result.detected
    if result.mismatch is not None:
        raise result.mismatch
    return sim


STATS_HEADER = [
    "scheme",
    "workload",
    "param",
    "value",
    "data_bytes",
    "meta_bytes",
    "traffic_increase",
    "est_time",
]


def stats_row(sim: SimResult, param: str = "", value="") -> dict:
    return {
        "scheme": sim.replay.scheme,
        "workload": sim.replay.trace.workload,
        "param": param,
        "value": value,
        "data_bytes": sim.stats.data_bytes,
        "meta_bytes": sim.stats.meta_bytes,
        "traffic_increase": f"{sim.traffic_increase:.6f}",
        "est_time": f"{sim.est_time:.1f}",
    }


def write_stats_csv(rows: Iterable[dict], path: str):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=STATS_HEADER)
        w.writeheader()
        for row in rows:
            w.writerow(row)
