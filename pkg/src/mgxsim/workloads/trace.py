"""Trace representation: symbolic memory events plus the object map.

Events carry a symbolic VN source rather than a concrete number; the replayer
resolves sources against the running on-chip state, so the same trace is valid
whenever it is replayed. Counter-update events advance that state in-band.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from typing import NamedTuple

from ..errors import ConfigError, TraceFormatError
from ..mgx import (
    MgxState,
    ObjectDescriptor,
    get_vn_feature,
    get_vn_frame,
    get_vn_genome,
    get_vn_query,
    get_vn_weights,
)

READ = "read"
WRITE = "write"
UPDATE_OPS = ("update_i", "update_w", "update_genome", "update_query")


class VnSource(NamedTuple):
    kind: str  # weights | feature | frame | genome | query
    arg: int = 0

    def __str__(self):
        if self.kind in ("feature", "frame"):
            return f"{self.kind}:{self.arg}"
        return self.kind

    @classmethod
    def parse(cls, text: str) -> "VnSource":
        if ":" in text:
            kind, arg = text.split(":", 1)
            return cls(kind, int(arg))
        return cls(text)

    def resolve(self, state: MgxState) -> int:
        if self.kind == "weights":
            return get_vn_weights(state)
        if self.kind == "feature":
            return get_vn_feature(state, self.arg)
        if self.kind == "frame":
            return get_vn_frame(state, self.arg)
        if self.kind == "genome":
            return get_vn_genome(state)
        if self.kind == "query":
            return get_vn_query(state)
        raise ConfigError(f"unknown VN source kind {self.kind!r}")


class TraceEvent(NamedTuple):
    op: str  # READ | WRITE | one of UPDATE_OPS
    obj_id: str  # "" for update events
    vn_source: VnSource | None
    offset: int
    length: int
    group: int


@dataclass
class Trace:
    workload: str
    events: list[TraceEvent] = field(default_factory=list)
    objects: dict[str, ObjectDescriptor] = field(default_factory=dict)
    compute_macs: dict[int, float] = field(default_factory=dict)
    seed: int = 0

    @property
    def span_end(self) -> int:
        """One past the highest address any object (MAC shadow included) uses."""
        return max((o.end for o in self.objects.values()), default=0)

    @property
    def data_span_end(self) -> int:
        return max((o.base + o.size for o in self.objects.values()), default=0)

    def payload_bytes(self) -> int:
        """Bytes an unprotected accelerator would move for this trace."""
        return sum(e.length for e in self.events if e.op in (READ, WRITE))

    def groups(self) -> list[int]:
        seen: list[int] = []
        for e in self.events:
            if not seen or e.group != seen[-1]:
                seen.append(e.group)
        return seen


class TraceBuilder:
    """Incremental construction helper used by the generators."""

    def __init__(self, workload: str, seed: int = 0, base: int = 0, mac_granularity: int = 1024):
        self.trace = Trace(workload, seed=seed)
        self._cursor = _align64(base)
        self._group = -1
        self.mac_granularity = mac_granularity

    def alloc(self, obj_id: str, size: int, mac_granularity: int | None = None) -> ObjectDescriptor:
        if obj_id in self.trace.objects:
            raise ConfigError(f"duplicate object id {obj_id}")
        k = mac_granularity if mac_granularity is not None else self.mac_granularity
        base = self._cursor
        obj = ObjectDescriptor(obj_id, base, size, k)
        self._cursor = _align64(obj.end)
        self.trace.objects[obj_id] = obj
        return obj

    def new_group(self, compute_macs: float = 0.0) -> int:
        self._group += 1
        self.trace.compute_macs[self._group] = float(compute_macs)
        return self._group

    def read(self, obj: ObjectDescriptor, src: VnSource, offset: int = 0, length: int | None = None):
        n = obj.size - offset if length is None else length
        if n > 0:
            self.trace.events.append(TraceEvent(READ, obj.obj_id, src, offset, n, self._group))

    def write(self, obj: ObjectDescriptor, src: VnSource, offset: int = 0, length: int | None = None):
        n = obj.size - offset if length is None else length
        if n > 0:
            self.trace.events.append(TraceEvent(WRITE, obj.obj_id, src, offset, n, self._group))

    def update(self, op: str):
        if op not in UPDATE_OPS:
            raise ConfigError(f"unknown update op {op}")
        if self._group < 0:
            self.new_group()
        self.trace.events.append(TraceEvent(op, "", None, 0, 0, self._group))


def _align64(x: int) -> int:
    return (x + 63) & ~63


# -- export / import --------------------------------------------------------

def export_trace(trace: Trace, csv_path: str):
    """Write the event stream as CSV plus a .meta.json sidecar holding the
    object map and per-group compute weights."""
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["op", "obj_id", "vn_source", "offset", "len", "group"])
        for e in trace.events:
            w.writerow(
                [e.op, e.obj_id, str(e.vn_source) if e.vn_source else "", e.offset, e.length, e.group]
            )
    meta = {
        "workload": trace.workload,
        "seed": trace.seed,
        "objects": [
            {
                "obj_id": o.obj_id,
                "base": o.base,
                "size": o.size,
                "mac_granularity": o.mac_granularity,
                "mac_base": o.mac_start,
            }
            for o in trace.objects.values()
        ],
        "compute_macs": {str(g): v for g, v in trace.compute_macs.items()},
    }
    with open(csv_path + ".meta.json", "w") as fh:
        json.dump(meta, fh, indent=1)


def import_trace(csv_path: str) -> Trace:
    if not os.path.exists(csv_path):
        raise ConfigError(f"no such trace file: {csv_path}")
    try:
        with open(csv_path + ".meta.json") as fh:
            meta = json.load(fh)
    except FileNotFoundError as exc:
        raise TraceFormatError(f"missing trace sidecar {csv_path}.meta.json") from exc
    except json.JSONDecodeError as exc:
        raise TraceFormatError(f"bad trace sidecar {csv_path}.meta.json: {exc}") from exc
    trace = Trace(meta.get("workload", "imported"), seed=int(meta.get("seed", 0)))
    try:
        for o in meta["objects"]:
            trace.objects[o["obj_id"]] = ObjectDescriptor(
                o["obj_id"], o["base"], o["size"], o["mac_granularity"], o.get("mac_base")
            )
    except (KeyError, TypeError, ConfigError) as exc:
        raise TraceFormatError(f"bad object map in {csv_path}.meta.json: {exc}") from exc
    trace.compute_macs = {int(g): float(v) for g, v in meta.get("compute_macs", {}).items()}
    with open(csv_path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd, None)
        if header != ["op", "obj_id", "vn_source", "offset", "len", "group"]:
            raise TraceFormatError(f"unrecognized trace header in {csv_path}")
        for row in rd:
            if not row:
                continue
            try:
                op, obj_id, src, offset, length, group = row
                ev = TraceEvent(
                    op,
                    obj_id,
                    VnSource.parse(src) if src else None,
                    int(offset),
                    int(length),
                    int(group),
                )
            except (ValueError, ConfigError) as exc:
                raise TraceFormatError(f"bad trace row {row!r}: {exc}") from exc
            if ev.op in (READ, WRITE):
                if ev.obj_id not in trace.objects:
                    raise TraceFormatError(f"trace row references unknown object {ev.obj_id!r}")
                if ev.vn_source is None:
                    raise TraceFormatError(f"memory event without VN source: {row!r}")
            elif ev.op not in UPDATE_OPS:
                raise TraceFormatError(f"unknown trace op {ev.op!r}")
            trace.events.append(ev)
    return trace
