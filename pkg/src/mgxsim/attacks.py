"""Tamper campaigns: randomized, consequential attacks against live replays.

Every trial picks a read the workload is guaranteed to perform, corrupts
bytes that read depends on immediately before it executes, and replays the
whole trace with full crypto. The outcome is classified from the replay
result:

* detected:  an integrity check raised before or at the consuming read;
* silent:    the run completed but a load returned wrong plaintext
             (possible only when the scheme has no effective check);
* clean:     the run completed with correct plaintext anyway.

Campaign classes:

* bitflip:   flip one ciphertext bit inside the read's range.
* splice:    overwrite a few bytes in the range with attacker-chosen bytes.
* relocate:  copy a different valid (ciphertext, tag) pair over the target's,
             i.e. move data the victim wrote somewhere else to this address.
* replay:    snapshot the target bytes and their co-located metadata right
             after an older write, let a newer write land, then restore the
             snapshot before the consuming read.

Attacks target data-plane bytes; metadata-only corruptions are exercised by
unit tests with forced cache refills, since whether they are ever observed
depends on cache state rather than on the workload.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .baseline import BaselineConfig, BaselineGeometry
from .dram import LINE, BitFlip, PhysicalMemory, Relocate, Replay, Splice
from .errors import ConfigError
from .replay import ReplayResult, baseline_region_size, replay
from .workloads.trace import READ, WRITE, Trace

ATTACKS = ("bitflip", "splice", "relocate", "replay")

_MAC_SLOT_W = 7  # packed tag width inside a baseline MAC line


@dataclass
class CampaignResult:
    scheme: str
    attack: str
    workload: str
    trials: int = 0
    detected: int = 0
    silent: int = 0
    clean: int = 0
    examples: list[str] = field(default_factory=list)

    @property
    def detection_rate(self) -> float:
        return self.detected / self.trials if self.trials else 0.0

    @property
    def corruption_rate(self) -> float:
        """Fraction of trials where tampered data was consumed unnoticed."""
        return self.silent / self.trials if self.trials else 0.0


class _TraceIndex:
    """Per-trace candidate tables shared by all trials of a campaign."""

    def __init__(self, trace: Trace):
        self.trace = trace
        self.reads: list[int] = []
        self.writes_by_obj: dict[str, list[tuple[int, int, int]]] = {}
        for i, ev in enumerate(trace.events):
            if ev.op == READ:
                self.reads.append(i)
            elif ev.op == WRITE:
                self.writes_by_obj.setdefault(ev.obj_id, []).append(
                    (i, ev.offset, ev.offset + ev.length)
                )
        if not self.reads:
            raise ConfigError("trace performs no reads; nothing to attack")
        self.replay_candidates = self._find_replay_candidates()

    def _find_replay_candidates(self) -> list[tuple[int, int, int, int]]:
        """(read_idx, older_write_idx, lo, hi): byte range of the read also
        covered by an older write with at least one newer write in between."""
        out = []
        for r in self.reads:
            ev = self.trace.events[r]
            rs, re = ev.offset, ev.offset + ev.length
            before = [
                w for w in self.writes_by_obj.get(ev.obj_id, [])
                if w[0] < r and w[1] < re and w[2] > rs
            ]
            if len(before) < 2:
                continue
            newest = before[-1]
            for w in before[:-1]:
                lo = max(rs, newest[1], w[1])
                hi = min(re, newest[2], w[2])
                if lo < hi:
                    out.append((r, w[0], lo, hi))
        return out

    def established_writes(self, before: int, exclude_obj: str | None = None):
        """Writes that completed before event index `before`."""
        out = []
        for obj_id, ws in self.writes_by_obj.items():
            if obj_id == exclude_obj:
                continue
            for i, s, e in ws:
                if i < before:
                    out.append((obj_id, s, e))
        return out


def _pick_read(index: _TraceIndex, rng: random.Random) -> tuple[int, object, int]:
    r = rng.choice(index.reads)
    ev = index.trace.events[r]
    obj = index.trace.objects[ev.obj_id]
    b = rng.randrange(ev.offset, ev.offset + ev.length)
    return r, obj, b


def _bitflip_hooks(index, rng, scheme, geom):
    r, obj, b = _pick_read(index, rng)
    action = BitFlip(obj.base + b, rng.randrange(8))
    return {r: lambda mem: mem.inject(action)}


def _splice_hooks(index, rng, scheme, geom):
    r, obj, b = _pick_read(index, rng)
    ev = index.trace.events[r]
    n = min(8, ev.offset + ev.length - b)
    addr = obj.base + b
    payload = bytes(rng.randrange(256) for _ in range(n))

    def inject(mem: PhysicalMemory):
        current = mem.peek(addr, n)
        data = payload
        if data == current:
            data = bytes([payload[0] ^ 1]) + payload[1:]
        mem.inject(Splice(addr, data))

    return {r: inject}


def _relocate_hooks(index, rng, scheme, geom):
    for _ in range(64):
        r, obj, b = _pick_read(index, rng)
        if scheme == "baseline":
            dst_block = (obj.base + b) // LINE * LINE
            sources = [
                (index.trace.objects[o].base + (s // LINE) * LINE)
                for o, s, e in index.established_writes(r)
                if e - (s // LINE) * LINE >= LINE
            ]
            sources = [a for a in sources if a != dst_block]
            if not sources:
                continue
            src_block = rng.choice(sources)
            actions = [Relocate(src_block, dst_block, LINE)]
            if geom is not None:
                sl, ss = geom.mac_slot(geom.block_index(src_block))
                dl, ds = geom.mac_slot(geom.block_index(dst_block))
                actions.append(
                    Relocate(sl + ss * _MAC_SLOT_W, dl + ds * _MAC_SLOT_W, _MAC_SLOT_W)
                )
            return {r: lambda mem: [mem.inject(a) for a in actions]}
        # mgx and none: move another chunk-sized unit of written data (and its
        # tag, when one exists) over the chunk the read will consume.
        c = b // obj.mac_granularity
        cs, ce = obj.chunk_extent(c)
        span = ce - cs
        sources = []
        for o, s, e in index.established_writes(r):
            so = index.trace.objects[o]
            for sc in so.covering_chunks(s, e - s):
                scs, sce = so.chunk_extent(sc)
                if scs >= s and sce <= e and sce - scs == span:
                    if so.obj_id != obj.obj_id or sc != c:
                        sources.append((so, sc, scs))
        if not sources:
            continue
        so, sc, scs = rng.choice(sources)
        actions = [Relocate(so.base + scs, obj.base + cs, span)]
        if scheme == "mgx":
            actions.append(Relocate(so.mac_addr(sc), obj.mac_addr(c), 8))
        return {r: lambda mem: [mem.inject(a) for a in actions]}
    raise ConfigError("no relocation source found for this trace")


def _replay_hooks(index, rng, scheme, geom):
    if not index.replay_candidates:
        raise ConfigError(
            "trace has no byte written twice before a read; replay attacks need one"
        )
    r, w1, lo, hi = rng.choice(index.replay_candidates)
    obj = index.trace.objects[index.trace.events[r].obj_id]
    b = rng.randrange(lo, hi)
    ranges: list[tuple[int, int]]
    if scheme == "baseline":
        block_addr = (obj.base + b) // LINE * LINE
        ranges = [(block_addr, LINE)]
        if geom is not None:
            blk = geom.block_index(block_addr)
            mac_line, _ = geom.mac_slot(blk)
            leaf = geom.level_line_addr(0, blk // geom.cfg.arity)
            ranges += [(mac_line, LINE), (leaf, LINE)]
    else:
        c = b // obj.mac_granularity
        cs, ce = obj.chunk_extent(c)
        ranges = [(obj.base + cs, ce - cs)]
        if scheme == "mgx":
            ranges.append((obj.mac_addr(c), 8))
    sids: list[int] = []

    def take(mem: PhysicalMemory):
        for addr, length in ranges:
            sids.append(mem.snapshot(addr, length))

    def restore(mem: PhysicalMemory):
        for sid in sids:
            mem.inject(Replay(sid))

    return {w1 + 1: take, r: restore}


_BUILDERS = {
    "bitflip": _bitflip_hooks,
    "splice": _splice_hooks,
    "relocate": _relocate_hooks,
    "replay": _replay_hooks,
}


def run_campaign(
    trace: Trace,
    scheme: str,
    attack: str,
    trials: int = 100,
    seed: int = 0,
    *,
    region_mb: int = 128,
    cache_kb: int = 4,
    tree_arity: int = 8,
) -> CampaignResult:
    """Run `trials` independent randomized attacks of one class."""
    if attack not in ATTACKS:
        raise ConfigError(f"unknown attack {attack!r}; expected one of {ATTACKS}")
    index = _TraceIndex(trace)
    geom = None
    if scheme == "baseline":
        geom = BaselineGeometry(
            BaselineConfig(
                region_base=0,
                region_size=baseline_region_size(trace, region_mb),
                arity=tree_arity,
                cache_bytes=cache_kb * 1024,
            )
        )
    result = CampaignResult(scheme, attack, trace.workload)
    build = _BUILDERS[attack]
    for t in range(trials):
        rng = random.Random(seed + t)
        hooks = build(index, rng, scheme, geom)
        run = replay(
            trace,
            scheme,
            payload_mode="verify",
            hooks=hooks,
            region_mb=region_mb,
            cache_kb=cache_kb,
            tree_arity=tree_arity,
        )
        result.trials += 1
        if run.detected is not None:
            result.detected += 1
            note = f"trial {t}: detected ({run.detected.reason})"
        elif run.mismatch is not None:
            result.silent += 1
            note = f"trial {t}: silent corruption at event {run.mismatch.event_index}"
        else:
            result.clean += 1
            note = f"trial {t}: no observable effect"
        if len(result.examples) < 5:
            result.examples.append(note)
    return result
