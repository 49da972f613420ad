"""Replay a workload trace through a protection scheme.

The replayer owns the glue between symbolic traces and concrete engines: it
resolves each event's VN source against the running on-chip counter state,
synthesizes deterministic payloads, maps object ranges onto the engine's
access granularity, and collects the resulting DRAM access log per compute
group. Tamper hooks run between events so attack campaigns can snapshot and
corrupt memory at precise points.

Payload modes:

* fast:   zero payloads, cipher and MAC arithmetic skipped. The access log is
          byte-for-byte identical to the real one; integrity checks are inert.
* real:   pseudo-random payloads, full crypto. Loads authenticate.
* verify: real, plus every load's plaintext is compared against the payload
          the matching store must have written. A divergence that no check
          caught is reported as a VerifyMismatch (silent corruption).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .baseline import BaselineConfig, BaselineMee
from .crypto import EncryptionKey, MacKey
from .dram import DATA, LINE, AccessRecord, PhysicalMemory
from .errors import ConfigError, TamperDetected, VerifyMismatch
from .mgx import MgxMee, MgxState
from .mgx import (
    update_genome as _st_genome,
    update_input as _st_input,
    update_query as _st_query,
    update_weights as _st_weights,
)
from .workloads.payload import payload_for
from .workloads.trace import READ, UPDATE_OPS, WRITE, Trace

SCHEMES = ("none", "baseline", "mgx")

Hook = Callable[[PhysicalMemory], None]

_STATE_UPDATES = {
    "update_i": _st_input,
    "update_w": _st_weights,
    "update_genome": _st_genome,
    "update_query": _st_query,
}


def derive_keys(seed: int) -> tuple[EncryptionKey, MacKey]:
    enc = hashlib.sha256(f"mgxsim-enc-{seed}".encode()).digest()[:16]
    mac = hashlib.sha256(f"mgxsim-mac-{seed}".encode()).digest()[:32]
    return EncryptionKey(enc), MacKey(mac)


def _next_pow2(x: int) -> int:
    return 1 << max(x - 1, 0).bit_length()


@dataclass
class ReplayResult:
    scheme: str
    payload_mode: str
    trace: Trace
    memory: PhysicalMemory
    log: list[AccessRecord]
    group_spans: list[tuple[int, int, int]] = field(default_factory=list)
    completed: bool = False
    events_processed: int = 0
    detected: TamperDetected | None = None
    detected_at_event: int | None = None
    mismatch: VerifyMismatch | None = None
    rekey_events: int = 0
    state: MgxState = field(default_factory=MgxState)

    @property
    def clean(self) -> bool:
        return self.completed and self.detected is None and self.mismatch is None


def _memory_for(trace: Trace, scheme: str, region_size: int | None) -> PhysicalMemory:
    if scheme == "baseline":
        # Metadata sits after the region; leave generous headroom above it.
        need = region_size + region_size // 4
    else:
        need = trace.span_end
    return PhysicalMemory(capacity=max(_next_pow2(need), 1 << 20))


def baseline_region_size(trace: Trace, region_mb: int = 128) -> int:
    """Protected region size a baseline replay of this trace will use: the
    configured size, grown to the next power of two when the trace needs more."""
    size = max(region_mb << 20, 1 << 20)
    if trace.span_end > size:
        size = _next_pow2(trace.span_end)
    return size


def replay(
    trace: Trace,
    scheme: str = "mgx",
    *,
    payload_mode: str = "fast",
    hooks: dict[int, Iterable[Hook] | Hook] | None = None,
    region_mb: int = 128,
    cache_kb: int = 4,
    tree_arity: int = 8,
    debug_ledger: bool = True,
    seed: int | None = None,
) -> ReplayResult:
    """Run every trace event through the chosen scheme and collect the log.

    `hooks[i]` callables run against physical memory immediately before event
    i executes. A TamperDetected from any engine check aborts the run and is
    recorded on the result rather than raised; ConfigError and invariant
    faults propagate, since they mean the input or the schedule is broken.
    """
    if scheme not in SCHEMES:
        raise ConfigError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if payload_mode not in ("fast", "real", "verify"):
        raise ConfigError(f"unknown payload mode {payload_mode!r}")
    use_crypto = payload_mode != "fast"
    enc_key, mac_key = derive_keys(trace.seed if seed is None else seed)

    region_size = baseline_region_size(trace, region_mb) if scheme == "baseline" else None
    memory = _memory_for(trace, scheme, region_size)
    engine: BaselineMee | MgxMee | None = None
    if scheme == "baseline":
        cfg = BaselineConfig(
            region_base=0,
            region_size=region_size,
            arity=tree_arity,
            cache_bytes=cache_kb * 1024,
        )
        engine = BaselineMee(cfg, memory, enc_key, mac_key, crypto=use_crypto)
        for obj in trace.objects.values():
            if obj.base % LINE:
                raise ConfigError(
                    f"object {obj.obj_id} base 0x{obj.base:x} not 64-byte aligned"
                )
    elif scheme == "mgx":
        engine = MgxMee(memory, enc_key, mac_key, crypto=use_crypto, debug=debug_ledger)

    result = ReplayResult(scheme, payload_mode, trace, memory, memory.log)
    state = MgxState()
    hooks = hooks or {}

    group_starts: list[tuple[int, int]] = []  # (group, first log index)

    def mark_group(g: int):
        if not group_starts or group_starts[-1][0] != g:
            group_starts.append((g, len(memory.log)))

    def finish_groups():
        spans = []
        for i, (g, start) in enumerate(group_starts):
            end = group_starts[i + 1][1] if i + 1 < len(group_starts) else len(memory.log)
            spans.append((g, start, end))
        result.group_spans = spans

    def payload(obj, vn: int, offset: int, length: int) -> bytes:
        if payload_mode == "fast":
            return bytes(length)
        return payload_for(obj, vn, offset, length)

    try:
        for i, ev in enumerate(trace.events):
            for hook in _hooks_at(hooks, i):
                hook(memory)
            mark_group(ev.group)
            if ev.op in UPDATE_OPS:
                state = _STATE_UPDATES[ev.op](state)
                if scheme == "mgx":
                    getattr(engine, _ENGINE_UPDATE[ev.op])()
                result.events_processed = i + 1
                continue
            obj = trace.objects.get(ev.obj_id)
            if obj is None:
                raise ConfigError(f"event {i} references unknown object {ev.obj_id!r}")
            if ev.offset < 0 or ev.offset + ev.length > obj.size:
                raise ConfigError(
                    f"event {i} range [{ev.offset},{ev.offset + ev.length}) exceeds "
                    f"object {obj.obj_id} of size {obj.size}"
                )
            vn = ev.vn_source.resolve(engine.state if scheme == "mgx" else state)
            if ev.op == WRITE:
                _do_write(scheme, engine, memory, obj, vn, ev, payload)
            elif ev.op == READ:
                got = _do_read(scheme, engine, memory, obj, vn, ev)
                if payload_mode == "verify":
                    want = payload_for(obj, vn, ev.offset, ev.length)
                    if got != want:
                        raise VerifyMismatch(
                            f"event {i}: {ev.obj_id}[{ev.offset}:{ev.offset + ev.length}] "
                            "differs from the expected payload",
                            event_index=i,
                        )
            else:
                raise ConfigError(f"unknown trace op {ev.op!r}")
            result.events_processed = i + 1
        if scheme == "baseline":
            # Drain dirty metadata; attribute the writeback burst to a final
            # group with no compute so timing models see it.
            flush_group = max(trace.compute_macs, default=-1) + 1
            mark_group(flush_group)
            engine.flush()
        result.completed = True
    except TamperDetected as td:
        result.detected = td
        result.detected_at_event = result.events_processed
    except VerifyMismatch as vm:
        result.mismatch = vm

    finish_groups()
    if engine is not None:
        result.rekey_events = engine.rekey_events
    result.state = engine.state if scheme == "mgx" else state
    return result


_ENGINE_UPDATE = {
    "update_i": "update_input",
    "update_w": "update_weights",
    "update_genome": "update_genome",
    "update_query": "update_query",
}


def _hooks_at(hooks, i) -> Iterable[Hook]:
    h = hooks.get(i)
    if h is None:
        return ()
    if callable(h):
        return (h,)
    return h


def _do_write(scheme, engine, memory, obj, vn, ev, payload):
    if scheme == "none":
        memory.write(obj.base + ev.offset, payload(obj, vn, ev.offset, ev.length), DATA)
    elif scheme == "mgx":
        engine.store(obj, vn, payload(obj, vn, ev.offset, ev.length), ev.offset)
    else:
        a0 = (ev.offset // LINE) * LINE
        a1 = -(-(ev.offset + ev.length) // LINE) * LINE
        engine.store(obj.base + a0, payload(obj, vn, a0, a1 - a0))


def _do_read(scheme, engine, memory, obj, vn, ev) -> bytes:
    if scheme == "none":
        return memory.read(obj.base + ev.offset, ev.length, DATA)
    if scheme == "mgx":
        pt, _, _ = engine.load(obj, vn, ev.offset, ev.length)
        return pt
    a0 = (ev.offset // LINE) * LINE
    a1 = -(-(ev.offset + ev.length) // LINE) * LINE
    pt, _, _ = engine.load(obj.base + a0, a1 - a0)
    return pt[ev.offset - a0 : ev.offset - a0 + ev.length]
