"""Simulated untrusted off-chip memory: sparse byte store, access log, tamper API.

Everything stored here is adversary-visible and adversary-writable. The tamper
API mutates contents without appearing in the access log, because the log
models traffic generated by the accelerator side only. On-chip state (cache
contents, tree root, scheme counters) lives in the scheme objects and is out of
reach of tampering by construction.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Union

from .errors import AddressError

LINE = 64

# Access classes. Schemes tag every access they issue with one of these.
DATA = "data"
VN_LINE = "vn_line"
MAC_LINE = "mac_line"
TREE_NODE = "tree_node"
META_CLASSES = (VN_LINE, MAC_LINE, TREE_NODE)


class AccessRecord(NamedTuple):
    op: str  # "read" | "write"
    klass: str  # DATA | VN_LINE | MAC_LINE | TREE_NODE
    addr: int
    length: int
    timestamp: int


@dataclass(frozen=True)
class BitFlip:
    addr: int
    bit: int  # 0..7 within the byte


@dataclass(frozen=True)
class Replay:
    """Restore a previously snapshotted region byte-for-byte."""

    snapshot_id: int


@dataclass(frozen=True)
class Relocate:
    """Copy `length` bytes from src to dst, leaving src untouched."""

    src: int
    dst: int
    length: int


@dataclass(frozen=True)
class Splice:
    """Overwrite a range with attacker-chosen bytes."""

    addr: int
    data: bytes


TamperAction = Union[BitFlip, Replay, Relocate, Splice]


class PhysicalMemory:
    """Sparse line-backed memory with a 0x00 fill for never-written bytes."""

    def __init__(self, capacity: int = 8 << 30):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._lines: dict[int, bytearray] = {}
        self.log: list[AccessRecord] = []
        self._snapshots: dict[int, tuple[int, bytes]] = {}
        self._next_snapshot = 0

    # -- raw access ---------------------------------------------------------

    def _check(self, addr: int, length: int):
        if addr < 0 or length < 0 or addr + length > self.capacity:
            raise AddressError(f"[0x{addr:x}, +{length}) outside capacity 0x{self.capacity:x}")

    def peek(self, addr: int, length: int) -> bytes:
        """Read without logging (tamper/test plumbing)."""
        self._check(addr, length)
        if length == 0:
            return b""
        first = addr // LINE
        last = (addr + length - 1) // LINE
        if first == last:
            line = self._lines.get(first)
            off = addr - first * LINE
            if line is None:
                return bytes(length)
            return bytes(line[off : off + length])
        parts = []
        pos = addr
        remaining = length
        for ln in range(first, last + 1):
            off = pos - ln * LINE
            take = min(LINE - off, remaining)
            line = self._lines.get(ln)
            parts.append(bytes(take) if line is None else bytes(line[off : off + take]))
            pos += take
            remaining -= take
        return b"".join(parts)

    def poke(self, addr: int, data: bytes):
        """Write without logging (tamper/test plumbing)."""
        self._check(addr, len(data))
        pos = addr
        view = memoryview(data)
        while view:
            ln = pos // LINE
            off = pos - ln * LINE
            take = min(LINE - off, len(view))
            line = self._lines.get(ln)
            if line is None:
                line = bytearray(LINE)
                self._lines[ln] = line
            line[off : off + take] = view[:take]
            pos += take
            view = view[take:]

    # -- logged access (the accelerator-side interface) ---------------------

    def read(self, addr: int, length: int, klass: str = DATA) -> bytes:
        out = self.peek(addr, length)
        self.log.append(AccessRecord("read", klass, addr, length, len(self.log)))
        return out

    def write(self, addr: int, data: bytes, klass: str = DATA):
        self.poke(addr, data)
        self.log.append(AccessRecord("write", klass, addr, len(data), len(self.log)))

    # -- tamper API ---------------------------------------------------------

    def snapshot(self, addr: int, length: int) -> int:
        self._check(addr, length)
        sid = self._next_snapshot
        self._next_snapshot += 1
        self._snapshots[sid] = (addr, self.peek(addr, length))
        return sid

    def inject(self, action: TamperAction):
        if isinstance(action, BitFlip):
            if not 0 <= action.bit < 8:
                raise ValueError("bit index must be 0..7")
            cur = self.peek(action.addr, 1)
            self.poke(action.addr, bytes([cur[0] ^ (1 << action.bit)]))
        elif isinstance(action, Replay):
            try:
                addr, blob = self._snapshots[action.snapshot_id]
            except KeyError:
                raise KeyError(f"unknown snapshot id {action.snapshot_id}") from None
            self.poke(addr, blob)
        elif isinstance(action, Relocate):
            self.poke(action.dst, self.peek(action.src, action.length))
        elif isinstance(action, Splice):
            self.poke(action.addr, action.data)
        else:
            raise TypeError(f"not a tamper action: {action!r}")


def write_log_csv(records: Iterable[AccessRecord], path: str):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["op", "class", "addr", "len", "timestamp"])
        for r in records:
            w.writerow([r.op, r.klass, r.addr, r.length, r.timestamp])
