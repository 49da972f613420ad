"""Object-granularity protection with on-chip version number generation.

Version numbers are never stored off-chip: a handful of on-chip counters plus
a static 8-bit ID per producer vertex regenerate the VN of any object on
demand, so there is no VN storage, no VN traffic and no integrity tree. The
only metadata is one 64-bit MAC per k-byte chunk of each object, written next
to the object. The VN layouts are:

    weights                ctr_w                      (64-bit)
    feature edge vid       ctr_i << 8 | vid           (56 || 8)
    frame buffer, frame F  ctr_i << 8 | F             (56 || 8)
    genome tables          ctr_genome                 (32-bit)
    queries / traceback    ctr_genome << 32 | ctr_query

Counters only ever move forward, and an 8-bit vID is unique per producer, so
two writes to one address can share a VN only if the schedule is broken; the
optional debug ledger asserts that at cipher-block granularity.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable

from .crypto import EncryptionKey, MacKey, compute_mac, keystream_xor_at
from .dram import DATA, MAC_LINE, AccessRecord, PhysicalMemory
from .errors import ConfigError, SecurityInvariantFault, TamperDetected

MAC_BYTES = 8
CTR_I_LIMIT = 1 << 56
CTR_32_LIMIT = 1 << 32


def _align16(x: int) -> int:
    return (x + 15) & ~15


@dataclass(frozen=True)
class MgxState:
    """The complete on-chip state a re-instantiated accelerator would need."""

    ctr_i: int = 0
    ctr_w: int = 0
    ctr_genome: int = 0
    ctr_query: int = 0


def get_vn_weights(state: MgxState) -> int:
    return state.ctr_w


def get_vn_feature(state: MgxState, vid: int) -> int:
    if not 1 <= vid < 256:
        raise ConfigError(f"vID {vid} outside 1..255 (8-bit, 0 reserved)")
    return (state.ctr_i << 8) | vid


def get_vn_frame(state: MgxState, frame: int) -> int:
    if not 0 <= frame < 256:
        raise ConfigError(f"frame number {frame} does not fit the 8-bit field")
    return (state.ctr_i << 8) | frame


def get_vn_genome(state: MgxState) -> int:
    return state.ctr_genome


def get_vn_query(state: MgxState) -> int:
    return (state.ctr_genome << 32) | state.ctr_query


def update_input(state: MgxState) -> MgxState:
    return replace(state, ctr_i=state.ctr_i + 1)


def update_weights(state: MgxState) -> MgxState:
    return replace(state, ctr_w=state.ctr_w + 1)


def update_genome(state: MgxState) -> MgxState:
    return replace(state, ctr_genome=state.ctr_genome + 1)


def update_query(state: MgxState) -> MgxState:
    return replace(state, ctr_query=state.ctr_query + 1)


@dataclass(frozen=True)
class ObjectDescriptor:
    """A contiguous protected object and the location of its MAC shadow."""

    obj_id: str
    base: int
    size: int
    mac_granularity: int = 1024
    mac_base: int | None = None

    def __post_init__(self):
        if self.size < 0 or self.base < 0:
            raise ConfigError("object base/size must be non-negative")
        if self.mac_granularity < 1:
            raise ConfigError("mac granularity must be at least 1 byte")
        if self.base % 16:
            raise ConfigError("object base must be 16-byte aligned (cipher-block grid)")

    @property
    def mac_start(self) -> int:
        return self.mac_base if self.mac_base is not None else _align16(self.base + self.size)

    @property
    def num_chunks(self) -> int:
        k = self.mac_granularity
        return (self.size + k - 1) // k

    @property
    def end(self) -> int:
        """One past the last byte this object occupies, MAC shadow included."""
        return self.mac_start + MAC_BYTES * self.num_chunks

    def chunk_extent(self, c: int) -> tuple[int, int]:
        k = self.mac_granularity
        return c * k, min((c + 1) * k, self.size)

    def covering_chunks(self, offset: int, length: int) -> range:
        if length <= 0:
            return range(0)
        k = self.mac_granularity
        return range(offset // k, (offset + length - 1) // k + 1)

    def mac_addr(self, c: int) -> int:
        return self.mac_start + MAC_BYTES * c


class WriteLedger:
    """Debug record of every (cipher-block, VN) write pair within a key epoch."""

    def __init__(self):
        self._pairs: set[tuple[int, int]] = set()

    def __len__(self):
        return len(self._pairs)

    def record(self, first_block: int, last_block: int, vn: int):
        for b in range(first_block, last_block + 1):
            pair = (b, vn)
            if pair in self._pairs:
                raise SecurityInvariantFault(
                    f"counter reuse: cipher block 0x{b * 16:x} written twice under VN {vn}"
                )
            self._pairs.add(pair)

    def clear(self):
        self._pairs.clear()


class MgxMee:
    """Encryption and integrity engine for accelerator-managed objects."""

    def __init__(
        self,
        memory: PhysicalMemory,
        enc_key: EncryptionKey,
        mac_key: MacKey,
        *,
        crypto: bool = True,
        debug: bool = True,
    ):
        self.mem = memory
        self.enc_key = enc_key
        self.mac_key = mac_key
        self.crypto = crypto
        self.debug = debug
        self.state = MgxState()
        self.ledger = WriteLedger()
        # obj_id -> append-only list of (start, end, vn); newest last
        self._shadow: dict[str, list[tuple[int, int, int]]] = {}
        self.rekey_events = 0

    # -- counter updates ----------------------------------------------------

    def _wrap(self, value: int, limit: int) -> int:
        if value >= limit:
            # A full counter forces a key change; the ledger starts a new epoch.
            self.rekey_events += 1
            self.ledger.clear()
            return 1
        return value

    def update_input(self):
        self.state = replace(self.state, ctr_i=self._wrap(self.state.ctr_i + 1, CTR_I_LIMIT))

    def update_weights(self):
        self.state = replace(self.state, ctr_w=self._wrap(self.state.ctr_w + 1, 1 << 64))

    def update_genome(self):
        self.state = replace(
            self.state, ctr_genome=self._wrap(self.state.ctr_genome + 1, CTR_32_LIMIT)
        )

    def update_query(self):
        self.state = replace(
            self.state, ctr_query=self._wrap(self.state.ctr_query + 1, CTR_32_LIMIT)
        )

    # -- data path ----------------------------------------------------------

    def store(
        self, obj: ObjectDescriptor, vn: int, data: bytes, offset: int = 0
    ) -> list[AccessRecord]:
        """Encrypt and write part of an object under one VN, refreshing the
        MAC of every chunk the write touches.

        Chunk MACs always cover the chunk's full current extent; a store that
        covers a chunk only partially fetches the missing bytes back (counted
        as data reads) so the stored MAC stays the MAC of what is in memory.
        """
        end = offset + len(data)
        if offset < 0 or end > obj.size:
            raise ConfigError(
                f"store [{offset},{end}) outside object {obj.obj_id} of size {obj.size}"
            )
        if not data:
            return []
        start_rec = len(self.mem.log)
        if self.debug:
            self.ledger.record(
                (obj.base + offset) // 16, (obj.base + end - 1) // 16, vn
            )
            self._shadow.setdefault(obj.obj_id, []).append((offset, end, vn))
        if self.crypto:
            ct = keystream_xor_at(self.enc_key, obj.base, vn, offset, data)
        else:
            ct = bytes(len(data))
        self.mem.write(obj.base + offset, ct, DATA)
        for c in obj.covering_chunks(offset, len(data)):
            cs, ce = obj.chunk_extent(c)
            before = b""
            after = b""
            if cs < offset:
                before = self.mem.read(obj.base + cs, offset - cs, DATA)
            if ce > end:
                after = self.mem.read(obj.base + end, ce - end, DATA)
            if self.crypto:
                chunk_ct = before + ct[max(cs - offset, 0) : ce - offset] + after
                tag = compute_mac(self.mac_key, chunk_ct, obj.base + cs, vn).tag
            else:
                tag = bytes(MAC_BYTES)
            self.mem.write(obj.mac_addr(c), tag, MAC_LINE)
        return self.mem.log[start_rec:]

    def load(
        self, obj: ObjectDescriptor, vn: int, offset: int = 0, length: int | None = None
    ) -> tuple[bytes, bool, list[AccessRecord]]:
        """Fetch the chunks covering a range, verify each chunk MAC under the
        caller-regenerated VN, and return the decrypted requested bytes.

        Returns (plaintext, accepted, accesses); any MAC mismatch raises
        TamperDetected. With debug on, also asserts that every requested byte
        was most recently written under exactly this VN.
        """
        if length is None:
            length = obj.size - offset
        end = offset + length
        if offset < 0 or length < 0 or end > obj.size:
            raise ConfigError(
                f"load [{offset},{end}) outside object {obj.obj_id} of size {obj.size}"
            )
        start_rec = len(self.mem.log)
        if length == 0:
            return b"", True, []
        if self.debug:
            self._check_shadow(obj, vn, offset, end)
        chunks = obj.covering_chunks(offset, length)
        span_start, _ = obj.chunk_extent(chunks[0])
        _, span_end = obj.chunk_extent(chunks[-1])
        span_ct = self.mem.read(obj.base + span_start, span_end - span_start, DATA)
        for c in chunks:
            cs, ce = obj.chunk_extent(c)
            stored = self.mem.read(obj.mac_addr(c), MAC_BYTES, MAC_LINE)
            if self.crypto:
                want = compute_mac(
                    self.mac_key, span_ct[cs - span_start : ce - span_start], obj.base + cs, vn
                ).tag
                if want != stored:
                    raise TamperDetected(
                        f"chunk MAC mismatch in object {obj.obj_id}", obj.base + cs
                    )
        if self.crypto:
            pt = keystream_xor_at(self.enc_key, obj.base, vn, span_start, span_ct)
            result = pt[offset - span_start : end - span_start]
        else:
            result = bytes(length)
        return result, True, self.mem.log[start_rec:]

    # -- debug bookkeeping --------------------------------------------------

    def _check_shadow(self, obj: ObjectDescriptor, vn: int, start: int, end: int):
        """Every byte in [start, end) must have been written, most recently
        under `vn`. Walks this object's write history newest-first."""
        remaining = [(start, end)]
        for ws, we, wvn in reversed(self._shadow.get(obj.obj_id, [])):
            if not remaining:
                break
            nxt = []
            for s, e in remaining:
                if we <= s or ws >= e:
                    nxt.append((s, e))
                    continue
                if wvn != vn:
                    raise SecurityInvariantFault(
                        f"read of {obj.obj_id}[{max(s, ws)}:{min(e, we)}] under VN {vn}, "
                        f"but most recent write used VN {wvn}"
                    )
                if s < ws:
                    nxt.append((s, ws))
                if we < e:
                    nxt.append((we, e))
            remaining = nxt
        if remaining:
            s, e = remaining[0]
            raise SecurityInvariantFault(
                f"read of never-written bytes {obj.obj_id}[{s}:{e}]"
            )

    def written_ranges(self, obj_id: str) -> Iterable[tuple[int, int, int]]:
        return tuple(self._shadow.get(obj_id, ()))
