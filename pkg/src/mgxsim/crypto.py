"""Counter-mode encryption and keyed MACs shared by both protection schemes.

Ciphertext is produced by XORing data with an AES-128 keystream. The 128-bit
counter for a 16-byte cipher block is the concatenation of the 64-bit physical
address of that block (high half) and the 64-bit version number (low half), so
the counter of block i within a write is (base_pa + 16*i) || vn. Reusing a
(pa, vn) pair under one key would reuse keystream; the schemes above this layer
are responsible for never doing that.

MACs are keyed BLAKE2b digests over a length-prefixed (ciphertext, pa, vn)
tuple, truncated to 64 bits. Callers that store 56-bit tags truncate further.
"""

from __future__ import annotations

import hashlib
import hmac as _hmac
import struct
from dataclasses import dataclass

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .errors import AlignmentError

CIPHER_BLOCK = 16
MAC_BYTES = 8
_MASK64 = (1 << 64) - 1

# Above this block count the counter stream is assembled with numpy; below it
# a plain struct loop is cheaper.
_NUMPY_CUTOVER = 32


@dataclass(frozen=True)
class EncryptionKey:
    """128-bit key for the counter-mode keystream."""

    key_bytes: bytes

    def __post_init__(self):
        if len(self.key_bytes) != 16:
            raise ValueError(f"encryption key must be 16 bytes, got {len(self.key_bytes)}")


@dataclass(frozen=True)
class MacKey:
    """Key for the integrity MAC. Independent of the encryption key."""

    key_bytes: bytes

    def __post_init__(self):
        if not 8 <= len(self.key_bytes) <= 64:
            raise ValueError("MAC key must be 8..64 bytes (BLAKE2b keyed-hash limit)")


@dataclass(frozen=True)
class CounterValue:
    """The 128-bit counter pa || vn for one cipher block."""

    pa: int
    vn: int

    def __post_init__(self):
        if not 0 <= self.pa <= _MASK64:
            raise ValueError("pa out of 64-bit range")
        if not 0 <= self.vn <= _MASK64:
            raise ValueError("vn out of 64-bit range")

    def to_bytes(self) -> bytes:
        return struct.pack(">QQ", self.pa, self.vn)


@dataclass(frozen=True)
class MacTag:
    tag: bytes

    def __post_init__(self):
        if len(self.tag) != MAC_BYTES:
            raise ValueError(f"MAC tag must be {MAC_BYTES} bytes")


def _raw_keystream(key: EncryptionKey, first_block_pa: int, vn: int, nblocks: int) -> bytes:
    """AES-ECB over the counter stream; pa advances by 16 per block."""
    if nblocks >= _NUMPY_CUTOVER:
        ctrs = np.empty((nblocks, 2), dtype=">u8")
        ctrs[:, 0] = (first_block_pa + 16 * np.arange(nblocks, dtype=np.uint64)) & _MASK64
        ctrs[:, 1] = vn
        material = ctrs.tobytes()
    else:
        material = b"".join(
            struct.pack(">QQ", (first_block_pa + 16 * i) & _MASK64, vn) for i in range(nblocks)
        )
    enc = Cipher(algorithms.AES(key.key_bytes), modes.ECB()).encryptor()
    return enc.update(material) + enc.finalize()


def _xor(data: bytes, pad: bytes) -> bytes:
    n = len(data)
    return (int.from_bytes(data, "big") ^ int.from_bytes(pad[:n], "big")).to_bytes(n, "big")


def keystream_xor(key: EncryptionKey, base_pa: int, vn: int, data: bytes) -> bytes:
    """Encrypt or decrypt `data` located at 16-byte-aligned address `base_pa`.

    XOR is an involution, so the same call performs both directions. A trailing
    partial block consumes a truncated keystream block. Empty input is allowed.
    """
    if base_pa % CIPHER_BLOCK:
        raise AlignmentError(f"base_pa 0x{base_pa:x} not {CIPHER_BLOCK}-byte aligned")
    if not data:
        return b""
    nblocks = (len(data) + CIPHER_BLOCK - 1) // CIPHER_BLOCK
    return _xor(data, _raw_keystream(key, base_pa, vn, nblocks))


def keystream_xor_at(key: EncryptionKey, base_pa: int, vn: int, offset: int, data: bytes) -> bytes:
    """Like keystream_xor, but for data at byte `offset` from `base_pa`.

    The cipher-block grid is anchored at base_pa, so any sub-range of a region
    encrypted as a whole decrypts consistently regardless of how reads and
    writes are split up.
    """
    if base_pa % CIPHER_BLOCK:
        raise AlignmentError(f"base_pa 0x{base_pa:x} not {CIPHER_BLOCK}-byte aligned")
    if offset < 0:
        raise ValueError("negative offset")
    if not data:
        return b""
    first = offset // CIPHER_BLOCK
    skip = offset % CIPHER_BLOCK
    nblocks = (skip + len(data) + CIPHER_BLOCK - 1) // CIPHER_BLOCK
    pad = _raw_keystream(key, base_pa + 16 * first, vn, nblocks)
    return _xor(data, pad[skip : skip + len(data)])


def compute_mac(key: MacKey, ciphertext: bytes, pa: int, vn: int) -> MacTag:
    """64-bit MAC binding ciphertext to its address and version number.

    The ciphertext is length-prefixed so (ct="ab", pa) and (ct="a", pa) can
    never collide through concatenation ambiguity.
    """
    h = hashlib.blake2b(key=key.key_bytes, digest_size=MAC_BYTES)
    h.update(struct.pack(">Q", len(ciphertext)))
    h.update(ciphertext)
    h.update(struct.pack(">QQ", pa & _MASK64, vn & _MASK64))
    return MacTag(h.digest())


def verify_mac(key: MacKey, ciphertext: bytes, pa: int, vn: int, tag: MacTag) -> bool:
    """Recompute and compare. Mismatch is a return value, never an exception."""
    return _hmac.compare_digest(compute_mac(key, ciphertext, pa, vn).tag, tag.tag)
