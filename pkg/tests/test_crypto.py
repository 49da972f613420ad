"""Counter-mode keystream and MAC primitives.

The AES reference in aes_reference.py is proven against published
known-answer vectors (FIPS-197 App. C.1 and NIST SP 800-38A F.1.1/F.5.1)
before it is trusted as the second route for the keystream tests, so the
implementation under test and its oracle never validate each other
circularly.
"""

from __future__ import annotations

import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aes_reference import aes128_encrypt_block, ctr_keystream
from mgxsim.crypto import (
    CIPHER_BLOCK,
    MAC_BYTES,
    CounterValue,
    EncryptionKey,
    MacKey,
    MacTag,
    compute_mac,
    keystream_xor,
    keystream_xor_at,
    verify_mac,
)
from mgxsim.errors import AlignmentError

# -- published known-answer vectors (frozen) --------------------------------

FIPS197_KEY = bytes.fromhex("000102030405060708090a0b0c0d0e0f")
FIPS197_PT = bytes.fromhex("00112233445566778899aabbccddeeff")
FIPS197_CT = bytes.fromhex("69c4e0d86a7b0430d8cdb78070b4c55a")

SP800_38A_KEY = bytes.fromhex("2b7e151628aed2a6abf7158809cf4f3c")
SP800_38A_PT = [
    bytes.fromhex("6bc1bee22e409f96e93d7e117393172a"),
    bytes.fromhex("ae2d8a571e03ac9c9eb76fac45af8e51"),
    bytes.fromhex("30c81c46a35ce411e5fbc1191a0a52ef"),
    bytes.fromhex("f69f2445df4f9b17ad2b417be66c3710"),
]
SP800_38A_ECB_CT = [
    bytes.fromhex("3ad77bb40d7a3660a89ecaf32466ef97"),
    bytes.fromhex("f5d3d58503b9699de785895a96fdbaaf"),
    bytes.fromhex("43b1cd7f598ece23881b00e3ed030688"),
    bytes.fromhex("7b0c785e27e8ad3f8223207104725dd4"),
]
SP800_38A_CTR_INIT = bytes.fromhex("f0f1f2f3f4f5f6f7f8f9fafbfcfdfeff")
SP800_38A_CTR_CT = [
    bytes.fromhex("874d6191b620e3261bef6864990db6ce"),
    bytes.fromhex("9806f66b7970fdff8617187bb9fffdff"),
    bytes.fromhex("5ae4df3edbd5d35e5b4f09020db03eab"),
    bytes.fromhex("1e031dda2fbe03d1792170a0f3009cee"),
]


def _ctr_add(block: bytes, n: int) -> bytes:
    return (int.from_bytes(block, "big") + n).to_bytes(16, "big")


class TestReferenceKnownAnswers:
    def test_fips197_c1(self):
        assert aes128_encrypt_block(FIPS197_KEY, FIPS197_PT) == FIPS197_CT

    def test_sp800_38a_ecb(self):
        for pt, ct in zip(SP800_38A_PT, SP800_38A_ECB_CT):
            assert aes128_encrypt_block(SP800_38A_KEY, pt) == ct

    def test_sp800_38a_ctr(self):
        # CT_i = PT_i xor E(ctr + i): checks both the cipher and the
        # reference's counter-block helper.
        counters = [_ctr_add(SP800_38A_CTR_INIT, i) for i in range(4)]
        stream = ctr_keystream(SP800_38A_KEY, counters)
        got = bytes(a ^ b for a, b in zip(stream, b"".join(SP800_38A_PT)))
        assert got == b"".join(SP800_38A_CTR_CT)


# -- keystream vs the proven reference --------------------------------------


def _reference_stream(key: bytes, base_pa: int, vn: int, nblocks: int) -> bytes:
    counters = [struct.pack(">QQ", base_pa + CIPHER_BLOCK * i, vn) for i in range(nblocks)]
    return ctr_keystream(key, counters)


class TestKeystreamAgainstReference:
    KEY = bytes(range(16))

    def test_zero_data_exposes_raw_keystream(self):
        ek = EncryptionKey(self.KEY)
        got = keystream_xor(ek, 0x4000, 9, bytes(5 * CIPHER_BLOCK))
        assert got == _reference_stream(self.KEY, 0x4000, 9, 5)

    def test_xor_of_payload(self):
        ek = EncryptionKey(self.KEY)
        data = bytes(range(64))
        ct = keystream_xor(ek, 0x10, 1, data)
        stream = _reference_stream(self.KEY, 0x10, 1, 4)
        assert ct == bytes(a ^ b for a, b in zip(data, stream))

    def test_offset_slices_block_grid_anchored_at_base(self):
        ek = EncryptionKey(self.KEY)
        stream = _reference_stream(self.KEY, 0x200, 3, 8)
        for offset, length in [(0, 16), (5, 20), (16, 16), (31, 33), (127, 1)]:
            got = keystream_xor_at(ek, 0x200, 3, offset, bytes(length))
            assert got == stream[offset : offset + length]

    def test_large_buffer_matches_blockwise(self):
        # Covers the vectorized bulk path as well as the short path: the
        # stream for one big buffer equals the per-block reference.
        ek = EncryptionKey(self.KEY)
        n = 70  # above any internal cutover
        got = keystream_xor(ek, 0, 2, bytes(n * CIPHER_BLOCK))
        assert got == _reference_stream(self.KEY, 0, 2, n)

    def test_counter_layout_pa_then_vn_big_endian(self):
        # One block, explicit counter bytes: pa and vn land in the
        # documented 64-bit halves.
        ek = EncryptionKey(self.KEY)
        pa, vn = 0xDEAD0, 0x1122334455
        got = keystream_xor(ek, pa, vn, bytes(16))
        assert got == aes128_encrypt_block(self.KEY, pa.to_bytes(8, "big") + vn.to_bytes(8, "big"))


class TestKeystreamProperties:
    KEY = EncryptionKey(bytes(range(16)))

    @given(
        data=st.binary(min_size=1, max_size=200),
        pa=st.integers(min_value=0, max_value=2**40).map(lambda v: v & ~0xF),
        vn=st.integers(min_value=0, max_value=2**56 - 1),
    )
    @settings(max_examples=60, deadline=None)
    def test_involution(self, data, pa, vn):
        once = keystream_xor(self.KEY, pa, vn, data)
        assert keystream_xor(self.KEY, pa, vn, once) == data

    @given(
        offset=st.integers(min_value=0, max_value=300),
        length=st.integers(min_value=0, max_value=100),
    )
    @settings(max_examples=60, deadline=None)
    def test_slice_coherence(self, offset, length):
        # Encrypting a slice in place equals slicing the whole-object stream.
        whole = keystream_xor(self.KEY, 0x8000, 5, bytes(512))
        got = keystream_xor_at(self.KEY, 0x8000, 5, offset, bytes(length))
        assert got == whole[offset : offset + length]

    def test_distinct_pa_vn_pairs_distinct_streams(self):
        seen = {}
        for pa in (0, 16, 32, 4096):
            for vn in (1, 2, 3, 1 << 40):
                s = keystream_xor(self.KEY, pa, vn, bytes(16))
                assert s not in seen, f"stream collision {(pa, vn)} vs {seen.get(s)}"
                seen[s] = (pa, vn)

    def test_consecutive_blocks_differ(self):
        two = keystream_xor(self.KEY, 0, 1, bytes(32))
        assert two[:16] != two[16:]

    def test_unaligned_base_rejected(self):
        with pytest.raises(AlignmentError):
            keystream_xor(self.KEY, 8, 1, bytes(16))
        with pytest.raises(AlignmentError):
            keystream_xor_at(self.KEY, 24, 1, 0, bytes(16))

    def test_empty_data(self):
        assert keystream_xor(self.KEY, 0, 1, b"") == b""


# -- MAC ---------------------------------------------------------------------


class TestMac:
    KEY = MacKey(b"k" * 32)

    def test_deterministic_and_sized(self):
        t1 = compute_mac(self.KEY, b"ciphertext", 0x40, 7)
        t2 = compute_mac(self.KEY, b"ciphertext", 0x40, 7)
        assert t1 == t2
        assert len(t1.tag) == MAC_BYTES == 8

    def test_verify_roundtrip(self):
        tag = compute_mac(self.KEY, b"abc", 16, 2)
        assert verify_mac(self.KEY, b"abc", 16, 2, tag)
        assert not verify_mac(self.KEY, b"abd", 16, 2, tag)
        assert not verify_mac(self.KEY, b"abc", 32, 2, tag)
        assert not verify_mac(self.KEY, b"abc", 16, 3, tag)

    def test_key_separation(self):
        other = MacKey(b"K" * 32)
        assert compute_mac(self.KEY, b"x", 0, 1) != compute_mac(other, b"x", 0, 1)

    def test_length_prefix_prevents_field_sliding(self):
        # Moving bytes between the ciphertext and the (pa, vn) fields must
        # change the tag; a naive concatenation would collide.
        a = compute_mac(self.KEY, b"\x00\x01", 2, 3)
        b = compute_mac(self.KEY, b"\x00", 0x0102, 3)
        c = compute_mac(self.KEY, b"", 0x000102, 3)
        assert len({a.tag, b.tag, c.tag}) == 3

    def test_exhaustive_single_bit_flip_changes_tag(self):
        ct = bytes(range(16))
        base = compute_mac(self.KEY, ct, 0x80, 5).tag
        for byte in range(16):
            for bit in range(8):
                mutated = bytearray(ct)
                mutated[byte] ^= 1 << bit
                assert compute_mac(self.KEY, bytes(mutated), 0x80, 5).tag != base

    @given(
        ct=st.binary(max_size=64),
        pa=st.integers(min_value=0, max_value=2**48),
        vn=st.integers(min_value=0, max_value=2**56 - 1),
    )
    @settings(max_examples=60, deadline=None)
    def test_verify_accepts_own_tag(self, ct, pa, vn):
        tag = compute_mac(self.KEY, ct, pa, vn)
        assert verify_mac(self.KEY, ct, pa, vn, tag)


# -- value objects -----------------------------------------------------------


class TestValueObjects:
    def test_encryption_key_must_be_16_bytes(self):
        EncryptionKey(bytes(16))
        for bad in (b"", bytes(15), bytes(17), bytes(32)):
            with pytest.raises(ValueError):
                EncryptionKey(bad)

    def test_mac_key_size_bounds(self):
        MacKey(bytes(8))
        MacKey(bytes(64))
        for bad in (bytes(7), bytes(65), b""):
            with pytest.raises(ValueError):
                MacKey(bad)

    def test_counter_value_range_and_bytes(self):
        cv = CounterValue(pa=0x10, vn=3)
        assert cv.to_bytes() == struct.pack(">QQ", 0x10, 3)
        with pytest.raises(ValueError):
            CounterValue(pa=-1, vn=0)
        with pytest.raises(ValueError):
            CounterValue(pa=0, vn=1 << 64)

    def test_mac_tag_equality(self):
        assert MacTag(b"12345678") == MacTag(b"12345678")
        assert MacTag(b"12345678") != MacTag(b"12345679")
