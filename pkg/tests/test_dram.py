"""Untrusted memory model: sparse store, access log, tamper primitives."""

from __future__ import annotations

import csv

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mgxsim.dram import (
    DATA,
    LINE,
    MAC_LINE,
    META_CLASSES,
    TREE_NODE,
    VN_LINE,
    AccessRecord,
    BitFlip,
    PhysicalMemory,
    Relocate,
    Replay,
    Splice,
    write_log_csv,
)
from mgxsim.errors import AddressError


class TestStore:
    def test_zero_fill_for_never_written(self):
        mem = PhysicalMemory()
        assert mem.peek(0, 16) == bytes(16)
        assert mem.peek(123, 200) == bytes(200)

    def test_roundtrip_within_line(self):
        mem = PhysicalMemory()
        mem.poke(10, b"hello")
        assert mem.peek(10, 5) == b"hello"
        assert mem.peek(9, 7) == b"\x00hello\x00"

    def test_roundtrip_across_lines(self):
        mem = PhysicalMemory()
        blob = bytes(range(200))
        mem.poke(LINE - 13, blob)
        assert mem.peek(LINE - 13, 200) == blob

    def test_last_writer_wins(self):
        mem = PhysicalMemory()
        mem.poke(0, b"a" * 32)
        mem.poke(8, b"b" * 8)
        assert mem.peek(0, 32) == b"a" * 8 + b"b" * 8 + b"a" * 16

    @given(
        writes=st.lists(
            st.tuples(st.integers(0, 500), st.binary(min_size=1, max_size=150)),
            max_size=20,
        )
    )
    @settings(max_examples=50, deadline=None)
    def test_matches_flat_shadow(self, writes):
        mem = PhysicalMemory(capacity=1024)
        shadow = bytearray(1024)
        for addr, data in writes:
            if addr + len(data) > 1024:
                continue
            mem.poke(addr, data)
            shadow[addr : addr + len(data)] = data
        assert mem.peek(0, 1024) == bytes(shadow)

    def test_capacity_enforced(self):
        mem = PhysicalMemory(capacity=128)
        mem.poke(64, bytes(64))
        with pytest.raises(AddressError):
            mem.poke(65, bytes(64))
        with pytest.raises(AddressError):
            mem.peek(128, 1)
        with pytest.raises(AddressError):
            mem.peek(-1, 1)
        with pytest.raises(ValueError):
            PhysicalMemory(capacity=0)

    def test_zero_length_peek(self):
        assert PhysicalMemory().peek(5, 0) == b""


class TestLogging:
    def test_read_write_logged_with_class_and_timestamp(self):
        mem = PhysicalMemory()
        mem.write(0, bytes(64), VN_LINE)
        mem.read(64, 64, DATA)
        mem.read(128, 8, MAC_LINE)
        assert mem.log == [
            AccessRecord("write", VN_LINE, 0, 64, 0),
            AccessRecord("read", DATA, 64, 64, 1),
            AccessRecord("read", MAC_LINE, 128, 8, 2),
        ]

    def test_peek_poke_and_tampering_unlogged(self):
        mem = PhysicalMemory()
        mem.poke(0, b"x")
        mem.peek(0, 1)
        mem.inject(BitFlip(0, 0))
        sid = mem.snapshot(0, 64)
        mem.inject(Replay(sid))
        assert mem.log == []

    def test_write_returns_data_via_read(self):
        mem = PhysicalMemory()
        mem.write(100, b"payload", DATA)
        assert mem.read(100, 7, DATA) == b"payload"

    def test_log_csv_format(self, tmp_path):
        mem = PhysicalMemory()
        mem.write(0, bytes(64), TREE_NODE)
        mem.read(0, 64, TREE_NODE)
        path = tmp_path / "log.csv"
        write_log_csv(mem.log, str(path))
        rows = list(csv.reader(path.open()))
        assert rows[0] == ["op", "class", "addr", "len", "timestamp"]
        assert rows[1] == ["write", "tree_node", "0", "64", "0"]
        assert rows[2] == ["read", "tree_node", "0", "64", "1"]

    def test_meta_classes(self):
        assert set(META_CLASSES) == {VN_LINE, MAC_LINE, TREE_NODE}
        assert DATA not in META_CLASSES


class TestTamper:
    def test_bitflip_flips_exactly_one_bit(self):
        mem = PhysicalMemory()
        mem.poke(7, b"\x00")
        mem.inject(BitFlip(7, 5))
        assert mem.peek(7, 1) == bytes([1 << 5])
        mem.inject(BitFlip(7, 5))
        assert mem.peek(7, 1) == b"\x00"
        # neighbours untouched
        assert mem.peek(6, 1) == b"\x00" and mem.peek(8, 1) == b"\x00"

    def test_bitflip_bit_range(self):
        with pytest.raises(ValueError):
            PhysicalMemory().inject(BitFlip(0, 8))

    def test_snapshot_replay_restores_old_bytes(self):
        mem = PhysicalMemory()
        mem.poke(0, b"old bytes!")
        sid = mem.snapshot(0, 10)
        mem.poke(0, b"new bytes!")
        mem.inject(Replay(sid))
        assert mem.peek(0, 10) == b"old bytes!"

    def test_replay_unknown_snapshot(self):
        with pytest.raises(KeyError):
            PhysicalMemory().inject(Replay(99))

    def test_relocate_copies_and_preserves_source(self):
        mem = PhysicalMemory()
        mem.poke(0, b"ABCD")
        mem.inject(Relocate(src=0, dst=100, length=4))
        assert mem.peek(100, 4) == b"ABCD"
        assert mem.peek(0, 4) == b"ABCD"

    def test_splice_overwrites_range(self):
        mem = PhysicalMemory()
        mem.poke(50, b"xxxx")
        mem.inject(Splice(50, b"YZ"))
        assert mem.peek(50, 4) == b"YZxx"

    def test_unknown_action_type(self):
        with pytest.raises(TypeError):
            PhysicalMemory().inject("not an action")
