import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from artifact.arith import PrecisionMode as P
from artifact.errors import MemoryFault, RangeError, StructuralError
from artifact.mem import (
    Memory,
    PackedTensor,
    mem_read_words,
    mem_write_words,
    pack,
    unpack,
    unpack_bundles,
    word_count,
)


def test_pack_examples():
    assert pack([1, 2, 3, 4], P.INT8).words == (0x04030201,)
    assert pack([0x1234], P.INT16).words == (0x00001234,)
    assert pack([-1], P.INT16).words == (0x0000FFFF,)
    assert pack([], P.INT8).words == ()
    assert pack([1.0], P.FP16).words == (0x3C00,)
    assert pack([1, 2, 3, 4, 5], P.INT8).words == (0x04030201, 0x00000005)


def test_unpack_examples():
    assert unpack(PackedTensor(P.INT2, 16, (0xFFFFFFFF,))) == [-1] * 16
    assert unpack(PackedTensor(P.FP16, 1, (0x00003C00,)), as_float=True) == [1.0]
    assert unpack(PackedTensor(P.FP16, 1, (0x00003C00,))) == [0x3C00]


def test_range_error_names_index():
    with pytest.raises(RangeError) as e:
        pack([1, 2, 8, 0], P.INT4)
    assert e.value.index == 2
    with pytest.raises(RangeError):
        pack([128], P.INT8)
    with pytest.raises(RangeError):
        pack([0x10000], P.FP16)
    with pytest.raises(RangeError):
        pack([1.5], P.INT8)


def test_structural_errors():
    with pytest.raises(StructuralError):
        unpack(PackedTensor(P.INT8, 5, (0,)))
    with pytest.raises(StructuralError):
        unpack(PackedTensor(P.INT16, 1, (0x10000,)))
    with pytest.raises(StructuralError):
        unpack(PackedTensor(P.INT8, 3, (0xFF000000,)))
    with pytest.raises(StructuralError):
        unpack_bundles([1, 2, 3])


@pytest.mark.parametrize("mode", [m for m in P if not m.is_float])
@given(data=st.data())
def test_round_trip_int(mode, data):
    lim = 1 << (mode.width - 1)
    vals = data.draw(st.lists(st.integers(-lim, lim - 1), max_size=64))
    t = pack(vals, mode)
    assert len(t.words) == word_count(len(vals), mode)
    assert unpack(t) == vals


@given(st.lists(st.integers(0, 0xFFFF), max_size=32))
def test_round_trip_fp16_encodings(vals):
    t = pack(vals, P.FP16)
    assert all(w >> 16 == 0 for w in t.words)
    assert unpack(t) == vals


def test_round_trip_int4_lengths():
    rnd = random.Random(0)
    for n in range(1, 65):
        vals = [rnd.randint(-8, 7) for _ in range(n)]
        assert unpack(pack(vals, P.INT4)) == vals


def test_word_access():
    m = Memory(64)
    assert m.read_words(0, 4) == [0, 0, 0, 0]
    mem_write_words(m, 0x10, [0xDEADBEEF])
    assert mem_read_words(m, 0x10, 1) == [0xDEADBEEF]
    assert m.data[0x10:0x14] == bytes.fromhex("efbeadde")


def test_memory_faults():
    m = Memory(32)
    with pytest.raises(MemoryFault) as e:
        m.read_words(2, 1)
    assert e.value.address == 2
    with pytest.raises(MemoryFault) as e:
        m.read_words(24, 4)
    assert e.value.address == 32
    assert "0x00000020" in str(e.value)
    with pytest.raises(MemoryFault):
        m.write_words(32, [1])


def test_random_write_plan_preserves_other_regions():
    rnd = random.Random(9)
    m = Memory(1024)
    shadow = [0] * 256
    for _ in range(300):
        addr = rnd.randrange(0, 256) * 4
        n = rnd.randint(1, min(8, 256 - addr // 4))
        ws = [rnd.getrandbits(32) for _ in range(n)]
        m.write_words(addr, ws)
        shadow[addr // 4 : addr // 4 + n] = ws
    assert m.read_words(0, 256) == shadow


def test_image_file_round_trip(tmp_path):
    m = Memory(40)
    m.write_words(8, [1, 2, 3])
    p = tmp_path / "img.bin"
    m.save(p)
    blob = p.read_bytes()
    assert blob[:8] == (40).to_bytes(8, "little") and len(blob) == 48
    assert Memory.load(p) == m
    with pytest.raises(StructuralError):
        Memory.from_bytes(blob[:-1])


def test_hexdump():
    m = Memory(20)
    m.write_words(0, [1, 2, 3, 4, 5])
    assert m.hexdump().splitlines() == [
        "00000000: 00000001 00000002 00000003 00000004",
        "00000010: 00000005",
    ]
