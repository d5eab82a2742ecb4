"""Byte-addressable memory and the lane-packing codec.

Packing groups 4/8/16 consecutive values into one 32-bit word for
INT8/INT4/INT2, lane 0 in the least-significant bits. INT16 and FP16
values take one word each with the upper 16 bits zero.

Memory image files are a flat binary: an 8-byte little-endian size header
followed by exactly that many content bytes.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

from .arith import PrecisionMode, fp16_from_float, fp16_to_float, mask, sext
from .errors import MemoryFault, RangeError, StructuralError


def word_count(n: int, mode: PrecisionMode) -> int:
    return -(-n // mode.lanes)


@dataclass(frozen=True)
class PackedTensor:
    mode: PrecisionMode
    logical_len: int
    words: tuple[int, ...]


def _lane_value(v, mode, index):
    if mode.is_float:
        if isinstance(v, float):
            return fp16_from_float(v)
        if isinstance(v, int) and 0 <= v <= 0xFFFF:
            return v
        raise RangeError(f"{v!r} is not a binary16 encoding", index)
    if isinstance(v, bool) or not isinstance(v, int):
        raise RangeError(f"{v!r} is not an integer", index)
    lo, hi = -(1 << (mode.width - 1)), (1 << (mode.width - 1)) - 1
    if not lo <= v <= hi:
        raise RangeError(f"{v} outside {mode} range [{lo}, {hi}]", index)
    return v & mask(mode.width)


def pack(values, mode: PrecisionMode) -> PackedTensor:
    """Pack signed lane integers (or binary16 encodings / floats for FP16)."""
    values = list(values)
    lanes, w = mode.lanes, mode.width
    words = []
    for base in range(0, len(values), lanes):
        word = 0
        for i, v in enumerate(values[base : base + lanes]):
            word |= _lane_value(v, mode, base + i) << (i * w)
        words.append(word)
    return PackedTensor(mode, len(values), tuple(words))


def unpack(t: PackedTensor, as_float: bool = False) -> list:
    """Inverse of :func:`pack`. FP16 lanes come back as encodings unless
    ``as_float`` is set."""
    mode = t.mode
    if len(t.words) != word_count(t.logical_len, mode):
        raise StructuralError(
            f"{len(t.words)} words cannot hold {t.logical_len} {mode} values"
        )
    lanes, w = mode.lanes, mode.width
    out = []
    for j, word in enumerate(t.words):
        if not 0 <= word <= 0xFFFFFFFF:
            raise StructuralError(f"word {j} is not a 32-bit value")
        if w == 16 and word >> 16:
            raise StructuralError(f"word {j} has nonzero padding bits")
        used = min(lanes, t.logical_len - j * lanes)
        if word >> (used * w):
            raise StructuralError(f"word {j} has nonzero trailing lanes")
        for i in range(used):
            field = (word >> (i * w)) & mask(w)
            if mode.is_float:
                out.append(fp16_to_float(field) if as_float else field)
            else:
                out.append(sext(field, w))
    return out


def unpack_bundles(words) -> list[int]:
    """Join (low, high) word pairs into 64-bit accumulator bundles."""
    words = list(words)
    if len(words) % 2:
        raise StructuralError("bundle stream has an odd number of words")
    return [words[i] | (words[i + 1] << 32) for i in range(0, len(words), 2)]


class Memory:
    """Zero-initialised byte memory with little-endian 32-bit word access."""

    def __init__(self, size: int, contents: bytes | None = None):
        if size < 0:
            raise ValueError("memory size must be non-negative")
        self.size = size
        self.data = bytearray(size)
        if contents is not None:
            if len(contents) != size:
                raise StructuralError(f"image holds {len(contents)} bytes, header says {size}")
            self.data[:] = contents

    def _check(self, addr, nbytes):
        if addr % 4:
            raise MemoryFault("unaligned word access", addr)
        if addr < 0 or addr + nbytes > self.size:
            # report the first word that falls outside the memory
            first = addr if addr < 0 or addr >= self.size else addr + (self.size - addr) // 4 * 4
            raise MemoryFault("access out of bounds", first)

    def read_words(self, addr: int, count: int) -> list[int]:
        self._check(addr, 4 * count)
        return list(struct.unpack_from(f"<{count}I", self.data, addr))

    def write_words(self, addr: int, words) -> "Memory":
        words = list(words)
        self._check(addr, 4 * len(words))
        struct.pack_into(f"<{len(words)}I", self.data, addr, *words)
        return self

    def read_word(self, addr: int) -> int:
        return self.read_words(addr, 1)[0]

    def copy(self) -> "Memory":
        return Memory(self.size, bytes(self.data))

    def __eq__(self, other):
        return isinstance(other, Memory) and self.data == other.data

    # image files

    def to_bytes(self) -> bytes:
        return struct.pack("<Q", self.size) + bytes(self.data)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "Memory":
        if len(blob) < 8:
            raise StructuralError("memory image shorter than its 8-byte header")
        (size,) = struct.unpack_from("<Q", blob)
        return cls(size, blob[8:])

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "Memory":
        return cls.from_bytes(Path(path).read_bytes())

    def hexdump(self, start: int = 0, end: int | None = None) -> str:
        """One line per 16 bytes: ``address: w0 w1 w2 w3``."""
        end = self.size if end is None else end
        lines = []
        for addr in range(start - start % 16, end, 16):
            n = min(4, (self.size - addr) // 4)
            words = self.read_words(addr, n)
            lines.append(f"{addr:08x}: " + " ".join(f"{w:08x}" for w in words))
        return "\n".join(lines)


def mem_read_words(m: Memory, addr: int, count: int) -> list[int]:
    return m.read_words(addr, count)


def mem_write_words(m: Memory, addr: int, words) -> Memory:
    return m.write_words(addr, words)
