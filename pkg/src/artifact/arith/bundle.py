"""Packed operands, 64-bit product/accumulator bundles and the PE MAC.

Lane 0 sits at the least-significant bits of every container. INT16
products and accumulators are 32-bit values sign-extended to 64 bits;
FP16 values occupy bits [0,16) of the bundle.
"""

from .fp16 import fp16_add, fp16_mul
from .modes import PrecisionMode, mask, sext
from .multiplier import Tree8Mode, mul16, mul_tree8

WORD_MASK = 0xFFFFFFFF
BUNDLE_MASK = 0xFFFFFFFFFFFFFFFF

_TREE8_MODE = {
    PrecisionMode.INT8: Tree8Mode.INT8x1,
    PrecisionMode.INT4: Tree8Mode.INT4x2,
    PrecisionMode.INT2: Tree8Mode.INT2x4,
}


def _lane_high_bits(width):
    h = 0
    for i in range(64 // width):
        h |= 1 << (i * width + width - 1)
    return h


_HIGH = {m: _lane_high_bits(m.acc_width) for m in _TREE8_MODE}


def word_lanes(word: int, mode: PrecisionMode) -> list[int]:
    """Signed operand lanes of a packed word (FP16: the raw encoding)."""
    if mode.is_float:
        return [word & 0xFFFF]
    w = mode.width
    return [sext(word >> (i * w), w) for i in range(mode.lanes)]


def bundle_lanes(bundle: int, mode: PrecisionMode) -> list[int]:
    """Signed accumulator lanes of a bundle (FP16: the raw encoding)."""
    if mode.is_float:
        return [bundle & 0xFFFF]
    a = mode.acc_width
    return [sext(bundle >> (i * a), a) for i in range(mode.lanes)]


def lanes_to_bundle(values, mode: PrecisionMode) -> int:
    """Inverse of :func:`bundle_lanes`; lanes wrap to the accumulator width."""
    if mode.is_float:
        (v,) = values
        return v & 0xFFFF
    if mode is PrecisionMode.INT16:
        (v,) = values
        return sext(v, 32) & BUNDLE_MASK
    a = mode.acc_width
    out = 0
    for i, v in enumerate(values):
        out |= (v & mask(a)) << (i * a)
    return out


def reduce_lanes(bundle: int, mode: PrecisionMode) -> int:
    """Host-side reduction: sum of the signed accumulator lanes.

    For FP16 the single lane's encoding is returned unchanged.
    """
    if mode.is_float:
        return bundle & 0xFFFF
    return sum(bundle_lanes(bundle, mode))


def ps_multiply(x: int, w: int, mode: PrecisionMode) -> int:
    if mode is PrecisionMode.INT16:
        return sext(mul16(x & 0xFFFF, w & 0xFFFF, signed=True), 32) & BUNDLE_MASK
    if mode is PrecisionMode.FP16:
        return fp16_mul(x & 0xFFFF, w & 0xFFFF)
    sub = _TREE8_MODE[mode]
    out = 0
    for unit in range(4):
        xa = (x >> (8 * unit)) & 0xFF
        wb = (w >> (8 * unit)) & 0xFF
        out |= mul_tree8(xa, wb, sub) << (16 * unit)
    return out


def ps_accumulate(y: int, p: int, mode: PrecisionMode) -> int:
    if mode is PrecisionMode.INT16:
        return sext((y + p) & WORD_MASK, 32) & BUNDLE_MASK
    if mode is PrecisionMode.FP16:
        return fp16_add(y & 0xFFFF, p & 0xFFFF)
    # lane-parallel add: carries never cross a lane boundary
    h = _HIGH[mode]
    low = (y & ~h & BUNDLE_MASK) + (p & ~h & BUNDLE_MASK)
    return (low ^ ((y ^ p) & h)) & BUNDLE_MASK


def _fp16_zero_noop(x, w, y):
    # +0 * +0 = +0 and y + (+0) = y unless y is -0 or a NaN
    return x == 0 and w == 0 and y != 0x8000 and (y & 0x7C00 != 0x7C00 or y & 0x3FF == 0)


def mac(x: int, w: int, y: int, mode: PrecisionMode) -> int:
    """y + x*w with the mode's multiplier and adder bank."""
    if mode.is_float:
        if _fp16_zero_noop(x & 0xFFFF, w & 0xFFFF, y & 0xFFFF):
            return y
    elif x == 0 or w == 0:
        return y
    return ps_accumulate(y, ps_multiply(x, w, mode), mode)
