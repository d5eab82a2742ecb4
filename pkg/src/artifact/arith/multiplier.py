"""Precision-scalable integer multipliers.

The sub-word datapath is a tree: an 8-bit tree is four 4-bit trees plus
one shift-and-add stage, and a 4-bit tree is four 2-bit multipliers plus
the same stage. Splitting a signed operand puts the sign on the high half;
the low half is always unsigned. The 16-bit multiplier is a separate unit
that is also borrowed by the FP16 significand path.
"""

from enum import Enum
from functools import lru_cache

from .modes import mask, sext

SIGNED = (True, True)


class Tree4Mode(Enum):
    INT4x1 = "int4x1"
    INT2x2 = "int2x2"


class Tree8Mode(Enum):
    INT8x1 = "int8x1"
    INT4x2 = "int4x2"
    INT2x4 = "int2x4"


def _field(value, bits, signed):
    return sext(value, bits) if signed else value & mask(bits)


def mul2(a: int, b: int, sign_ctl=SIGNED) -> int:
    """Leaf 2x2 multiplier; returns a 4-bit product field."""
    sa, sb = sign_ctl
    return (_field(a, 2, sa) * _field(b, 2, sb)) & 0xF


def _shift_add(a, b, half, sign_ctl, sub):
    """Combine four half-width partial products into one full product.

    `sub(x, y, ctl)` returns a 2*half-bit product field. The field is
    signed whenever either of its operands was signed.
    """
    sa, sb = sign_ctl
    m = mask(half)
    ah, al = (a >> half) & m, a & m
    bh, bl = (b >> half) & m, b & m
    pw = 2 * half
    hh = _field(sub(ah, bh, (sa, sb)), pw, sa or sb)
    hl = _field(sub(ah, bl, (sa, False)), pw, sa)
    lh = _field(sub(al, bh, (False, sb)), pw, sb)
    ll = sub(al, bl, (False, False))
    return ((hh << pw) + ((hl + lh) << half) + ll) & mask(2 * pw)


def mul_tree4(a: int, b: int, submode=Tree4Mode.INT4x1, sign_ctl=SIGNED) -> int:
    """4-bit tree: one INT4 product (8-bit field) or two INT2 products.

    In INT2x2 mode the low 2-bit lanes produce bits [0,4) and the high
    lanes bits [4,8).
    """
    a &= 0xF
    b &= 0xF
    if submode is Tree4Mode.INT4x1:
        return _shift_add(a, b, 2, sign_ctl, mul2)
    lo = mul2(a & 3, b & 3, sign_ctl)
    hi = mul2(a >> 2, b >> 2, sign_ctl)
    return lo | (hi << 4)


@lru_cache(maxsize=None)
def mul_tree8(a: int, b: int, submode=Tree8Mode.INT8x1, sign_ctl=SIGNED) -> int:
    """8-bit tree built from four 4-bit trees.

    INT8x1 uses all four sub-trees through shift-and-add. INT4x2 and
    INT2x4 use only sub-trees 0 (low nibbles) and 3 (high nibbles), so the
    output stays 16 bits in every sub-mode.
    """
    a &= 0xFF
    b &= 0xFF
    if submode is Tree8Mode.INT8x1:
        return _shift_add(a, b, 4, sign_ctl, lambda x, y, c: mul_tree4(x, y, Tree4Mode.INT4x1, c))
    t4 = Tree4Mode.INT4x1 if submode is Tree8Mode.INT4x2 else Tree4Mode.INT2x2
    tree0 = mul_tree4(a & 0xF, b & 0xF, t4, sign_ctl)
    tree3 = mul_tree4(a >> 4, b >> 4, t4, sign_ctl)
    return tree0 | (tree3 << 8)


def mul16(a: int, b: int, signed: bool = True) -> int:
    """The 16x16 multiplier shared by INT16 and the FP16 significand path."""
    return (_field(a, 16, signed) * _field(b, 16, signed)) & 0xFFFFFFFF
