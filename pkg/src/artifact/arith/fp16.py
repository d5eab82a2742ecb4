"""IEEE binary16 multiply and add, round-to-nearest-even.

Values are carried as raw 16-bit encodings. Every NaN result is the
canonical quiet NaN 0x7E00. With ``ftz=True`` subnormal inputs are read
as signed zero and subnormal results are flushed to signed zero.
"""

import struct

from .multiplier import mul16

QNAN = 0x7E00
POS_INF = 0x7C00
NEG_INF = 0xFC00

_EXP_MAX = 0x1F


def fp16_from_float(x: float) -> int:
    return struct.unpack("<H", struct.pack("<e", x))[0]


def fp16_to_float(bits: int) -> float:
    return struct.unpack("<e", struct.pack("<H", bits & 0xFFFF))[0]


def is_nan(bits: int) -> bool:
    return (bits & 0x7C00) == 0x7C00 and (bits & 0x3FF) != 0


def _split(bits):
    return bits >> 15 & 1, bits >> 10 & 0x1F, bits & 0x3FF


def _flush_input(bits):
    if (bits & 0x7C00) == 0 and bits & 0x3FF:
        return bits & 0x8000
    return bits


def _shift_right_jam(value, dist):
    """Shift right, OR-ing every bit shifted out into the result LSB."""
    if dist <= 0:
        return value
    return (value >> dist) | (1 if value & ((1 << dist) - 1) else 0)


def _round_pack(sign, exp, sig):
    """Round a 15-bit significand with 4 round bits and pack.

    `sig` is normalised to [0x4000, 0x8000) and `exp` is the biased
    exponent minus one, so the implicit bit carries into the exponent
    field when the fields are added.
    """
    round_bits = sig & 0xF
    if exp < 0:
        sig = _shift_right_jam(sig, -exp)
        exp = 0
        round_bits = sig & 0xF
    elif exp > 0x1D or (exp == 0x1D and sig + 0x8 >= 0x8000):
        return (sign << 15) | POS_INF
    sig = (sig + 0x8) >> 4
    if round_bits == 0x8:
        sig &= ~1
    if sig == 0:
        exp = 0
    return (sign << 15) + (exp << 10) + sig


def _normalize_subnormal(frac):
    shift = 11 - frac.bit_length()
    return 1 - shift, frac << shift


def fp16_mul(a: int, b: int, ftz: bool = False) -> int:
    if ftz:
        a, b = _flush_input(a), _flush_input(b)
    sa, ea, fa = _split(a)
    sb, eb, fb = _split(b)
    sign = sa ^ sb
    if ea == _EXP_MAX or eb == _EXP_MAX:
        if (ea == _EXP_MAX and fa) or (eb == _EXP_MAX and fb):
            return QNAN
        other_e, other_f = (eb, fb) if ea == _EXP_MAX else (ea, fa)
        if other_e == 0 and other_f == 0:
            return QNAN
        return (sign << 15) | POS_INF
    if ea == 0:
        if fa == 0:
            return sign << 15
        ea, fa = _normalize_subnormal(fa)
    if eb == 0:
        if fb == 0:
            return sign << 15
        eb, fb = _normalize_subnormal(fb)
    exp = ea + eb - 0xF
    # 15-bit x 16-bit operands fit the shared unsigned 16x16 multiplier.
    prod = mul16(((fa | 0x400) << 4) & 0xFFFF, ((fb | 0x400) << 5) & 0xFFFF, signed=False)
    sig = (prod >> 16) | (1 if prod & 0xFFFF else 0)
    if sig < 0x4000:
        exp -= 1
        sig <<= 1
    out = _round_pack(sign, exp, sig)
    return _flush_input(out) if ftz else out


def fp16_add(a: int, b: int, ftz: bool = False) -> int:
    if ftz:
        a, b = _flush_input(a), _flush_input(b)
    sa, ea, fa = _split(a)
    sb, eb, fb = _split(b)
    if ea == _EXP_MAX or eb == _EXP_MAX:
        if (ea == _EXP_MAX and fa) or (eb == _EXP_MAX and fb):
            return QNAN
        if ea == _EXP_MAX and eb == _EXP_MAX:
            return a if sa == sb else QNAN
        return a if ea == _EXP_MAX else b
    if ea == 0 and fa == 0 and eb == 0 and fb == 0:
        return (sa & sb) << 15

    # exponent 1 with no implicit bit for subnormals; 3 guard bits below
    ma = ((fa | 0x400) if ea else fa) << 3
    mb = ((fb | 0x400) if eb else fb) << 3
    ea, eb = max(ea, 1), max(eb, 1)
    if (ea, ma) < (eb, mb):
        sa, ea, ma, sb, eb, mb = sb, eb, mb, sa, ea, ma
    mb = _shift_right_jam(mb, ea - eb)
    exp, sign = ea, sa

    if sa == sb:
        sig = ma + mb
        if sig >= 1 << 14:
            sig = _shift_right_jam(sig, 1)
            exp += 1
    else:
        sig = ma - mb
        if sig == 0:
            return 0
        while sig < 1 << 13 and exp > 1:
            sig <<= 1
            exp -= 1

    low = sig & 7
    sig >>= 3
    if low > 4 or (low == 4 and sig & 1):
        sig += 1
        if sig == 1 << 11:
            sig >>= 1
            exp += 1
    if exp >= _EXP_MAX:
        return (sign << 15) | POS_INF
    exp_field = exp if sig & 0x400 else 0
    out = (sign << 15) | (exp_field << 10) | (sig & 0x3FF)
    return _flush_input(out) if ftz else out
