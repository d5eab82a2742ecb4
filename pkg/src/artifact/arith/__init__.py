"""Bit-exact arithmetic of the precision-scalable PE."""

from .bundle import (
    bundle_lanes,
    lanes_to_bundle,
    mac,
    ps_accumulate,
    ps_multiply,
    reduce_lanes,
    word_lanes,
)
from .fp16 import QNAN, fp16_add, fp16_from_float, fp16_mul, fp16_to_float, is_nan
from .modes import ALL_MODES, INT_MODES, SUBWORD_MODES, PrecisionMode, mask, sext
from .multiplier import Tree4Mode, Tree8Mode, mul2, mul16, mul_tree4, mul_tree8

__all__ = [
    "ALL_MODES",
    "INT_MODES",
    "QNAN",
    "SUBWORD_MODES",
    "PrecisionMode",
    "Tree4Mode",
    "Tree8Mode",
    "bundle_lanes",
    "fp16_add",
    "fp16_from_float",
    "fp16_mul",
    "fp16_to_float",
    "is_nan",
    "lanes_to_bundle",
    "mac",
    "mask",
    "mul2",
    "mul16",
    "mul_tree4",
    "mul_tree8",
    "ps_accumulate",
    "ps_multiply",
    "reduce_lanes",
    "sext",
    "word_lanes",
]
