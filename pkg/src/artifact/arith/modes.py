from enum import Enum


class PrecisionMode(Enum):
    """Precision selection for the PE datapath.

    Each mode fixes three widths: the operand lane width inside a 32-bit
    packed word, the number of lanes, and the product/accumulator lane
    width inside the 64-bit output bundle.
    """

    INT16 = "int16"
    INT8 = "int8"
    INT4 = "int4"
    INT2 = "int2"
    FP16 = "fp16"

    @property
    def lanes(self) -> int:
        return _LANES[self]

    @property
    def width(self) -> int:
        """Operand lane width in bits."""
        return _WIDTH[self]

    @property
    def acc_width(self) -> int:
        """Product and accumulator lane width in bits."""
        return _ACC_WIDTH[self]

    @property
    def is_float(self) -> bool:
        return self is PrecisionMode.FP16

    @classmethod
    def parse(cls, text: str) -> "PrecisionMode":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"unknown precision mode {text!r}") from None

    def __str__(self):
        return self.value


_LANES = {
    PrecisionMode.INT16: 1,
    PrecisionMode.INT8: 4,
    PrecisionMode.INT4: 8,
    PrecisionMode.INT2: 16,
    PrecisionMode.FP16: 1,
}
_WIDTH = {
    PrecisionMode.INT16: 16,
    PrecisionMode.INT8: 8,
    PrecisionMode.INT4: 4,
    PrecisionMode.INT2: 2,
    PrecisionMode.FP16: 16,
}
_ACC_WIDTH = {
    PrecisionMode.INT16: 32,
    PrecisionMode.INT8: 16,
    PrecisionMode.INT4: 8,
    PrecisionMode.INT2: 4,
    PrecisionMode.FP16: 16,
}

INT_MODES = (PrecisionMode.INT16, PrecisionMode.INT8, PrecisionMode.INT4, PrecisionMode.INT2)
SUBWORD_MODES = (PrecisionMode.INT8, PrecisionMode.INT4, PrecisionMode.INT2)
ALL_MODES = tuple(PrecisionMode)


def sext(value: int, bits: int) -> int:
    """Interpret the low `bits` of `value` as two's complement."""
    value &= (1 << bits) - 1
    return value - (1 << bits) if value >> (bits - 1) else value


def mask(bits: int) -> int:
    return (1 << bits) - 1
