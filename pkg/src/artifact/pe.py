"""Single processing element: operand pass-through and a 64-bit accumulator."""

from enum import Enum
from typing import NamedTuple

from .arith import PrecisionMode, mac


class Ctrl(Enum):
    COMPUTE = "compute"
    DRAIN = "drain"
    IDLE = "idle"


class PeState(NamedTuple):
    x_reg: int = 0
    w_reg: int = 0
    y_reg: int = 0
    mode: PrecisionMode = PrecisionMode.INT8
    hold: bool = False


class PeOutputs(NamedTuple):
    state: PeState
    x_out: int
    w_out: int
    y_out: int


def pe_step(state: PeState, x_in: int, w_in: int, y_in: int, ctrl: Ctrl) -> PeOutputs:
    """Advance one PE by one cycle.

    COMPUTE latches the incoming operands, forwards the previously latched
    ones, and accumulates ``x_in * w_in`` into Y. DRAIN shifts Y one hop:
    the old Y leaves on ``y_out`` and ``y_in`` takes its place. IDLE
    leaves the state alone and drives zeros.
    """
    if ctrl is Ctrl.COMPUTE:
        y = mac(x_in, w_in, state.y_reg, state.mode)
        new = PeState(x_in, w_in, y, state.mode, state.hold)
        return PeOutputs(new, state.x_reg, state.w_reg, 0)
    if ctrl is Ctrl.DRAIN:
        new = PeState(state.x_reg, state.w_reg, y_in, state.mode, state.hold)
        return PeOutputs(new, 0, 0, state.y_reg)
    return PeOutputs(state, 0, 0, 0)
