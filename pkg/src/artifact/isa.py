"""HWPE command set: assembly parsing, sequencing and per-command cost.

Assembly, one command per line, ``#`` starts a comment::

    hwpe.setup <int16|int8|int4|int2|fp16> [hold]
    hwpe.xaddr <hex-address>
    hwpe.waddr <hex-address>
    hwpe.len m=<n> k=<n> n=<n> ops=<n>
    hwpe.load
    hwpe.store <hex-address>

Memory layout used by LOAD and STORE, with ``kw`` packed words per K
vector and operators ``t = 0 .. ops-1`` stored back to back:

* A at XADDR: operator t, row i is ``kw`` words at
  ``xaddr + 4*(t*m*kw + i*kw)``.
* B at WADDR: stored by column; operator t, column j is ``kw`` words at
  ``waddr + 4*(t*n*kw + j*kw)``.
* Results at the STORE address: one 64-bit accumulator bundle per output
  element, low word first, at ``dest + 8*(t*m*n + i*n + j)``.

Without ``hold`` every LOAD starts from cleared accumulators and its
results must be stored before the next LOAD. With ``hold`` a single
operator (``ops=1``) keeps accumulating across LOADs until STORE drains it.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

from .arith import PrecisionMode
from .errors import DimensionError, ParseError, SequencingError
from .mem import Memory, word_count
from .perfmodel import CycleReport
from .systolic import SaConfig, SystolicArray, drain_cycles, load_cycles

MAX_ADDR = 0xFFFFFFFF
MAX_DIM = 0xFFFF


class Opcode(Enum):
    SETUP = "hwpe.setup"
    XADDR = "hwpe.xaddr"
    WADDR = "hwpe.waddr"
    LEN = "hwpe.len"
    LOAD = "hwpe.load"
    STORE = "hwpe.store"


SETUP_CLASS = (Opcode.SETUP, Opcode.XADDR, Opcode.WADDR, Opcode.LEN)

COST_TABLE = {Opcode.SETUP: 4, Opcode.XADDR: 1, Opcode.WADDR: 1, Opcode.LEN: 1}


@dataclass(frozen=True)
class HwpeInstruction:
    opcode: Opcode
    mode: PrecisionMode | None = None
    hold: bool = False
    addr: int | None = None
    m: int = 0
    k: int = 0
    n: int = 0
    ops: int = 0
    line: int | None = field(default=None, compare=False)
    col: int | None = field(default=None, compare=False)

    @classmethod
    def setup(cls, mode, hold=False):
        return cls(Opcode.SETUP, mode=mode, hold=hold)

    @classmethod
    def xaddr(cls, addr):
        return cls(Opcode.XADDR, addr=addr)

    @classmethod
    def waddr(cls, addr):
        return cls(Opcode.WADDR, addr=addr)

    @classmethod
    def length(cls, m, k, n, ops=1):
        return cls(Opcode.LEN, m=m, k=k, n=n, ops=ops)

    @classmethod
    def load(cls):
        return cls(Opcode.LOAD)

    @classmethod
    def store(cls, addr):
        return cls(Opcode.STORE, addr=addr)

    def __str__(self):
        op = self.opcode
        if op is Opcode.SETUP:
            return f"{op.value} {self.mode}" + (" hold" if self.hold else "")
        if op in (Opcode.XADDR, Opcode.WADDR, Opcode.STORE):
            return f"{op.value} 0x{self.addr:x}"
        if op is Opcode.LEN:
            return f"{op.value} m={self.m} k={self.k} n={self.n} ops={self.ops}"
        return op.value


_MNEMONICS = {op.value: op for op in Opcode}
_HEX = re.compile(r"(0[xX])?[0-9a-fA-F]+$")
_LEN_KEYS = ("m", "k", "n", "ops")


def _parse_hex(tok, line, col):
    text, c = tok
    if not _HEX.match(text):
        raise ParseError(f"malformed hex address {text!r}", line, c)
    value = int(text, 16)
    if value > MAX_ADDR:
        raise ParseError(f"address {text} does not fit 32 bits", line, c)
    return value


def _parse_line(tokens, lineno):
    (mnemonic, col), args = tokens[0], tokens[1:]
    op = _MNEMONICS.get(mnemonic.lower())
    if op is None:
        raise ParseError(f"unknown mnemonic {mnemonic!r}", lineno, col)

    def arity(lo, hi):
        if not lo <= len(args) <= hi:
            where = args[hi][1] if len(args) > hi else col
            raise ParseError(f"{op.value} takes {lo if lo == hi else f'{lo}-{hi}'} operand(s), got {len(args)}", lineno, where)

    if op is Opcode.SETUP:
        arity(1, 2)
        try:
            mode = PrecisionMode.parse(args[0][0])
        except ValueError:
            raise ParseError(f"unknown precision {args[0][0]!r}", lineno, args[0][1]) from None
        hold = False
        if len(args) == 2:
            if args[1][0].lower() != "hold":
                raise ParseError(f"expected 'hold', got {args[1][0]!r}", lineno, args[1][1])
            hold = True
        return HwpeInstruction(op, mode=mode, hold=hold, line=lineno, col=col)
    if op in (Opcode.XADDR, Opcode.WADDR, Opcode.STORE):
        arity(1, 1)
        return HwpeInstruction(op, addr=_parse_hex(args[0], lineno, col), line=lineno, col=col)
    if op is Opcode.LEN:
        arity(4, 4)
        dims = {}
        for text, c in args:
            key, sep, value = text.partition("=")
            if not sep or key not in _LEN_KEYS:
                raise ParseError(f"expected one of m=, k=, n=, ops=; got {text!r}", lineno, c)
            if key in dims:
                raise ParseError(f"duplicate {key}=", lineno, c)
            if not value.isdigit():
                raise ParseError(f"malformed count {value!r}", lineno, c)
            v = int(value)
            if not 1 <= v <= MAX_DIM:
                raise ParseError(f"{key}={v} outside [1, {MAX_DIM}]", lineno, c)
            dims[key] = v
        return HwpeInstruction(op, **dims, line=lineno, col=col)
    arity(0, 0)
    return HwpeInstruction(op, line=lineno, col=col)


def parse_program(text: str) -> list[HwpeInstruction]:
    program = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        body = raw.split("#", 1)[0]
        tokens = [(m.group(), m.start() + 1) for m in re.finditer(r"\S+", body)]
        if tokens:
            program.append(_parse_line(tokens, lineno))
    return program


def format_program(program) -> str:
    return "".join(f"{ins}\n" for ins in program)


@dataclass
class HwpeRegs:
    mode: PrecisionMode = PrecisionMode.INT8
    hold: bool = False
    x_base: int = 0
    w_base: int = 0
    m: int = 0
    k: int = 0
    n: int = 0
    ops: int = 0
    written: set = field(default_factory=set)
    pending_ops: int = 0

    @property
    def armed(self) -> bool:
        return all(op in self.written for op in SETUP_CLASS)

    @property
    def words(self) -> int:
        return word_count(self.k, self.mode)


def cycle_cost(instr: HwpeInstruction, regs: HwpeRegs, sa: SaConfig) -> int:
    if instr.opcode in COST_TABLE:
        return COST_TABLE[instr.opcode]
    if instr.opcode is Opcode.LOAD:
        return load_cycles(sa.rows, regs.ops * regs.words)
    return drain_cycles(sa.cols, regs.pending_ops or regs.ops)


def _where(ins):
    return f" (line {ins.line})" if ins.line is not None else ""


def execute(program, memory: Memory, sa: SaConfig, freq: float | None = None):
    """Run a command list on a copy of ``memory``.

    Returns ``(memory', CycleReport)``. Only ``sa``'s geometry and chunk
    limit are used; the precision comes from ``hwpe.setup``.
    """
    mem = memory.copy()
    regs = HwpeRegs()
    report = CycleReport(freq=freq)
    array = None
    pending = None  # (m, n, [bundle matrix per operator])
    open_dims = None  # hold mode: (m, n) of the operator accumulating in the PEs

    for ins in program:
        op = ins.opcode
        if op in SETUP_CLASS:
            if op is Opcode.SETUP:
                regs = HwpeRegs(mode=ins.mode, hold=ins.hold)
                array = SystolicArray(sa.with_mode(ins.mode), hold=ins.hold)
                pending = open_dims = None
            elif op is Opcode.XADDR:
                regs.x_base = ins.addr
            elif op is Opcode.WADDR:
                regs.w_base = ins.addr
            else:
                regs.m, regs.k, regs.n, regs.ops = ins.m, ins.k, ins.n, ins.ops
            regs.written.add(op)
            report.setup_instructions += 1
            report.setup_cycles += cycle_cost(ins, regs, sa)
            continue

        if not regs.armed:
            missing = ", ".join(o.value for o in SETUP_CLASS if o not in regs.written)
            raise SequencingError(f"{op.value} before {missing}{_where(ins)}")
        cfg = array.cfg
        if op is Opcode.LOAD:
            m, k, n, ops, kw = regs.m, regs.k, regs.n, regs.ops, regs.words
            if m > cfg.rows or n > cfg.cols:
                raise DimensionError(f"{m}x{n} operator does not fit the {cfg.rows}x{cfg.cols} array{_where(ins)}")
            if cfg.k_chunk_words is not None and kw > cfg.k_chunk_words:
                raise DimensionError(f"{kw} words per row exceeds the {cfg.k_chunk_words}-word chunk limit{_where(ins)}")
            if regs.hold:
                if ops != 1:
                    raise SequencingError(f"hold mode accumulates one operator; LEN has ops={ops}{_where(ins)}")
                if open_dims is None:
                    array.clear()
                    open_dims = (m, n)
                elif open_dims != (m, n):
                    raise SequencingError(f"held accumulation is {open_dims[0]}x{open_dims[1]}, LOAD is {m}x{n}{_where(ins)}")
            elif pending is not None:
                raise SequencingError(f"results of the previous hwpe.load were not stored{_where(ins)}")
            results = []
            for t in range(ops):
                x_rows = [mem.read_words(regs.x_base + 4 * (t * m * kw + i * kw), kw) for i in range(m)]
                w_cols = [mem.read_words(regs.w_base + 4 * (t * n * kw + j * kw), kw) for j in range(n)]
                if not regs.hold:
                    array.clear()
                array.compute(x_rows, w_cols)
                if not regs.hold:
                    out = array.drain()
                    results.append([row[:n] for row in out[:m]])
            if not regs.hold:
                pending = (m, n, results)
            regs.pending_ops = ops
            report.compute_instructions += 1
            report.load_cycles += cycle_cost(ins, regs, sa)
            report.macs += ops * m * k * n
        else:
            if regs.hold:
                if open_dims is None:
                    raise SequencingError(f"hwpe.store with no held accumulation{_where(ins)}")
                out = array.drain()
                m, n = open_dims
                pending = (m, n, [[row[:n] for row in out[:m]]])
                open_dims = None
            elif pending is None:
                raise SequencingError(f"hwpe.store with no computed results{_where(ins)}")
            m, n, results = pending
            words = []
            for res in results:
                for row in res:
                    for bundle in row:
                        words += (bundle & 0xFFFFFFFF, bundle >> 32)
            mem.write_words(ins.addr, words)
            report.compute_instructions += 1
            report.drain_cycles += cycle_cost(ins, regs, sa)
            pending = None
            regs.pending_ops = 0
    return mem, report


def run_program(text: str, memory: Memory, sa: SaConfig, freq: float | None = None):
    return execute(parse_program(text), memory, sa, freq)
