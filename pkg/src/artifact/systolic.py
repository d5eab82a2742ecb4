"""Output-stationary systolic array.

X words (rows of A, packed along K) enter on the west edge and flow east;
W words (columns of B, packed along K) enter on the north edge and flow
south. Row i and column j are skewed by i and j cycles so that word k of
both operands meets in PE(i, j) at cycle i + j + k. Results drain south,
one row per drain step, out of the bottom row.

Functional results come from stepping the PE grid. Reported cycles come
from the calibrated cost model:

    load  = (R - 1) + R * (words injected per row over the batch)
    drain = (C - 1) + n_ops
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .arith import PrecisionMode, ps_accumulate
from .errors import DimensionError
from .mem import pack, word_count
from .pe import Ctrl, PeState, pe_step

DEFAULT_K_CHUNK_WORDS = 64


@dataclass(frozen=True)
class SaConfig:
    rows: int
    cols: int
    mode: PrecisionMode = PrecisionMode.INT8
    # operand words per row a single pass can stream; None means unbounded
    k_chunk_words: int | None = DEFAULT_K_CHUNK_WORDS

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"array must be at least 1x1, got {self.rows}x{self.cols}")
        if self.k_chunk_words is not None and self.k_chunk_words < 1:
            raise ValueError("k_chunk_words must be positive")

    @classmethod
    def parse(cls, text: str, mode: PrecisionMode = PrecisionMode.INT8, **kw) -> "SaConfig":
        """Build from an ``RxC`` string such as ``12x12``."""
        try:
            r, c = text.lower().split("x")
            return cls(int(r), int(c), mode, **kw)
        except ValueError:
            raise ValueError(f"expected RxC array size, got {text!r}") from None

    def with_mode(self, mode: PrecisionMode) -> "SaConfig":
        return SaConfig(self.rows, self.cols, mode, self.k_chunk_words)


class Phase(Enum):
    LOADING = "loading"
    COMPUTING = "computing"
    DRAINING = "draining"
    DONE = "done"


def load_cycles(rows: int, words_per_row: int) -> int:
    """Skew fill plus one injection cycle per array row per operand word."""
    if words_per_row == 0:
        return 0
    return (rows - 1) + rows * words_per_row


def drain_cycles(cols: int, n_ops: int) -> int:
    """Column skew plus one drain beat per operator."""
    if n_ops == 0:
        return 0
    return (cols - 1) + n_ops


@dataclass
class SaCycles:
    load: int = 0
    drain: int = 0
    chunks: int = 0
    sim_steps: int = 0

    @property
    def total(self) -> int:
        return self.load + self.drain


class SystolicArray:
    """Stateful R x C grid of PEs."""

    def __init__(self, cfg: SaConfig, hold: bool = False):
        self.cfg = cfg
        self.hold = hold
        self.grid = [[PeState(mode=cfg.mode, hold=hold) for _ in range(cfg.cols)] for _ in range(cfg.rows)]
        self.phase = Phase.DONE
        self.cycle = 0

    def clear(self) -> None:
        mode, hold = self.cfg.mode, self.hold
        self.grid = [[PeState(mode=mode, hold=hold) for _ in range(self.cfg.cols)] for _ in range(self.cfg.rows)]

    def compute(self, x_rows: list[list[int]], w_cols: list[list[int]]) -> None:
        """Stream one pass of packed operands through the grid.

        ``x_rows[i]`` and ``w_cols[j]`` are the K-word streams for output
        row i and output column j. Y accumulates on top of its current
        contents.
        """
        R, C = self.cfg.rows, self.cfg.cols
        m, n = len(x_rows), len(w_cols)
        if m > R or n > C:
            raise DimensionError(f"{m}x{n} operator does not fit a {R}x{C} array")
        kw = len(x_rows[0]) if x_rows else 0
        if any(len(r) != kw for r in x_rows) or any(len(c) != kw for c in w_cols):
            raise DimensionError("operand streams have unequal word counts")
        grid = self.grid
        steps = kw + R + C - 2 if kw else 0
        compute = Ctrl.COMPUTE
        for t in range(steps):
            self.phase = Phase.LOADING if t < kw + R - 1 else Phase.COMPUTING
            w_from_north = [0] * C
            for j in range(n):
                k = t - j
                if 0 <= k < kw:
                    w_from_north[j] = w_cols[j][k]
            for i in range(R):
                k = t - i
                x_in = x_rows[i][k] if i < m and 0 <= k < kw else 0
                row = grid[i]
                for j in range(C):
                    new, x_in, w_out, _ = pe_step(row[j], x_in, w_from_north[j], 0, compute)
                    row[j] = new
                    w_from_north[j] = w_out
        self.cycle += steps

    def drain(self) -> list[list[int]]:
        """Shift every Y out of the bottom row; returns the R x C bundles."""
        R, C = self.cfg.rows, self.cfg.cols
        self.phase = Phase.DRAINING
        out = [[0] * C for _ in range(R)]
        drain = Ctrl.DRAIN
        for s in range(R):
            y_from_north = [0] * C
            for i in range(R):
                row = self.grid[i]
                for j in range(C):
                    new, _, _, y_out = pe_step(row[j], 0, 0, y_from_north[j], drain)
                    row[j] = new
                    y_from_north[j] = y_out
            for j in range(C):
                out[R - 1 - s][j] = y_from_north[j]
        self.cycle += R
        self.phase = Phase.DONE
        return out


def pack_operands(a, b, mode: PrecisionMode):
    """Pack rows of A and columns of B along K into word streams."""
    x_rows = [list(pack(row, mode).words) for row in a]
    k = len(b)
    w_cols = [list(pack([b[kk][j] for kk in range(k)], mode).words) for j in range(len(b[0]) if b else 0)]
    return x_rows, w_cols


def _check_operator(a, b, cfg):
    m = len(a)
    k = len(a[0]) if m else 0
    n = len(b[0]) if b else 0
    if m == 0 or n == 0 or k == 0:
        raise DimensionError("operator dimensions must be positive")
    if len(b) != k or any(len(r) != k for r in a) or any(len(r) != n for r in b):
        raise DimensionError("operand shapes do not agree")
    if m > cfg.rows or n > cfg.cols:
        raise DimensionError(
            f"{m}x{n} output does not fit a {cfg.rows}x{cfg.cols} array; tile first"
        )
    return m, k, n


def _chunks(kw, cap):
    step = cap or kw
    return [(s, min(s + step, kw)) for s in range(0, kw, step)]


def sa_matmul(a, b, cfg: SaConfig, hold_across_chunks: bool = True):
    """Multiply one operator on the array.

    K is streamed in chunks of ``cfg.k_chunk_words`` words. With
    ``hold_across_chunks`` Y stays in the PEs between chunks and drains
    once; otherwise each chunk drains and the host adds the partial
    bundles with the same adder semantics. Returns ``(bundles, SaCycles)``
    where ``bundles`` is the M x N matrix of 64-bit accumulator bundles.
    """
    m, k, n = _check_operator(a, b, cfg)
    mode = cfg.mode
    x_rows, w_cols = pack_operands(a, b, mode)
    kw = word_count(k, mode)
    chunks = _chunks(kw, cfg.k_chunk_words)
    sa = SystolicArray(cfg, hold=hold_across_chunks)
    cycles = SaCycles(chunks=len(chunks))
    acc = None
    for lo, hi in chunks:
        sa.compute([r[lo:hi] for r in x_rows], [c[lo:hi] for c in w_cols])
        cycles.load += load_cycles(cfg.rows, hi - lo)
        if not hold_across_chunks:
            part = sa.drain()
            sa.clear()
            cycles.drain += drain_cycles(cfg.cols, 1)
            if acc is None:
                acc = part
            else:
                acc = [[ps_accumulate(acc[i][j], part[i][j], mode) for j in range(cfg.cols)] for i in range(cfg.rows)]
    if hold_across_chunks:
        acc = sa.drain()
        cycles.drain += drain_cycles(cfg.cols, 1)
    cycles.sim_steps = sa.cycle
    return [row[:n] for row in acc[:m]], cycles


def sa_run_batch(ops, cfg: SaConfig):
    """Run operators back-to-back with shared skew.

    Each operator must fit the array in one pass. Returns the per-operator
    bundle matrices in submission order and the batch's cycle counts.
    """
    ops = list(ops)
    if not ops:
        return [], SaCycles()
    sa = SystolicArray(cfg)
    results = []
    words = 0
    for a, b in ops:
        m, k, n = _check_operator(a, b, cfg)
        kw = word_count(k, cfg.mode)
        if cfg.k_chunk_words is not None and kw > cfg.k_chunk_words:
            raise DimensionError(f"operator needs {kw} words per row; chunk limit is {cfg.k_chunk_words}")
        x_rows, w_cols = pack_operands(a, b, cfg.mode)
        sa.clear()
        sa.compute(x_rows, w_cols)
        out = sa.drain()
        results.append([row[:n] for row in out[:m]])
        words += kw
    cycles = SaCycles(
        load=load_cycles(cfg.rows, words),
        drain=drain_cycles(cfg.cols, len(ops)),
        chunks=1,
        sim_steps=sa.cycle,
    )
    return results, cycles


@dataclass
class TileCost:
    """Modelled cost of a tiled GEMM on the array."""

    tiles: int
    passes: int
    load: int
    drain: int
    traffic_words: int
    macs: int

    @property
    def compute(self) -> int:
        return self.load + self.drain


def tiled_gemm_cost(M: int, K: int, N: int, cfg: SaConfig) -> TileCost:
    """Closed-form cost of tiling an M x K x N GEMM onto the array.

    Every output tile streams its K words in chunks (held in the PEs) and
    drains once. Traffic counts operand words per pass plus two result
    words per output element.
    """
    R, C = cfg.rows, cfg.cols
    kw = word_count(K, cfg.mode)
    cap = cfg.k_chunk_words or kw
    n_chunks = -(-kw // cap)
    row_tiles, col_tiles = -(-M // R), -(-N // C)
    tiles = row_tiles * col_tiles
    load = tiles * (n_chunks * (R - 1) + R * kw)
    drain = tiles * drain_cycles(C, 1)
    # sum of tile heights over all tiles is M per column tile, and so on
    traffic = kw * (M * col_tiles + N * row_tiles) + 2 * M * N
    return TileCost(tiles, tiles * n_chunks, load, drain, traffic, M * K * N)
