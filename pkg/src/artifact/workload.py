"""Map CONV/FC layers onto tiled array passes and model them end to end.

A layer is lowered to ``C[M x N] = A[M x K] @ B[K x N]`` with the weights
as A. For convolutions ``M = out_ch``, ``K = in_ch*kh*kw`` (index
``c*kh*kw + r*kw + s``) and ``N = out_h*out_w``; FC layers use batch 1, so
``N = 1``.

Each output tile of at most R x C elements streams K in chunks of
``k_chunk_words`` packed words held in the PEs, then drains once. The
emitted command stream is one ``hwpe.setup`` per layer, then per pass
``xaddr, waddr, len, load`` and per tile one ``store``. Consecutive layers
with identical single-pass GEMMs are batched into one multi-operator
LOAD.

Layer list format, one layer per line, ``#`` comments::

    conv <name> in_ch=<n> out_ch=<n> kernel=<h>x<w> out=<h>x<w> [stride=<n>] [pad=<n>] [mode=<m>]
    fc   <name> in=<n> out=<n> [mode=<m>]
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources

from .arith import PrecisionMode, reduce_lanes
from .errors import ParseError
from .isa import HwpeInstruction, execute
from .mem import Memory, PackedTensor, pack, unpack_bundles, word_count
from .perfmodel import CycleReport, memory_cycles
from .systolic import SaConfig, drain_cycles, load_cycles, tiled_gemm_cost


class LayerKind(Enum):
    CONV = "conv"
    FC = "fc"


@dataclass(frozen=True)
class LayerSpec:
    kind: LayerKind
    name: str
    in_ch: int
    out_ch: int
    kernel_h: int = 1
    kernel_w: int = 1
    out_h: int = 1
    out_w: int = 1
    mode: PrecisionMode = PrecisionMode.INT8
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        dims = (self.in_ch, self.out_ch, self.kernel_h, self.kernel_w, self.out_h, self.out_w, self.stride)
        if min(dims) < 1 or self.padding < 0:
            raise ValueError(f"layer {self.name}: dimensions must be positive")

    @classmethod
    def conv(cls, name, in_ch, out_ch, kernel, out, mode=PrecisionMode.INT8, stride=1, padding=0):
        kh, kw = kernel if isinstance(kernel, tuple) else (kernel, kernel)
        oh, ow = out if isinstance(out, tuple) else (out, out)
        return cls(LayerKind.CONV, name, in_ch, out_ch, kh, kw, oh, ow, mode, stride, padding)

    @classmethod
    def fc(cls, name, in_features, out_features, mode=PrecisionMode.INT8):
        return cls(LayerKind.FC, name, in_features, out_features, mode=mode)

    @property
    def macs(self) -> int:
        return self.out_ch * self.out_h * self.out_w * self.in_ch * self.kernel_h * self.kernel_w

    @property
    def in_features(self) -> int:
        return self.in_ch

    @property
    def out_features(self) -> int:
        return self.out_ch

    # smallest input extent producing the output size
    @property
    def in_h(self) -> int:
        return (self.out_h - 1) * self.stride + self.kernel_h - 2 * self.padding

    @property
    def in_w(self) -> int:
        return (self.out_w - 1) * self.stride + self.kernel_w - 2 * self.padding

    def with_mode(self, mode: PrecisionMode) -> "LayerSpec":
        return replace(self, mode=mode)


@dataclass(frozen=True)
class GemmSpec:
    M: int
    K: int
    N: int
    mode: PrecisionMode = PrecisionMode.INT8

    @property
    def macs(self) -> int:
        return self.M * self.K * self.N


def lower_layer(layer: LayerSpec) -> GemmSpec:
    if layer.kind is LayerKind.FC:
        return GemmSpec(layer.out_ch, layer.in_ch, 1, layer.mode)
    return GemmSpec(
        layer.out_ch,
        layer.in_ch * layer.kernel_h * layer.kernel_w,
        layer.out_h * layer.out_w,
        layer.mode,
    )


@dataclass(frozen=True)
class Tile:
    row0: int
    rows: int
    col0: int
    cols: int
    chunks: tuple[tuple[int, int], ...]  # K element ranges [k0, k1)


@dataclass(frozen=True)
class TilingPlan:
    gemm: GemmSpec
    tiles: tuple[Tile, ...]

    @property
    def hold(self) -> bool:
        return any(len(t.chunks) > 1 for t in self.tiles)

    @property
    def passes(self) -> list[tuple[tuple[int, int], tuple[int, int], tuple[int, int]]]:
        return [((t.row0, t.rows), (t.col0, t.cols), c) for t in self.tiles for c in t.chunks]

    @property
    def macs(self) -> int:
        return sum(t.rows * t.cols * (k1 - k0) for t in self.tiles for k0, k1 in t.chunks)


def tile(gemm: GemmSpec, sa: SaConfig) -> TilingPlan:
    R, C = sa.rows, sa.cols
    kw = word_count(gemm.K, gemm.mode)
    cap = sa.k_chunk_words or kw
    step = cap * gemm.mode.lanes
    chunks = tuple((k0, min(k0 + step, gemm.K)) for k0 in range(0, gemm.K, step))
    tiles = tuple(
        Tile(r0, min(R, gemm.M - r0), c0, min(C, gemm.N - c0), chunks)
        for r0 in range(0, gemm.M, R)
        for c0 in range(0, gemm.N, C)
    )
    return TilingPlan(gemm, tiles)


def _words(values, mode):
    return list(pack(values, mode).words)


def build_gemm_program(a, b, plan: TilingPlan, sa: SaConfig):
    """Lay out the operands of a tiled GEMM and emit its command stream.

    Returns ``(program, memory, result_slots)`` where ``result_slots`` lists
    ``(tile, address)`` for every STORE.
    """
    mode = plan.gemm.mode
    image: list[int] = []
    program = [HwpeInstruction.setup(mode, hold=plan.hold)]
    stores = []
    for t in plan.tiles:
        for k0, k1 in t.chunks:
            x_addr = 4 * len(image)
            for i in range(t.row0, t.row0 + t.rows):
                image += _words(a[i][k0:k1], mode)
            w_addr = 4 * len(image)
            for j in range(t.col0, t.col0 + t.cols):
                image += _words([b[k][j] for k in range(k0, k1)], mode)
            program += [
                HwpeInstruction.xaddr(x_addr),
                HwpeInstruction.waddr(w_addr),
                HwpeInstruction.length(t.rows, k1 - k0, t.cols, 1),
                HwpeInstruction.load(),
            ]
        stores.append(t)
        program.append(None)  # patched once the operand image size is known
    slots = []
    base = 4 * len(image)
    for t in stores:
        slots.append((t, base))
        base += 8 * t.rows * t.cols
    it = iter(slots)
    program = [HwpeInstruction.store(next(it)[1]) if ins is None else ins for ins in program]
    mem = Memory(base)
    mem.write_words(0, image)
    return program, mem, slots


def run_gemm(a, b, sa: SaConfig, mode: PrecisionMode | None = None, freq=None):
    """Execute a GEMM of any size through tiling, the sequencer and the array.

    Returns ``(bundles, CycleReport)`` with one 64-bit accumulator bundle
    per output element.
    """
    mode = mode or sa.mode
    gemm = GemmSpec(len(a), len(b), len(b[0]), mode)
    plan = tile(gemm, sa)
    program, mem, slots = build_gemm_program(a, b, plan, sa)
    out_mem, report = execute(program, mem, sa.with_mode(mode), freq)
    c = [[0] * gemm.N for _ in range(gemm.M)]
    for t, addr in slots:
        bundles = unpack_bundles(out_mem.read_words(addr, 2 * t.rows * t.cols))
        for i in range(t.rows):
            for j in range(t.cols):
                c[t.row0 + i][t.col0 + j] = bundles[i * t.cols + j]
    return c, report


def im2col(layer: LayerSpec, inputs):
    """Unroll ``inputs[c][y][x]`` into the K x N patch matrix.

    Padding positions hold 0 (the FP16 encoding of +0 as well).
    """
    if layer.kind is LayerKind.FC:
        return [[v] for v in inputs]
    cols = []
    in_h, in_w = len(inputs[0]), len(inputs[0][0])
    for oy in range(layer.out_h):
        for ox in range(layer.out_w):
            col = []
            for c in range(layer.in_ch):
                for r in range(layer.kernel_h):
                    for s in range(layer.kernel_w):
                        y = oy * layer.stride + r - layer.padding
                        x = ox * layer.stride + s - layer.padding
                        col.append(inputs[c][y][x] if 0 <= y < in_h and 0 <= x < in_w else 0)
            cols.append(col)
    return [[cols[n][k] for n in range(len(cols))] for k in range(len(cols[0]))]


def weight_matrix(layer: LayerSpec, weights):
    if layer.kind is LayerKind.FC:
        return [list(row) for row in weights]
    return [
        [weights[o][c][r][s] for c in range(layer.in_ch) for r in range(layer.kernel_h) for s in range(layer.kernel_w)]
        for o in range(layer.out_ch)
    ]


def run_layer(layer: LayerSpec, inputs, weights, sa: SaConfig, freq=None):
    """Functionally execute a (small) layer.

    Outputs are lane-reduced values shaped ``[out_ch][out_h][out_w]`` for
    CONV and ``[out_features]`` for FC; FP16 outputs are encodings.
    """
    a = weight_matrix(layer, weights)
    b = im2col(layer, inputs)
    c, report = run_gemm(a, b, sa, layer.mode, freq)
    vals = [[reduce_lanes(v, layer.mode) for v in row] for row in c]
    if layer.kind is LayerKind.FC:
        return [row[0] for row in vals], report
    return [[vals[o][oy * layer.out_w:(oy + 1) * layer.out_w] for oy in range(layer.out_h)] for o in range(layer.out_ch)], report


# modelled performance


def _gemm_report(gemm: GemmSpec, sa: SaConfig, freq, bandwidth) -> CycleReport:
    cfg = sa.with_mode(gemm.mode)
    cost = tiled_gemm_cost(gemm.M, gemm.K, gemm.N, cfg)
    stall = max(0, memory_cycles(cost.traffic_words, bandwidth) - cost.compute)
    return CycleReport(
        setup_instructions=1 + 3 * cost.passes,
        compute_instructions=cost.passes + cost.tiles,
        setup_cycles=4 + 3 * cost.passes,
        load_cycles=cost.load,
        drain_cycles=cost.drain,
        stall_cycles=stall,
        macs=cost.macs,
        freq=freq,
    )


def _batch_report(gemm: GemmSpec, n_ops: int, sa: SaConfig, freq, bandwidth) -> CycleReport:
    kw = word_count(gemm.K, gemm.mode)
    load = load_cycles(sa.rows, n_ops * kw)
    drain = drain_cycles(sa.cols, n_ops)
    traffic = n_ops * ((gemm.M + gemm.N) * kw + 2 * gemm.M * gemm.N)
    stall = max(0, memory_cycles(traffic, bandwidth) - (load + drain))
    return CycleReport(4, 2, 7, load, drain, stall, n_ops * gemm.macs, freq)


def _single_pass(gemm: GemmSpec, sa: SaConfig) -> bool:
    kw = word_count(gemm.K, gemm.mode)
    return gemm.M <= sa.rows and gemm.N <= sa.cols and (sa.k_chunk_words is None or kw <= sa.k_chunk_words)


def layer_report(layer: LayerSpec, sa: SaConfig, freq=None, bandwidth=math.inf) -> CycleReport:
    return _gemm_report(lower_layer(layer), sa, freq, bandwidth)


@dataclass
class NetworkEntry:
    layers: tuple[LayerSpec, ...]
    report: CycleReport

    @property
    def label(self) -> str:
        if len(self.layers) == 1:
            return self.layers[0].name
        return f"{self.layers[0].name}..{self.layers[-1].name} (x{len(self.layers)})"


@dataclass
class NetworkReport:
    entries: list[NetworkEntry] = field(default_factory=list)
    total: CycleReport = field(default_factory=CycleReport)


def simulate_network(layers, sa: SaConfig, freq: float, bandwidth: float = math.inf,
                     batch: bool = True) -> NetworkReport:
    """Model every layer and fold the reports in layer order."""
    layers = list(layers)
    out = NetworkReport(total=CycleReport(freq=freq))
    i = 0
    while i < len(layers):
        gemm = lower_layer(layers[i])
        j = i + 1
        if batch and _single_pass(gemm, sa):
            while j < len(layers) and lower_layer(layers[j]) == gemm:
                j += 1
        group = tuple(layers[i:j])
        if len(group) > 1:
            rep = _batch_report(gemm, len(group), sa, freq, bandwidth)
        else:
            rep = _gemm_report(gemm, sa, freq, bandwidth)
        out.entries.append(NetworkEntry(group, rep))
        out.total = out.total + rep
        i = j
    return out


# layer list files


def _dims(text, col, lineno):
    try:
        h, w = text.lower().split("x")
        return int(h), int(w)
    except ValueError:
        raise ParseError(f"expected <h>x<w>, got {text!r}", lineno, col) from None


def _int(text, col, lineno):
    if not text.isdigit():
        raise ParseError(f"expected a positive integer, got {text!r}", lineno, col)
    return int(text)


_CONV_KEYS = {"in_ch", "out_ch", "kernel", "out", "stride", "pad", "mode"}
_FC_KEYS = {"in", "out", "mode"}


def parse_layers(text: str, default_mode: PrecisionMode = PrecisionMode.INT8) -> list[LayerSpec]:
    layers = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        body = raw.split("#", 1)[0]
        toks = body.split()
        if not toks:
            continue
        col = {i: body.index(t) + 1 for i, t in enumerate(toks)}
        kind = toks[0].lower()
        if kind not in ("conv", "fc") or len(toks) < 2:
            raise ParseError(f"expected 'conv <name> ...' or 'fc <name> ...', got {body.strip()!r}", lineno, 1)
        name = toks[1]
        kv = {}
        allowed = _CONV_KEYS if kind == "conv" else _FC_KEYS
        for i, t in enumerate(toks[2:], 2):
            key, sep, value = t.partition("=")
            if not sep or key not in allowed:
                raise ParseError(f"unexpected field {t!r} for {kind}", lineno, col[i])
            kv[key] = (value, col[i])
        try:
            mode = PrecisionMode.parse(kv["mode"][0]) if "mode" in kv else default_mode
        except ValueError as e:
            raise ParseError(str(e), lineno, kv["mode"][1]) from None
        need = {"in_ch", "out_ch", "kernel", "out"} if kind == "conv" else {"in", "out"}
        missing = need - kv.keys()
        if missing:
            raise ParseError(f"{kind} {name} is missing {', '.join(sorted(missing))}", lineno, 1)
        try:
            if kind == "conv":
                layers.append(LayerSpec.conv(
                    name,
                    _int(*kv["in_ch"], lineno),
                    _int(*kv["out_ch"], lineno),
                    _dims(*kv["kernel"], lineno),
                    _dims(*kv["out"], lineno),
                    mode,
                    _int(*kv["stride"], lineno) if "stride" in kv else 1,
                    _int(*kv["pad"], lineno) if "pad" in kv else 0,
                ))
            else:
                layers.append(LayerSpec.fc(name, _int(*kv["in"], lineno), _int(*kv["out"], lineno), mode))
        except ValueError as e:
            raise ParseError(str(e), lineno, 1) from None
    return layers


def format_layers(layers) -> str:
    lines = []
    for l in layers:
        if l.kind is LayerKind.FC:
            lines.append(f"fc {l.name} in={l.in_ch} out={l.out_ch} mode={l.mode}")
        else:
            extra = (f" stride={l.stride}" if l.stride != 1 else "") + (f" pad={l.padding}" if l.padding else "")
            lines.append(
                f"conv {l.name} in_ch={l.in_ch} out_ch={l.out_ch} kernel={l.kernel_h}x{l.kernel_w} "
                f"out={l.out_h}x{l.out_w}{extra} mode={l.mode}"
            )
    return "".join(s + "\n" for s in lines)


def load_network(name_or_path, default_mode: PrecisionMode = PrecisionMode.INT8) -> list[LayerSpec]:
    """Read a layer list from a path, or a bundled network by name (``resnet50``)."""
    from pathlib import Path

    p = Path(name_or_path)
    if p.exists():
        text = p.read_text()
    else:
        text = resources.files("artifact").joinpath(f"data/{name_or_path}.txt").read_text()
    return parse_layers(text, default_mode)
