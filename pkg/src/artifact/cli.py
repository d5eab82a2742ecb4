"""Command-line front end.

Every report prints as a table followed by ``key=value`` records, one
record per line, each starting with its record type. Faults exit 1.
"""

from __future__ import annotations

import argparse
import math
import random
import re
import sys
from importlib import resources
from pathlib import Path

from .arith import PrecisionMode, fp16_from_float
from .errors import ConfigError, SimError
from .isa import Opcode, execute, parse_program
from .mem import Memory, pack
from .perfmodel import (
    CycleReport,
    ThroughputSpec,
    compare_peak,
    compare_to_baseline,
    load_baselines,
    theoretical_throughput,
)
from .systolic import SaConfig
from .workload import load_network, lower_layer, simulate_network

_SUFFIX = {"": 1, "k": 1e3, "m": 1e6, "g": 1e9}


def parse_freq(text: str) -> float:
    """``200e6``, ``200M``, ``200MHz`` and ``0.2GHz`` all mean 200 MHz."""
    m = re.fullmatch(r"([0-9.]+(?:e[0-9]+)?)\s*([kmg]?)(?:hz)?", text.strip().lower())
    if not m:
        raise argparse.ArgumentTypeError(f"bad frequency {text!r}")
    value = float(m.group(1)) * _SUFFIX[m.group(2)]
    if not value > 0:
        raise argparse.ArgumentTypeError("frequency must be positive")
    return value


def _sa(text: str) -> SaConfig:
    try:
        return SaConfig.parse(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _mode(text: str) -> PrecisionMode:
    try:
        return PrecisionMode.parse(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _int(text: str) -> int:
    return int(text, 0)


def _bw(text: str) -> float:
    v = math.inf if text.lower() in ("inf", "none") else float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("bandwidth must be positive")
    return v


def kv(kind: str, fields: dict) -> str:
    def fmt(v):
        if isinstance(v, float):
            return f"{v:.6g}"
        return str(v).replace(" ", "_")

    return " ".join([kind] + [f"{k}={fmt(v)}" for k, v in fields.items()])


def table(header, rows) -> str:
    cells = [list(map(str, header))] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = []
    for n, r in enumerate(cells):
        lines.append("  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths))))
        if n == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _report_table(rep: CycleReport) -> str:
    rows = [
        ("setup", rep.setup_instructions, rep.setup_cycles),
        ("compute", rep.compute_instructions, rep.compute_cycles),
        ("overall", rep.instructions, rep.total_cycles),
    ]
    out = table(("phase", "instructions", "cycles"), rows)
    out += f"\nload {rep.load_cycles}  drain {rep.drain_cycles}  stall {rep.stall_cycles}  macs {rep.macs}"
    if rep.gops is not None:
        out += f"\nthroughput {rep.gops:.3f} GOPS"
    return out


def _emit(args, text_block: str, records: list[str]) -> None:
    if args.format in ("table", "both"):
        print(text_block)
    if args.format in ("kv", "both"):
        for r in records:
            print(r)


# subcommands


def cmd_run(args) -> int:
    program = parse_program(Path(args.program).read_text())
    mem = Memory.load(args.mem)
    out_mem, rep = execute(program, mem, args.sa, args.freq)
    out = args.out or f"{args.mem}.out"
    out_mem.save(out)
    _emit(args, _report_table(rep) + f"\nresult memory written to {out}", [kv("report", rep.as_dict())])
    return 0


def cmd_bench(args) -> int:
    layers = load_network(args.net)
    if args.mode is not None:
        layers = [l.with_mode(args.mode) for l in layers]
    sa = SaConfig(args.sa.rows, args.sa.cols, args.sa.mode, args.k_chunk)
    net = simulate_network(layers, sa, args.freq, args.bw, batch=not args.no_batch)
    rows, records = [], []
    for e in net.entries:
        g = lower_layer(e.layers[0])
        r = e.report
        rows.append((e.label, g.mode, g.M, g.K, g.N, r.macs, r.total_cycles, f"{r.gops:.3f}"))
        records.append(kv("layer", {"name": e.label, "mode": g.mode, "m": g.M, "k": g.K, "n": g.N, **r.as_dict()}))
    t = net.total
    peak_modes = sorted({l.mode for l in layers}, key=lambda m: m.lanes)
    peaks = {m: theoretical_throughput(ThroughputSpec(sa.rows, sa.cols, args.freq, m)) for m in peak_modes}
    block = table(("name", "mode", "M", "K", "N", "macs", "cycles", "GOPS"), rows)
    block += "\n\n" + _report_table(t) if t.total_cycles else "\n\nempty network"
    for m, p in peaks.items():
        block += f"\npeak {m} {p:.1f} GOPS"
    total = t.as_dict()
    total["layers"] = len(layers)
    records.append(kv("total", total))
    _emit(args, block, records)
    return 0


def operand_memory(program, seed: int) -> Memory:
    """Random in-range operands under every LOAD of a single-setup program."""
    rnd = random.Random(seed)
    mode, x, w, dims = PrecisionMode.INT8, 0, 0, (1, 1, 1, 1)
    top, words = 0, {}
    for ins in program:
        if ins.mode is not None:
            mode = ins.mode
        if ins.opcode is Opcode.XADDR:
            x = ins.addr
        elif ins.opcode is Opcode.WADDR:
            w = ins.addr
        elif ins.opcode is Opcode.LEN:
            dims = (ins.m, ins.k, ins.n, ins.ops)
        elif ins.opcode is Opcode.LOAD:
            m, k, n, ops = dims
            for base, count in ((x, m * ops), (w, n * ops)):
                for r in range(count):
                    if mode.is_float:
                        vals = [fp16_from_float(rnd.uniform(-1, 1)) for _ in range(k)]
                    else:
                        lim = 1 << (mode.width - 1)
                        vals = [rnd.randrange(-lim, lim) for _ in range(k)]
                    row = pack(vals, mode).words
                    for i, v in enumerate(row):
                        words[base + 4 * (r * len(row) + i)] = v
        elif ins.opcode is Opcode.STORE:
            m, k, n, ops = dims
            top = max(top, ins.addr + 8 * m * n * ops)
    top = max([top] + [a + 4 for a in words])
    mem = Memory(top)
    for a, v in words.items():
        mem.write_words(a, [v])
    return mem


def cmd_compare(args) -> int:
    baselines = load_baselines(args.baselines)
    if args.baseline not in baselines:
        raise ConfigError(f"unknown baseline {args.baseline!r}")
    base = baselines[args.baseline]
    counts = base.scenario(args.scenario)
    path = args.program or resources.files("artifact").joinpath(f"data/{args.scenario}.hwpe")
    program = parse_program(Path(str(path)).read_text())
    _, rep = execute(program, operand_memory(program, args.seed), args.sa)
    speedup = compare_to_baseline(rep, base, args.scenario)
    instr_ratio = rep.instructions / counts.instructions
    cycle_ratio = rep.total_cycles / counts.total_cycles
    rows = [
        ("ours", rep.setup_instructions, rep.setup_cycles, rep.compute_instructions, rep.compute_cycles,
         rep.instructions, rep.total_cycles),
        (base.name, counts.setup_instructions, counts.setup_cycles, counts.compute_instructions,
         counts.compute_cycles, counts.instructions, counts.total_cycles),
    ]
    block = table(("", "setup instr", "setup cyc", "compute instr", "compute cyc", "instr", "cycles"), rows)
    block += (
        f"\ninstruction ratio {100 * instr_ratio:.1f}%  cycle ratio {100 * cycle_ratio:.1f}%"
        f"  speedup {speedup:.1f}x ({speedup:.2f})"
    )
    rec = kv("compare", {
        "scenario": args.scenario,
        "baseline": base.key,
        "instructions": rep.instructions,
        "cycles": rep.total_cycles,
        "baseline_instructions": counts.instructions,
        "baseline_cycles": counts.total_cycles,
        "instruction_ratio": round(instr_ratio, 4),
        "cycle_ratio": round(cycle_ratio, 4),
        "speedup": round(speedup, 4),
    })
    _emit(args, block, [rec])
    return 0


def cmd_peak(args) -> int:
    spec = ThroughputSpec(args.sa.rows, args.sa.cols, args.freq, args.mode)
    gops = theoretical_throughput(spec)
    fields = {"rows": spec.rows, "cols": spec.cols, "freq": spec.freq, "mode": spec.mode, "gops": round(gops, 6)}
    block = f"{spec.rows}x{spec.cols} {spec.mode} at {spec.freq / 1e6:g} MHz: {gops:.1f} GOPS"
    for key, b in load_baselines(args.baselines).items():
        if spec.mode in b.peak_gops:
            ratio = compare_peak(spec, b)
            block += f"\n  {ratio:.2f}x {b.name} ({b.peak(spec.mode):.1f} GOPS)"
            fields[f"ratio_vs_{key}"] = round(ratio, 4)
    _emit(args, block, [kv("peak", fields)])
    return 0


def cmd_mkimage(args) -> int:
    rnd = random.Random(args.seed)
    mem = Memory(args.size)
    if args.seed is not None:
        mem.write_words(0, [rnd.getrandbits(32) for _ in range(args.size // 4)])
    if args.program:
        src = operand_memory(parse_program(Path(args.program).read_text()), args.seed or 0)
        n = min(src.size, mem.size) // 4
        mem.write_words(0, src.read_words(0, n))
    mem.save(args.out)
    print(f"wrote {args.size} bytes to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="artifact", description="Multi-precision systolic array simulator")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, sa_default=None):
        sp.add_argument("--sa", type=_sa, required=sa_default is None, default=sa_default, help="array size RxC")
        sp.add_argument("--format", choices=("table", "kv", "both"), default="both")

    r = sub.add_parser("run", help="execute an HWPE program on a memory image")
    r.add_argument("program")
    r.add_argument("--mem", required=True, help="memory image file")
    r.add_argument("--out", help="result image path (default: <mem>.out)")
    r.add_argument("--freq", type=parse_freq)
    common(r)
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bench", help="model a layer list end to end")
    b.add_argument("--net", required=True, help="layer list file or bundled name (resnet50)")
    b.add_argument("--freq", type=parse_freq, required=True)
    b.add_argument("--bw", type=_bw, default=math.inf, help="bus words per cycle (default: unlimited)")
    b.add_argument("--mode", type=_mode, help="override every layer's precision")
    b.add_argument("--k-chunk", type=int, default=64, help="operand words per pass")
    b.add_argument("--no-batch", action="store_true", help="do not merge identical single-pass layers")
    common(b)
    b.set_defaults(func=cmd_bench)

    c = sub.add_parser("compare", help="compare a scenario against a baseline")
    c.add_argument("--scenario", required=True)
    c.add_argument("--baseline", default="xpulpnn")
    c.add_argument("--program", help="program to run (default: bundled <scenario>.hwpe)")
    c.add_argument("--baselines", help="baseline config file")
    c.add_argument("--seed", type=int, default=0)
    common(c, SaConfig(4, 4))
    c.set_defaults(func=cmd_compare)

    k = sub.add_parser("peak", help="theoretical throughput")
    k.add_argument("--freq", type=parse_freq, required=True)
    k.add_argument("--mode", type=_mode, required=True)
    k.add_argument("--baselines", help="baseline config file")
    common(k)
    k.set_defaults(func=cmd_peak)

    m = sub.add_parser("mkimage", help="write a memory image")
    m.add_argument("out")
    m.add_argument("--size", type=_int, required=True, help="bytes")
    m.add_argument("--seed", type=int, help="fill with random words")
    m.add_argument("--program", help="place random operands under this program's loads")
    m.set_defaults(func=cmd_mkimage)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SimError, ValueError, OSError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
