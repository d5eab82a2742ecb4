import math
import random

import pytest

from artifact.arith import PrecisionMode as P, fp16_from_float
from artifact.errors import ParseError
from artifact.isa import Opcode
from artifact.perfmodel import ThroughputSpec, theoretical_throughput
from artifact.systolic import SaConfig
from artifact.workload import (
    GemmSpec,
    LayerSpec,
    build_gemm_program,
    format_layers,
    im2col,
    layer_report,
    load_network,
    lower_layer,
    parse_layers,
    run_gemm,
    run_layer,
    simulate_network,
    tile,
)
from oracles import lanes_to_bits, ref_fp16_add, ref_fp16_mul, ref_lane_gemm, sx


def rand_vals(rnd, mode, n):
    if mode.is_float:
        return [fp16_from_float(rnd.uniform(-2, 2)) for _ in range(n)]
    lim = 1 << (mode.width - 1)
    return [rnd.randrange(-lim, lim) for _ in range(n)]


def test_lowering_examples():
    assert lower_layer(LayerSpec.fc("f", 4, 4)) == GemmSpec(4, 4, 1, P.INT8)
    assert lower_layer(LayerSpec.conv("c", 3, 8, 3, 8)) == GemmSpec(8, 27, 64, P.INT8)
    g = lower_layer(LayerSpec.conv("r", 256, 256, 3, 14, padding=1))
    assert (g.M, g.K, g.N) == (256, 2304, 196)


def test_layer_validation():
    with pytest.raises(ValueError):
        LayerSpec.conv("bad", 0, 4, 3, 4)
    fc = LayerSpec.fc("f", 10, 3)
    assert (fc.in_features, fc.out_features, fc.macs) == (10, 3, 30)


def test_mac_conservation():
    rnd = random.Random(0)
    for _ in range(200):
        layer = LayerSpec.conv("x", rnd.randint(1, 64), rnd.randint(1, 64), rnd.randint(1, 5),
                               (rnd.randint(1, 20), rnd.randint(1, 20)), rnd.choice(list(P)))
        g = lower_layer(layer)
        assert g.macs == layer.macs
        sa = SaConfig(rnd.randint(1, 12), rnd.randint(1, 12), k_chunk_words=rnd.choice([None, 1, 3, 64]))
        plan = tile(g, sa)
        assert plan.macs == g.macs


def test_tile_shapes():
    sa = SaConfig(4, 4)
    assert len(tile(GemmSpec(4, 4, 4), sa).tiles) == 1
    plan = tile(GemmSpec(5, 4, 3), sa)
    assert [(t.row0, t.rows) for t in plan.tiles] == [(0, 4), (4, 1)]
    plan = tile(GemmSpec(3, 1000, 2, P.INT8), SaConfig(4, 4, k_chunk_words=64))
    assert len(plan.tiles[0].chunks) == math.ceil(1000 / (4 * 64)) and plan.hold


def test_plan_covers_output_once():
    rnd = random.Random(1)
    for _ in range(50):
        g = GemmSpec(rnd.randint(1, 40), rnd.randint(1, 40), rnd.randint(1, 40))
        sa = SaConfig(rnd.randint(1, 7), rnd.randint(1, 7))
        cover = [[0] * g.N for _ in range(g.M)]
        for t in tile(g, sa).tiles:
            assert t.rows <= sa.rows and t.cols <= sa.cols
            for i in range(t.row0, t.row0 + t.rows):
                for j in range(t.col0, t.col0 + t.cols):
                    cover[i][j] += 1
        assert all(v == 1 for row in cover for v in row)


@pytest.mark.parametrize("mode", list(P))
def test_run_gemm_matches_reference(mode):
    rnd = random.Random(list(P).index(mode))
    for _ in range(4):
        M, K, N = rnd.randint(1, 10), rnd.randint(1, 90), rnd.randint(1, 10)
        a = [rand_vals(rnd, mode, K) for _ in range(M)]
        b = [rand_vals(rnd, mode, N) for _ in range(K)]
        sa = SaConfig(rnd.randint(2, 5), rnd.randint(2, 5), mode, rnd.choice([None, 1, 2]))
        c, rep = run_gemm(a, b, sa)
        assert c == [[lanes_to_bits(l, mode) for l in row] for row in ref_lane_gemm(a, b, mode)]
        # the analytic model charges exactly what the sequencer executed
        model = layer_report(LayerSpec.fc("f", K, M, mode), sa) if N == 1 else None
        if model is not None:
            assert (model.instructions, model.total_cycles) == (rep.instructions, rep.total_cycles)


def test_analytic_report_matches_emitted_program():
    rnd = random.Random(2)
    for _ in range(20):
        mode = rnd.choice(list(P))
        layer = LayerSpec.conv("c", rnd.randint(1, 6), rnd.randint(1, 9), rnd.randint(1, 3),
                               (rnd.randint(1, 4), rnd.randint(1, 4)), mode)
        sa = SaConfig(rnd.randint(2, 5), rnd.randint(2, 5), mode, rnd.choice([None, 1, 2]))
        g = lower_layer(layer)
        a = [rand_vals(rnd, mode, g.K) for _ in range(g.M)]
        b = [rand_vals(rnd, mode, g.N) for _ in range(g.K)]
        _, rep = run_gemm(a, b, sa)
        model = layer_report(layer, sa)
        assert model.as_dict() == rep.as_dict()


def test_emitted_program_shape():
    g = GemmSpec(5, 600, 3, P.INT8)
    sa = SaConfig(4, 4, P.INT8, 64)
    plan = tile(g, sa)
    a = [[1] * 600 for _ in range(5)]
    b = [[1] * 3 for _ in range(600)]
    prog, mem, slots = build_gemm_program(a, b, plan, sa)
    ops = [i.opcode for i in prog]
    assert ops.count(Opcode.SETUP) == 1 and prog[0].hold
    assert ops.count(Opcode.LOAD) == 2 * 3 and ops.count(Opcode.STORE) == 2
    assert len(slots) == 2


def ref_conv(layer, x, wts):
    mode = layer.mode
    out = []
    for o in range(layer.out_ch):
        plane = []
        for oy in range(layer.out_h):
            row = []
            for ox in range(layer.out_w):
                terms = []
                for c in range(layer.in_ch):
                    for r in range(layer.kernel_h):
                        for s in range(layer.kernel_w):
                            y = oy * layer.stride + r - layer.padding
                            xx = ox * layer.stride + s - layer.padding
                            v = x[c][y][xx] if 0 <= y < len(x[0]) and 0 <= xx < len(x[0][0]) else 0
                            terms.append((wts[o][c][r][s], v))
                if mode.is_float:
                    acc = 0
                    for wv, xv in terms:
                        acc = ref_fp16_add(acc, ref_fp16_mul(wv, xv))
                    row.append(acc)
                else:
                    lanes = [0] * mode.lanes
                    for k, (wv, xv) in enumerate(terms):
                        lanes[k % mode.lanes] += wv * xv
                    row.append(sum(sx(v, mode.acc_width) for v in lanes))
            plane.append(row)
        out.append(plane)
    return out


@pytest.mark.parametrize("mode", list(P))
def test_small_conv_layers_end_to_end(mode):
    rnd = random.Random(10 + list(P).index(mode))
    for _ in range(3):
        kh = rnd.randint(1, 3)
        stride, pad = rnd.randint(1, 2), rnd.randint(0, 1)
        oh = rnd.randint(1, 4)
        layer = LayerSpec.conv("c", rnd.randint(1, 4), rnd.randint(1, 8), kh, oh, mode, stride, pad)
        in_hw = (oh - 1) * stride + kh - 2 * pad
        if in_hw < 1:
            continue
        x = [[rand_vals(rnd, mode, in_hw) for _ in range(in_hw)] for _ in range(layer.in_ch)]
        wts = [[[rand_vals(rnd, mode, kh) for _ in range(kh)] for _ in range(layer.in_ch)]
               for _ in range(layer.out_ch)]
        out, _ = run_layer(layer, x, wts, SaConfig(4, 4, mode, 1))
        assert out == ref_conv(layer, x, wts)


def test_small_fc_layer():
    rnd = random.Random(3)
    layer = LayerSpec.fc("f", 7, 5, P.INT4)
    x = rand_vals(rnd, P.INT4, 7)
    wts = [rand_vals(rnd, P.INT4, 7) for _ in range(5)]
    out, _ = run_layer(layer, x, wts, SaConfig(4, 4, P.INT4))
    for o in range(5):
        lanes = [0] * 8
        for k in range(7):
            lanes[k % 8] += wts[o][k] * x[k]
        assert out[o] == sum(sx(v, 8) for v in lanes)


def test_im2col_padding():
    layer = LayerSpec.conv("c", 1, 1, 3, 2, padding=1, stride=2)
    x = [[[1, 2, 3], [4, 5, 6], [7, 8, 9]]]
    cols = im2col(layer, x)
    assert len(cols) == 9 and len(cols[0]) == 4
    assert [cols[k][0] for k in range(9)] == [0, 0, 0, 0, 1, 2, 0, 4, 5]


def test_empty_network():
    r = simulate_network([], SaConfig(4, 4), 1e8)
    assert r.total.total_cycles == 0 and r.entries == []


def test_four_operator_network_reproduces_33_cycles():
    ops = [LayerSpec.conv(f"op{i}", 4, 4, 1, (2, 2)) for i in range(4)]
    r = simulate_network(ops, SaConfig(4, 4), 200e6)
    assert (r.total.instructions, r.total.total_cycles) == (6, 33)
    assert len(r.entries) == 1 and len(r.entries[0].layers) == 4
    unbatched = simulate_network(ops, SaConfig(4, 4), 200e6, batch=False)
    assert unbatched.total.total_cycles > 33


def test_fc_int2_beats_int8():
    sa = SaConfig(12, 12)
    fc = LayerSpec.fc("f", 2048, 1000)
    g8 = layer_report(fc, sa, 200e6).gops
    g2 = layer_report(fc.with_mode(P.INT2), sa, 200e6).gops
    assert g2 >= g8


def test_precision_ordering_and_peak_bound():
    rnd = random.Random(4)
    sa = SaConfig(12, 12)
    for _ in range(100):
        layer = LayerSpec.conv("x", rnd.randint(1, 512), rnd.randint(1, 512), rnd.choice([1, 3]),
                               rnd.randint(1, 56))
        bw = rnd.choice([math.inf, 8, 1])
        g = {m: layer_report(layer.with_mode(m), sa, 200e6, bw).gops for m in P}
        assert g[P.INT2] >= g[P.INT4] >= g[P.INT8] >= g[P.INT16]
        for m in P:
            assert g[m] <= theoretical_throughput(ThroughputSpec(12, 12, 200e6, m))


def test_bandwidth_adds_stall():
    layer = LayerSpec.fc("f", 2048, 1000, P.INT2)
    fast = layer_report(layer, SaConfig(12, 12), 2e8)
    slow = layer_report(layer, SaConfig(12, 12), 2e8, bandwidth=0.25)
    assert fast.stall_cycles == 0 and slow.stall_cycles > 0
    assert slow.total_cycles > fast.total_cycles


def test_network_aggregate_gops():
    net = load_network("resnet50")
    assert len(net) == 54 and sum(l.macs for l in net) == 4_089_184_256
    r = simulate_network(net, SaConfig(12, 12), 200e6)
    assert r.total.macs == sum(l.macs for l in net)
    assert r.total.gops == pytest.approx(2 * r.total.macs / (r.total.total_cycles / 200e6) / 1e9)


def test_layer_text_round_trip():
    net = load_network("resnet50")
    assert parse_layers(format_layers(net)) == net
    layers = parse_layers("conv a in_ch=3 out_ch=8 kernel=3x3 out=8x8 mode=int4  # c\nfc b in=4 out=4\n")
    assert layers == [LayerSpec.conv("a", 3, 8, 3, 8, P.INT4), LayerSpec.fc("b", 4, 4)]


@pytest.mark.parametrize(
    "text, line",
    [
        ("pool p size=2", 1),
        ("conv a in_ch=3 out_ch=8 kernel=3 out=8x8", 1),
        ("fc a in=4", 1),
        ("\nfc a in=4 out=4 mode=int3", 2),
        ("fc a in=4 out=-4", 1),
        ("fc a in=4 out=4 colour=red", 1),
    ],
)
def test_layer_parse_errors(text, line):
    with pytest.raises(ParseError) as e:
        parse_layers(text)
    assert e.value.line == line
