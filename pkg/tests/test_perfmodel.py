import math
import random

import pytest

from artifact.arith import PrecisionMode as P
from artifact.errors import ConfigError
from artifact.perfmodel import (
    CycleReport,
    ThroughputSpec,
    compare_peak,
    compare_to_baseline,
    load_baselines,
    parse_baselines,
    roofline_cycles,
    theoretical_throughput,
)
from artifact.systolic import SaConfig, tiled_gemm_cost
from artifact.workload import GemmSpec

BASE = load_baselines()


def peak(r, c, freq, mode):
    return theoretical_throughput(ThroughputSpec(r, c, freq, mode))


def test_peak_examples():
    assert peak(12, 12, 200e6, P.FP16) == pytest.approx(57.6, abs=1e-9)
    assert peak(12, 12, 200e6, P.INT8) == pytest.approx(230.4, abs=1e-9)
    assert peak(1, 1, 1, P.INT16) == pytest.approx(2e-9)


def test_peak_scales_with_lanes():
    base = peak(4, 4, 1e8, P.INT16)
    ratios = [peak(4, 4, 1e8, m) / base for m in (P.INT8, P.INT4, P.INT2, P.FP16)]
    assert ratios == pytest.approx([4, 8, 16, 1])


def test_baseline_ratios():
    xp, ae = BASE["xpulpnn"], BASE["angel_eye"]
    assert compare_peak(ThroughputSpec(12, 12, 200e6, P.FP16), xp) == pytest.approx(16.5, rel=1e-4)
    assert compare_peak(ThroughputSpec(12, 12, 200e6, P.INT8), xp) == pytest.approx(8.2, rel=1e-4)
    assert compare_peak(ThroughputSpec(12, 12, 200e6, P.INT8), ae) == pytest.approx(1.2, abs=0.05)
    for mode, claimed in ((P.INT4, 2.5), (P.INT2, 4.9)):
        assert compare_peak(ThroughputSpec(12, 12, 200e6, mode), ae) == pytest.approx(claimed, rel=0.02)


def test_compare_to_baseline():
    ours = CycleReport(4, 2, 7, 19, 7)
    assert compare_to_baseline(ours, BASE["xpulpnn"], "fig2") == pytest.approx(81 / 33)
    counts = BASE["xpulpnn"].scenario("fig2")
    same = CycleReport(counts.setup_instructions, counts.compute_instructions, counts.setup_cycles,
                       counts.compute_cycles, 0)
    assert compare_to_baseline(same, BASE["xpulpnn"], "fig2") == 1.0
    with pytest.raises(ConfigError):
        compare_to_baseline(ours, BASE["xpulpnn"], "fig9")
    with pytest.raises(ConfigError):
        BASE["angel_eye"].peak(P.FP16)


def test_parse_baselines_errors():
    with pytest.raises(ConfigError):
        parse_baselines("x.fig2.setup_cycles = 3\n")  # incomplete scenario
    with pytest.raises(ConfigError):
        parse_baselines("x.mystery = 1\n")
    with pytest.raises(ConfigError):
        parse_baselines("no equals sign\n")
    b = parse_baselines("# c\nfoo.name = Foo Bar\nfoo.peak_gops.int8 = 2.5\n")
    assert b["foo"].name == "Foo Bar" and b["foo"].peak(P.INT8) == 2.5


def test_report_arithmetic():
    a = CycleReport(1, 2, 3, 4, 5, 6, 7, freq=1e9)
    b = a + a
    assert b.total_cycles == 2 * a.total_cycles and b.macs == 14 and b.freq == 1e9
    assert a.gops == pytest.approx(2 * 7 / 18)
    assert CycleReport().gops is None
    assert a.as_dict()["total_cycles"] == 18


def test_roofline_limits():
    spec = ThroughputSpec(4, 4, 1e8, P.INT8)
    g = GemmSpec(4, 4, 4, P.INT8)
    compute = tiled_gemm_cost(4, 4, 4, SaConfig(4, 4, P.INT8)).compute
    assert roofline_cycles(g, spec, math.inf) == compute
    # 4+4 operand words plus 32 result words exceed 11 compute cycles
    assert roofline_cycles(g, spec, 1) == 40 > compute
    with pytest.raises(ValueError):
        roofline_cycles(g, spec, 0)


def test_roofline_never_below_compute():
    rnd = random.Random(8)
    for _ in range(200):
        mode = rnd.choice(list(P))
        spec = ThroughputSpec(rnd.randint(1, 16), rnd.randint(1, 16), 1e8, mode)
        g = GemmSpec(rnd.randint(1, 300), rnd.randint(1, 3000), rnd.randint(1, 300), mode)
        bw = rnd.choice([0.5, 1, 4, 64, math.inf])
        compute = tiled_gemm_cost(g.M, g.K, g.N, SaConfig(spec.rows, spec.cols, mode)).compute
        assert roofline_cycles(g, spec, bw) >= compute
