from artifact.arith import PrecisionMode as P, bundle_lanes
from artifact.mem import pack
from artifact.pe import Ctrl, PeState, pe_step


def w8(*vals):
    return pack(list(vals), P.INT8).words[0]


def test_idle_is_a_no_op():
    s = PeState(5, 6, 7)
    out = pe_step(s, 1, 2, 3, Ctrl.IDLE)
    assert out.state == s and (out.x_out, out.w_out, out.y_out) == (0, 0, 0)


def test_compute_zero_operands_keeps_y():
    s = PeState(0, 0, 0x1234)
    assert pe_step(s, 0, 0, 0, Ctrl.COMPUTE).state.y_reg == 0x1234


def test_one_step_pass_through():
    s = PeState()
    a = pe_step(s, 11, 22, 0, Ctrl.COMPUTE)
    assert (a.x_out, a.w_out) == (0, 0)
    b = pe_step(a.state, 33, 44, 0, Ctrl.COMPUTE)
    assert (b.x_out, b.w_out) == (11, 22)


def test_two_pe_chain_dot_product():
    # X reaches the second PE one step late through the first PE's register;
    # its W stream is delayed by the same step
    xs = [w8(1, -2, 3, 4), w8(5, 6, -7, 8)]
    ws = [w8(2, 2, 2, 2), w8(-1, 1, 1, 3)]
    p0, p1 = PeState(), PeState()
    for t in range(3):
        x_in = xs[t] if t < 2 else 0
        w0 = ws[t] if t < 2 else 0
        w1 = ws[t - 1] if t >= 1 else 0
        o0 = pe_step(p0, x_in, w0, 0, Ctrl.COMPUTE)
        o1 = pe_step(p1, o0.x_out, w1, 0, Ctrl.COMPUTE)
        p0, p1 = o0.state, o1.state
    want = [1 * 2 + 5 * -1, -2 * 2 + 6, 3 * 2 - 7, 4 * 2 + 24]
    assert bundle_lanes(p0.y_reg, P.INT8) == want
    assert bundle_lanes(p1.y_reg, P.INT8) == want


def test_drain_is_a_pure_shift():
    chain = [PeState(y_reg=v) for v in (10, 20, 30)]
    seen = []
    for _ in range(3):
        y = 0
        nxt = []
        for s in chain:
            o = pe_step(s, 0, 0, y, Ctrl.DRAIN)
            nxt.append(o.state)
            y = o.y_out
        seen.append(y)
        chain = nxt
    assert seen == [30, 20, 10]
    assert all(s.y_reg == 0 for s in chain)
