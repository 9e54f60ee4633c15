import numpy as np
import pytest

from yamada.integrator import (
    AttractorID,
    DivergenceError,
    Event,
    attractor_from,
    integrate,
    kick_response,
    kick_scan,
)
from yamada.model import Params, vector_field


def test_region1_everything_to_off_state():
    p = Params(A=5.5, gamma=0.04, sigma=1.0)
    tr = integrate((1.0, 1.0, 0.0), p, 2000.0)
    assert np.allclose(tr.final, [5.5, 5.8, 0.0], atol=1e-6)
    assert tr.reason == "t_end"


def test_invariant_plane_pinned():
    p = Params(A=6.6, gamma=0.08, sigma=1.0)
    tr = integrate((2.0, 3.0, 0.0), p, 500.0)
    assert np.all(tr.y[:, 2] == 0.0)


def test_endpoint_against_external_oracle():
    # oracle: dop853 at rtol 1e-13 / atol 1e-16 (scipy), frozen
    p = Params(A=6.6, gamma=0.08, sigma=1.0)
    tr = integrate((3.0, 1.0, 0.5), p, 60.0, rtol=1e-11, atol=1e-13)
    ref = [3.149091731337026, 1.642850479940678, 4.875657691421099]
    assert np.allclose(tr.final, ref, rtol=1e-7, atol=1e-9)


def test_event_time_against_external_oracle():
    # oracle: dop853 event location at rtol 1e-13, frozen
    p = Params(A=6.6, gamma=0.08, sigma=1.0)
    ev = Event(lambda s: s[0] - s[1] - 1.0, direction=+1)
    tr = integrate((3.0, 1.0, 0.5), p, 200.0, rtol=1e-11, atol=1e-13,
                   events=[ev])
    assert tr.events, "no crossing found"
    assert tr.events[0].t == pytest.approx(34.03337226246, abs=1e-6)


def test_terminal_event_stops():
    p = Params(A=6.6, gamma=0.08, sigma=1.0)
    ev = Event(lambda s: s[2] - 3.0, direction=+1, terminal=True)
    tr = integrate((3.0, 1.0, 0.5), p, 200.0, events=[ev])
    assert tr.reason == "event"
    assert tr.final[2] == pytest.approx(3.0, abs=1e-6)
    assert tr.t[-1] < 200.0


def test_convergence_order_at_least_four():
    # fixed-step runs vs a tight adaptive reference; slope of the error in h
    p = Params(A=6.6, gamma=0.08, sigma=1.0)
    s0 = (3.0, 1.0, 0.5)
    ref = integrate(s0, p, 20.0, rtol=1e-12, atol=1e-14).final
    errs, hs = [], [0.5, 0.25, 0.125, 0.0625]
    for h in hs:
        tr = integrate(s0, p, 20.0, rtol=1e3, atol=1e3, max_step=h)
        errs.append(np.linalg.norm(tr.final - ref))
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert slope > 4.0


def test_divergence_raises():
    # gamma = 0 freezes G, Q; G - Q - 1 > 0 makes I grow exponentially forever
    p = Params(A=6.0, gamma=0.0, sigma=1.0)
    with pytest.raises(DivergenceError):
        integrate((5.0, 1.0, 1.0), p, 1e4)


def test_forward_invariant_box():
    rng = np.random.default_rng(9)
    for _ in range(20):
        p = Params(A=rng.uniform(5.5, 8.0), gamma=rng.uniform(0.02, 0.3),
                   sigma=rng.uniform(0.8, 1.3))
        s0 = rng.uniform([0, 0, 0.01], [p.A, p.B, 5.0])
        tr = integrate(s0, p, 300.0, rtol=1e-8, atol=1e-10)
        assert tr.y[:, 0].max() <= max(s0[0], p.A) + 1e-6
        assert tr.y[:, 0].min() >= -1e-9
        assert tr.y[:, 1].max() <= max(s0[1], p.B) + 1e-6
        assert tr.y[:, 1].min() >= -1e-9


def test_backward_integration_reverses_flow():
    p = Params(A=6.6, gamma=0.08, sigma=1.0)
    fwd = integrate((3.0, 1.0, 0.5), p, 5.0, rtol=1e-11, atol=1e-13)
    back = integrate(fwd.final, p, 5.0, rtol=1e-11, atol=1e-13, backward=True)
    assert np.allclose(back.final, [3.0, 1.0, 0.5], atol=1e-8)


# ------------------------------------------------------------- attractors

def test_attractor_region7_interior_is_orbit():
    # the pulsing attractor has a long quiescent stretch, so allow a
    # budget covering several returns
    p = Params(A=6.81, gamma=0.03, sigma=1.0)
    aid = attractor_from((6.0, 2.0, 1.0), p, budget=12000.0)
    assert aid.kind == "periodic-orbit"
    assert aid.period > 0
    assert aid.I_max > 1.0


def test_attractor_region9_is_q():
    p = Params(A=7.5, gamma=0.15, sigma=1.0)
    for s0 in [(1.0, 1.0, 0.5), (7.0, 5.0, 2.0), (4.0, 2.0, 6.0)]:
        aid = attractor_from(s0, p)
        assert aid.kind == "equilibrium"
        assert aid.ref.role == "q"


def test_attractor_region1_is_off_state():
    p = Params(A=5.5, gamma=0.04, sigma=1.0)
    aid = attractor_from((3.0, 2.0, 1.0), p)
    assert aid.kind == "equilibrium"
    assert aid.ref.role == "o"


def test_attractor_deterministic():
    p = Params(A=6.81, gamma=0.03, sigma=1.0)
    a1 = attractor_from((6.0, 2.0, 1.0), p, budget=12000.0)
    a2 = attractor_from((6.0, 2.0, 1.0), p, budget=12000.0)
    assert a1.kind == a2.kind and a1.period == a2.period


# ----------------------------------------------------------- excitability

def test_kick_zero_decays():
    p = Params(A=6.54, gamma=0.04, sigma=1.0)
    r = kick_response(p, 0.0)
    assert r["response"] == "decay"
    assert r["return_time"] == 0.0


def test_kick_threshold_region2():
    p = Params(A=6.54, gamma=0.04, sigma=1.0)
    small = kick_response(p, 1e-4)
    big = kick_response(p, 0.5)
    assert small["response"] == "decay"
    assert small["peak_I"] < 0.01
    assert big["response"] == "pulse"
    assert big["peak_I"] > 1.0
    # both come back to the off state: o is the only attractor in region 2
    assert small["return_time"] is not None
    assert big["return_time"] is not None


def test_kick_scan_single_threshold_interval():
    p = Params(A=6.54, gamma=0.04, sigma=1.0)
    kicks = np.geomspace(1e-4, 0.5, 12)
    profile = kick_scan(p, kicks)
    responses = [r["response"] for r in profile]
    # a single decay-to-pulse switch across this range
    switches = sum(1 for i in range(len(responses) - 1)
                   if responses[i] != responses[i + 1])
    assert responses[0] == "decay"
    assert responses[-1] == "pulse"
    assert switches == 1
