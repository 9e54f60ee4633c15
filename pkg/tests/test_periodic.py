import numpy as np
import pytest

from yamada.analytic import hopf_gamma, interior_equilibria
from yamada.integrator import Event, attractor_from, integrate
from yamada.model import Params, jacobian, vector_field
from yamada.periodic import (
    NoOrbitError,
    continue_po,
    floquet_multipliers,
    fold_multiplier,
    hopf_seed,
    multiplier_product_log,
    orbit_from_hopf,
    orbit_from_simulation,
    remesh,
    solve_po,
    trace_integral,
)


@pytest.fixture(scope="module")
def pulsing_po():
    # strongly pulsing attracting orbit: one short spike per long period
    p = Params(A=6.81, gamma=0.03, sigma=1.0)
    return orbit_from_simulation(p, budget=12000.0)


@pytest.fixture(scope="module")
def upper_branch():
    # branch born at the Hopf of the upper equilibrium, followed in gamma
    # through its fold
    po = orbit_from_hopf(7.0, 1.0, N=60)
    return continue_po(po, param="gamma", direction=+1, ds0=5e-3,
                       max_steps=40, period_cap=200.0)


@pytest.fixture(scope="module")
def saddle_po():
    po = orbit_from_hopf(6.351, 1.0, N=50)
    br = continue_po(po, param="gamma", direction=+1, target=0.12,
                     max_steps=200, period_cap=500.0)
    assert br.status == "target_reached"
    return br.orbits[-1]


def test_pulsing_orbit_period(pulsing_po):
    po = pulsing_po
    assert po.residual < 1e-10
    # frozen from the converged solve; cross-checked against the return
    # time of the flow in the test below
    assert po.T == pytest.approx(1461.7086637, rel=1e-6)
    assert po.stability == "attracting"
    assert po.I_max > 5.0


def test_pulsing_orbit_return_time_cross_check(pulsing_po):
    # independent route: locate the first return to the section G = G(0)
    # with the time stepper, no collocation involved
    po = pulsing_po
    p = po.params
    s0 = po.nodes[0]
    f0 = vector_field(s0, p)
    sec = Event(lambda s, g0=s0[0]: s[0] - g0,
                direction=float(np.sign(f0[0])))
    tr = integrate(s0, p, 1.2 * po.T, rtol=1e-11, atol=1e-13, events=[sec])
    returns = [e.t for e in tr.events if e.t > 0.5 * po.T]
    assert returns, "no section return found"
    assert returns[0] == pytest.approx(po.T, rel=1e-7)


def test_pulsing_orbit_closes_under_integration(pulsing_po):
    po = pulsing_po
    tr = integrate(po.nodes[0], po.params, po.T, rtol=1e-11, atol=1e-13)
    gap = np.linalg.norm(tr.final - po.nodes[0])
    assert gap < 1e-6 * (1.0 + np.linalg.norm(po.nodes[0]))


def test_pulsing_orbit_multipliers(pulsing_po):
    mults, note = floquet_multipliers(pulsing_po)
    assert mults is not None, note
    trivial_err = np.abs(mults - 1.0).min()
    assert trivial_err < 1e-6
    others = sorted(np.abs(mults))[:2]
    assert all(m < 1.0 for m in others)


def test_multiplier_product_matches_trace_integral(pulsing_po):
    # Liouville: det of the monodromy equals exp of the integrated trace
    ti = trace_integral(pulsing_po)
    lp = multiplier_product_log(pulsing_po)
    assert abs(lp - ti) < 1e-6 * max(1.0, abs(ti))


def test_period_stable_under_mesh_refinement(pulsing_po):
    po = pulsing_po
    fine = solve_po(po, po.params, N=po.n_intervals + 60, adapt=False)
    assert abs(fine.T - po.T) < 1e-7 * po.T


def test_orbit_evaluation_is_periodic(pulsing_po):
    po = pulsing_po
    assert np.allclose(po.eval(0.0), po.nodes[0])
    assert np.allclose(po.eval(1.0), po.nodes[-1])
    assert np.allclose(po.nodes[0], po.nodes[-1], atol=1e-12)


def test_remesh_preserves_profile(pulsing_po):
    po = pulsing_po
    again = solve_po(remesh(po, 300), po.params, adapt=False)
    assert abs(again.T - po.T) < 1e-6 * po.T
    tau = np.linspace(0.0, 1.0, 17)
    assert np.allclose(again.eval(tau), po.eval(tau), atol=1e-5)


def test_hopf_seed_period_matches_eigenfrequency():
    gH = hopf_gamma(6.5, 1.0)
    p = Params(A=6.5, gamma=gH, sigma=1.0)
    q = interior_equilibria(p)[1]
    w = np.linalg.eigvals(jacobian(q.point, p))
    omega = abs(w[np.argmax(np.abs(w.imag))].imag)
    mesh, loop, T0, p0 = hopf_seed(6.5, 1.0)
    assert T0 == pytest.approx(2.0 * np.pi / omega, rel=1e-9)
    # the seed loop rings the equilibrium at the requested radius
    assert np.linalg.norm(loop - q.point, axis=1).max() < 0.1


def test_hopf_orbit_approaches_linear_limit():
    gH = hopf_gamma(6.5, 1.0)
    p = Params(A=6.5, gamma=gH, sigma=1.0)
    q = interior_equilibria(p)[1]
    w = np.linalg.eigvals(jacobian(q.point, p))
    omega = abs(w[np.argmax(np.abs(w.imag))].imag)
    T_lin = 2.0 * np.pi / omega
    dT, dg = {}, {}
    for eps in (2e-2, 5e-3):
        po = orbit_from_hopf(6.5, 1.0, eps=eps, N=40)
        dT[eps] = po.T - T_lin
        dg[eps] = po.params.gamma - gH
    # amplitude scaling: period and parameter offsets shrink like eps^2
    assert abs(dT[5e-3]) < 1e-4 * T_lin
    assert 8.0 < dT[2e-2] / dT[5e-3] < 32.0
    assert dg[2e-2] > 0.0 and dg[5e-3] > 0.0
    assert 8.0 < dg[2e-2] / dg[5e-3] < 32.0


def test_saddle_orbit_above_hopf(saddle_po):
    po = saddle_po
    assert po.params.gamma == pytest.approx(0.12, abs=1e-12)
    assert po.params.A == pytest.approx(6.351, abs=1e-12)
    assert po.stability == "saddle"
    mults = po.multipliers
    assert np.abs(mults - 1.0).min() < 1e-6
    unstable = mults[np.argmax(np.abs(mults))]
    assert unstable.imag == 0.0 and unstable.real > 1.05


def test_monodromy_against_flow_derivative(saddle_po):
    # independent route: differentiate the time-T flow map numerically
    po = saddle_po
    s0 = po.nodes[0]
    M_fd = np.empty((3, 3))
    h = 1e-6
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        up = integrate(s0 + e, po.params, po.T, rtol=1e-12, atol=1e-14)
        dn = integrate(s0 - e, po.params, po.T, rtol=1e-12, atol=1e-14)
        M_fd[:, k] = (up.final - dn.final) / (2.0 * h)
    mu_fd = np.sort(np.abs(np.linalg.eigvals(M_fd)))[-1]
    mu_co = np.sort(np.abs(po.multipliers))[-1]
    assert mu_fd == pytest.approx(mu_co, rel=1e-4)


def test_fixed_period_solve_recovers_parameter(saddle_po):
    po = saddle_po
    again = solve_po(po, po.params, fixed_T=po.T, free_param="A",
                     adapt=False)
    assert again.params.A == pytest.approx(po.params.A, abs=1e-8)
    assert abs(again.T - po.T) == 0.0


def test_branch_finds_the_fold(upper_branch):
    br = upper_branch
    assert len(br.folds) == 1
    g_fold, po = br.folds[0]
    gH = hopf_gamma(7.0, 1.0)
    assert gH < g_fold < gH + 3e-4
    # frozen from the converged refinement
    assert g_fold == pytest.approx(0.05625597, abs=1e-6)
    assert po.T == pytest.approx(26.7373, abs=1e-3)


def test_fold_orbit_has_unit_multiplier(upper_branch):
    _, po = upper_branch.folds[0]
    assert abs(fold_multiplier(po) - 1.0) < 1e-5
    mults, note = floquet_multipliers(po)
    assert mults is not None, note
    # both the trivial and the fold multiplier sit at 1
    assert np.sort(np.abs(mults - 1.0))[1] < 1e-5


def test_fold_separates_attractor_kinds(upper_branch):
    # independent route: above the fold everything spirals into the
    # upper equilibrium, below it the flow settles on the orbit
    g_fold, po = upper_branch.folds[0]
    above = attractor_from((7.0, 5.8, 0.5),
                           Params(A=7.0, gamma=g_fold + 1e-3, sigma=1.0),
                           budget=30000.0)
    below = attractor_from((7.0, 5.8, 0.5),
                           Params(A=7.0, gamma=g_fold - 1e-3, sigma=1.0),
                           budget=30000.0)
    assert above.kind == "equilibrium"
    assert below.kind == "periodic-orbit"
    assert below.period > po.T


def test_branch_orbit_count_and_sides(upper_branch):
    br = upper_branch
    gs = np.array([o.params.gamma for o in br.orbits])
    g_fold = br.folds[0][0]
    assert gs.max() <= g_fold + 1e-8
    kinds = {o.stability for o in br.orbits if o.stability}
    assert kinds == {"saddle", "attracting"}


def test_branch_toward_long_period(pulsing_po):
    # decreasing the pump squeezes the orbit against its homoclinic end;
    # the period blows up within a few thousandths in A
    small = solve_po(pulsing_po, pulsing_po.params, N=150, adapt=True)
    br = continue_po(small, param="A", direction=-1, ds0=2e-3,
                     max_steps=120, period_cap=4e3)
    assert br.status == "period_cap"
    last = br.orbits[-1]
    assert last.T > 4e3
    assert last.near_homoclinic
    assert 6.800 < last.params.A < 6.807


def test_solver_reports_failure():
    # no orbit anywhere near this point; the solver must say so
    p = Params(A=6.81, gamma=0.03, sigma=1.0)
    mesh = np.linspace(0.0, 1.0, 11)
    rng = np.random.default_rng(7)
    nodes = rng.uniform(-1.0, 1.0, (41, 3)) * 50.0
    nodes[-1] = nodes[0]
    with pytest.raises(NoOrbitError):
        solve_po((mesh, nodes, 5.0), p, adapt=False, max_iter=8)
