import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from yamada import analytic
from yamada.analytic import (
    NoHopfError,
    all_equilibria,
    bt0_exists,
    bt0_point,
    bt_locus,
    hopf_A,
    hopf_gamma,
    ht0_point,
    interior_equilibria,
    off_state,
    saddlenode_A,
    st_point,
    transcritical_A,
)
from yamada.model import Params, eigenvalues3, jacobian, vector_field


def P(A, gamma=0.1, sigma=1.0, **kw):
    return Params(A=A, gamma=gamma, sigma=sigma, **kw)


# ---------------------------------------------------------------- off state

def test_off_state_point_and_stability():
    o = off_state(P(5.5))
    assert np.allclose(o.point, [5.5, 5.8, 0.0])
    assert o.stability == "sink"
    assert off_state(P(6.8)).stability == "neutral"
    assert off_state(P(7.5)).stability == "saddle-1u"


# ------------------------------------------------------- interior equilibria

def test_no_interior_pair_left_of_fold():
    assert interior_equilibria(P(5.5)) == []


def test_interior_pair_region2_stability():
    # at (A, gamma, sigma) = (6.54, 0.04, 1): p is a saddle with one
    # unstable eigenvalue, q a repelling spiral (complex pair with
    # positive real part; the third eigenvalue is always negative since
    # the trace is negative at interior equilibria)
    eqs = interior_equilibria(P(6.54, gamma=0.04))
    assert [e.role for e in eqs] == ["p", "q"]
    p_eq, q_eq = eqs
    assert p_eq.stability == "saddle-1u"
    assert all(l.imag == 0 for l in p_eq.spectrum)
    assert q_eq.stability == "saddle-2u"
    assert q_eq.spectrum[0].imag != 0.0   # spiral
    # oracle: 40-digit quadratic-root evaluation (mpmath)
    assert p_eq.point[2] == pytest.approx(0.086181966042814885, abs=1e-12)
    assert q_eq.point[2] == pytest.approx(1.6760402561794073, abs=1e-12)


def test_interior_equilibria_residual_small():
    rng = np.random.default_rng(3)
    for _ in range(100):
        p = P(rng.uniform(6.1, 9.0), gamma=rng.uniform(0.01, 1.0),
              sigma=rng.uniform(0.3, 1.5))
        for eq in interior_equilibria(p):
            assert np.linalg.norm(vector_field(eq.point, p)) < 1e-10


def test_nonphysical_intensity_flagged():
    # past A = B+1 the lower root I- goes negative
    eqs = interior_equilibria(P(7.5), keep_nonphysical=True)
    assert eqs[0].role == "p" and not eqs[0].physical and eqs[0].point[2] < 0
    assert eqs[1].physical
    assert [e.role for e in interior_equilibria(P(7.5))] == ["q"]


def test_double_root_at_fold():
    A, I_fold = saddlenode_A(1.0)
    eqs = interior_equilibria(P(A * (1 + 1e-14)))
    assert len(eqs) == 2
    assert eqs[0].point[2] == pytest.approx(I_fold, abs=1e-6)
    assert eqs[1].point[2] == pytest.approx(I_fold, abs=1e-6)


# ----------------------------------------------------------- curve constants

def test_transcritical_value():
    assert transcritical_A(P(6.0)) == pytest.approx(6.8)
    assert transcritical_A(P(6.0, B=1.0)) == pytest.approx(2.0)


def test_saddlenode_frozen_value():
    # oracle: 200-step bisection on the discriminant zero (mpmath, 40 digits)
    A, I_fold = saddlenode_A(1.0)
    assert A == pytest.approx(6.0600732476153351, abs=1e-12)
    assert I_fold > 0
    # BT column of the slice table shares the fold pump value
    assert saddlenode_A(1.0670)[0] == pytest.approx(6.2118, abs=1e-4)


def test_saddlenode_domain():
    with pytest.raises(ValueError):
        saddlenode_A(1.8)
    with pytest.raises(ValueError):
        saddlenode_A(0.0)
    # sigma -> a limit: radical vanishes, A -> B
    assert saddlenode_A(1.8 - 1e-12)[0] == pytest.approx(5.8, abs=1e-5)


def test_st_point():
    sp = st_point()
    assert sp.A == pytest.approx(6.8)
    assert sp.sigma == pytest.approx(1.5352941176470588, abs=1e-12)
    assert sp.gamma is None
    # tangency: the fold curve meets A = B+1 exactly at sigma_ST
    assert saddlenode_A(sp.sigma)[0] == pytest.approx(6.8, abs=1e-12)
    # a = B+1 makes sigma_ST = B
    assert st_point(B=2.0, a=3.0).sigma == pytest.approx(2.0)


def test_fold_intensity_sign_flips_at_st():
    sp = st_point()
    assert saddlenode_A(sp.sigma - 1e-3)[1] > 0
    assert saddlenode_A(sp.sigma + 1e-3)[1] < 0
    assert abs(saddlenode_A(sp.sigma)[1]) < 1e-12


# ------------------------------------------------------------------- Hopf

def test_hopf_gamma_frozen_value():
    # oracle: 40-digit evaluation of the closed form (mpmath)
    assert hopf_gamma(6.5, 1.0) == pytest.approx(0.095225763459613841, abs=1e-14)


def test_hopf_gamma_gives_imaginary_pair():
    for A, sigma in [(6.5, 1.0), (6.3, 1.0), (6.6, 1.115), (6.6, 0.8)]:
        g = hopf_gamma(A, sigma)
        p = Params(A=A, gamma=g, sigma=sigma)
        q = [e for e in interior_equilibria(p) if e.role == "q"][0]
        pair = sorted(q.spectrum, key=lambda z: -abs(z.imag))[:2]
        assert all(abs(l.real) < 1e-8 for l in pair)
        assert pair[0].imag > 0


def test_hopf_gamma_errors_and_sign():
    with pytest.raises(NoHopfError):
        hopf_gamma(5.5, 1.0)          # no interior pair
    # beyond A = aB/sigma^3 the returned value goes negative
    assert hopf_gamma(10.5, 1.0) < 0


def test_hopf_A_inverts_hopf_gamma():
    for gamma in (0.05, 0.1, 0.15):
        A = hopf_A(gamma, 1.0)
        assert hopf_gamma(A, 1.0) == pytest.approx(gamma, abs=1e-13)


def test_ht0_point():
    hp = ht0_point()
    assert hp.A == pytest.approx(6.8)
    assert hp.sigma == pytest.approx(1.1536228828930383, abs=1e-12)
    assert hp.sigma**3 == pytest.approx(st_point().sigma, abs=1e-12)
    assert hopf_gamma(hp.A, hp.sigma) == pytest.approx(0.0, abs=1e-12)


# ---------------------------------------------------------------- BT locus

def test_bt_locus_frozen_values():
    # oracle: 40-digit evaluation of the double-root condition (mpmath)
    A, g = bt_locus(1.0670)
    assert A == pytest.approx(6.2118288409678441, abs=1e-10)
    assert g == pytest.approx(0.13659591165815984, abs=1e-10)
    A, g = bt_locus(1.1150)
    assert A == pytest.approx(6.3119239714826239, abs=1e-10)
    assert g == pytest.approx(0.078806248104147856, abs=1e-10)
    # published 4-decimal values for those slices
    assert (round(A, 4), round(g, 4)) == (6.3119, 0.0788)


def test_bt_locus_near_bt0():
    # the published slice at sigma = 1.1754978 prints gamma = 3.561e-7; the
    # quartic root is at sigma = 1.17549909, so that sigma value carries a
    # seventh-digit error and the gamma there is 1.74e-6 (|dgamma/dsigma| ~ 1.35)
    A, g = bt_locus(1.1754978)
    assert A == pytest.approx(6.4274, abs=1e-4)
    assert g == pytest.approx(3.561e-7, abs=2e-6)
    assert 0 < g < 1e-5


def test_bt_locus_double_zero_eigenvalue():
    for sigma in (1.0, 1.067, 1.115, 1.17):
        A, g = bt_locus(sigma)
        p = Params(A=A, gamma=g, sigma=sigma)
        _, I_fold = saddlenode_A(sigma)
        x = np.array([A / (1 + I_fold), 5.8 * sigma / (sigma + 1.8 * I_fold), I_fold])
        lams = np.sort(np.abs(eigenvalues3(jacobian(x, p))))
        assert lams[0] < 1e-6 and lams[1] < 1e-6


def test_bt_gamma_monotone_down_to_bt0():
    sig = np.linspace(1.0, bt0_point().sigma - 1e-9, 200)
    gam = np.array([bt_locus(s)[1] for s in sig])
    assert np.all(np.diff(gam) < 0)
    assert gam[-1] < 1e-7


def test_bt_locus_out_of_range():
    with pytest.raises(ValueError):
        bt_locus(1.3)


def test_bt0_point_frozen():
    # oracle: mpmath findroot on the quartic, 40 digits
    bp = bt0_point()
    assert bp.sigma == pytest.approx(1.1754990914058648, abs=1e-12)
    assert bp.A == pytest.approx(6.427374498706109, abs=1e-12)
    q = 1.8**2 * 5.8 - 2 * 1.8 * 5.8 * bp.sigma**2 - 1.8 * bp.sigma**3 + 6.8 * bp.sigma**4
    assert abs(q) < 1e-10
    assert bt_locus(bp.sigma - 1e-12)[1] < 1e-6


def test_bt0_exists_default_and_boundary():
    assert bt0_exists(5.8, 1.8)
    # oracle: 40-digit evaluation of the printed inequality threshold
    assert not bt0_exists(5.8, 0.97943048692450636 * (1 - 1e-12))
    assert bt0_exists(5.8, 0.97943048692450636 * (1 + 1e-12))


@settings(max_examples=60, deadline=None)
@given(st.floats(min_value=0.5, max_value=12.0),
       st.floats(min_value=0.2, max_value=3.0))
def test_bt0_exists_matches_grid_scan(B, a):
    grid = np.linspace(1e-6, a * (1 - 1e-9), 4000)
    vals = (a * a * B - 2 * a * B * grid**2 - a * grid**3 + (B + 1) * grid**4)
    has_root = bool(np.any(vals <= 0))
    predicted = bt0_exists(B, a)
    if predicted != has_root:
        # near-tangency: the scan can miss a root that barely dips below zero
        assert np.min(vals) / (a * a * B) < 1e-4
    else:
        assert predicted == has_root


def test_all_equilibria_count():
    assert len(all_equilibria(P(5.5))) == 1
    assert len(all_equilibria(P(6.5))) == 3
    assert len(all_equilibria(P(7.5))) == 2        # p went non-physical
    assert len(all_equilibria(P(7.5), keep_nonphysical=True)) == 3
