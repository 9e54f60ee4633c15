import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from yamada.model import (
    Params,
    char_coeffs,
    eigenvalues3,
    jacobian,
    legacy_params,
    vector_field,
)


def test_off_state_is_equilibrium():
    p = Params(A=6.5, gamma=0.1, sigma=1.2)
    assert np.allclose(vector_field((p.A, p.B, 0.0), p), 0.0)


def test_origin_value():
    p = Params(A=6.5, gamma=0.1, sigma=1.2)
    f = vector_field((0.0, 0.0, 0.0), p)
    assert np.allclose(f, [p.gamma * p.A, p.gamma * p.B / p.sigma, 0.0])


def test_vector_field_frozen_value():
    # oracle: 40-digit substitution into the model equations (mpmath)
    p = Params(A=6.5, gamma=0.1, sigma=1.2, B=5.8, a=1.8)
    f = vector_field((1.0, 1.0, 1.0), p)
    assert f == pytest.approx([0.45, 0.275, -1.0], abs=1e-15)


def test_I_zero_plane_invariant():
    rng = np.random.default_rng(5)
    for _ in range(50):
        G, Q = rng.uniform(0, 10, 2)
        p = Params(A=rng.uniform(0, 10), gamma=rng.uniform(0, 2),
                   sigma=rng.uniform(0.1, 3))
        assert vector_field((G, Q, 0.0), p)[2] == 0.0


def test_legacy_params():
    assert legacy_params(0.04, 0.04, A=6.0).sigma == 1.0
    assert legacy_params(0.05, 0.04, A=6.0).sigma == 1.25
    assert legacy_params(0.04, 0.05, A=6.0).sigma == pytest.approx(0.8)
    with pytest.raises(ValueError):
        legacy_params(0.04, 0.0, A=6.0)


def test_params_validation():
    with pytest.raises(ValueError):
        Params(A=6.0, gamma=0.1, sigma=-1.0)
    with pytest.raises(ValueError):
        Params(A=6.0, gamma=-0.1, sigma=1.0)
    # gamma = 0 is a legal boundary value
    Params(A=6.0, gamma=0.0, sigma=1.0)


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(12)
    for _ in range(200):
        s = rng.uniform(0, 10, 3)
        p = Params(A=rng.uniform(0.1, 10), gamma=rng.uniform(0.01, 2),
                   sigma=rng.uniform(0.1, 3), B=rng.uniform(0.5, 10),
                   a=rng.uniform(0.5, 3))
        J = jacobian(s, p)
        h = 1e-6
        fd = np.empty((3, 3))
        for j in range(3):
            e = np.zeros(3)
            e[j] = h
            fd[:, j] = (vector_field(s + e, p) - vector_field(s - e, p)) / (2 * h)
        scale = max(1.0, np.abs(J).max())
        assert np.abs(J - fd).max() / scale < 1e-6


def test_jacobian_off_state_vertical_eigenvalue():
    # at o = (A, B, 0) the I-row decouples: (0, 0, 1) is a left eigenvector
    # with eigenvalue A-B-1
    p = Params(A=6.8, gamma=0.1, sigma=1.0)
    J = jacobian((p.A, p.B, 0.0), p)
    assert np.allclose(J[2], (p.A - p.B - 1.0) * np.array([0, 0, 1]))
    # A = B+1 makes that eigenvalue exactly zero
    lams = eigenvalues3(J)
    assert min(abs(l) for l in lams) < 1e-12


def test_eigenvalues3_diagonal():
    lams = eigenvalues3(np.diag([-1.0, -2.0, 3.0]))
    assert np.allclose(lams, [3.0, -1.0, -2.0])


def test_eigenvalues3_conjugate_pair_order():
    # rotation block plus a contracting axis
    M = np.array([[0.5, -2.0, 0.0], [2.0, 0.5, 0.0], [0.0, 0.0, -1.0]])
    lams = eigenvalues3(M)
    assert lams[0] == pytest.approx(0.5 + 2j)
    assert lams[1] == pytest.approx(0.5 - 2j)
    assert lams[2] == pytest.approx(-1.0)


@settings(max_examples=200, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_eigenvalues3_against_qr_oracle(seed):
    M = np.random.default_rng(seed).normal(size=(3, 3)) * 3.0
    ours = eigenvalues3(M)
    ref = np.sort_complex(np.linalg.eigvals(M))[::-1]
    ref = np.array(sorted(ref, key=lambda z: (-z.real, -z.imag)))
    scale = max(1.0, np.abs(ref).max())
    assert np.abs(ours - ref).max() / scale < 1e-9


@settings(max_examples=200, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_eigenvalues3_trace_det_identities(seed):
    M = np.random.default_rng(seed).normal(size=(3, 3)) * 5.0
    lams = eigenvalues3(M)
    t, r, d = char_coeffs(M)
    scale = max(1.0, abs(t), abs(d))
    assert abs(lams.sum() - t) / scale < 1e-9
    assert abs(lams.prod() - d) / scale < 1e-9


def test_characteristic_residual_small():
    rng = np.random.default_rng(77)
    for _ in range(100):
        M = rng.normal(size=(3, 3)) * 2.0
        t, r, d = char_coeffs(M)
        for lam in eigenvalues3(M):
            res = lam**3 - t * lam**2 + r * lam - d
            assert abs(res) / max(1.0, np.linalg.norm(M)) ** 3 < 1e-10
