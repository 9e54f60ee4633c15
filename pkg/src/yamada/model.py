"""Yamada laser model: vector field, Jacobian, and a small eigenvalue solver.

The state is (G, Q, I): gain, absorption, intensity.  Parameters are
(A, gamma_G, sigma, B, a) with sigma = gamma_G / gamma_Q the decay-rate
ratio.  Everything downstream (equilibria, orbits, bifurcation curves)
is built on the three functions here.
"""

from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "Params",
    "legacy_params",
    "vector_field",
    "jacobian",
    "eigenvalues3",
]


@dataclass(frozen=True)
class Params:
    """Model parameters.  B and a default to the values used throughout."""

    A: float
    gamma: float          # gain decay rate gamma_G
    sigma: float          # gamma_G / gamma_Q
    B: float = 5.8
    a: float = 1.8

    def __post_init__(self):
        if not (self.sigma > 0 and self.B > 0 and self.a > 0):
            raise ValueError(f"sigma, B, a must be positive, got {self}")
        if self.gamma < 0 or self.A < 0:
            raise ValueError(f"A and gamma must be nonnegative, got {self}")

    @property
    def gamma_Q(self):
        return self.gamma / self.sigma

    def with_(self, **kw):
        """Copy with some fields replaced (A=..., gamma=..., sigma=...)."""
        return replace(self, **kw)


def legacy_params(gamma_G, gamma_Q, A, B=5.8, a=1.8):
    """Build Params from the two separate decay rates (older convention)."""
    if gamma_Q <= 0:
        raise ValueError(f"gamma_Q must be positive, got {gamma_Q}")
    return Params(A=A, gamma=gamma_G, sigma=gamma_G / gamma_Q, B=B, a=a)


def vector_field(s, p):
    """Right-hand side (dG/dt, dQ/dt, dI/dt) at state s = (G, Q, I)."""
    G, Q, I = s
    return np.array([
        p.gamma * (p.A - G - G * I),
        (p.gamma / p.sigma) * (p.B - Q - (p.a / p.sigma) * Q * I),
        (G - Q - 1.0) * I,
    ])


def jacobian(s, p):
    """Analytic Jacobian of vector_field at s."""
    G, Q, I = s
    g, sg, a = p.gamma, p.sigma, p.a
    return np.array([
        [-g * (I + 1.0), 0.0, -G * g],
        [0.0, -g * (sg + I * a) / sg**2, -Q * a * g / sg**2],
        [I, -I, G - Q - 1.0],
    ])


def _cubic_roots(c2, c1, c0):
    """Roots of lambda^3 + c2 lambda^2 + c1 lambda + c0, as complex triple.

    Closed form (trigonometric for three real roots, Cardano otherwise),
    then one Newton polish per root.
    """
    # depressed cubic t^3 + p t + q with lambda = t - c2/3
    shift = c2 / 3.0
    pp = c1 - c2 * c2 / 3.0
    qq = (2.0 * c2**3 - 9.0 * c2 * c1) / 27.0 + c0
    disc = (qq / 2.0) ** 2 + (pp / 3.0) ** 3
    if disc < 0.0:
        # three distinct real roots
        rho = np.sqrt(-(pp**3) / 27.0)
        theta = np.arccos(np.clip(-qq / (2.0 * rho), -1.0, 1.0))
        m = 2.0 * np.sqrt(-pp / 3.0)
        ts = [m * np.cos((theta + 2.0 * np.pi * k) / 3.0) for k in range(3)]
        roots = [complex(t - shift) for t in ts]
    else:
        sq = np.sqrt(disc)
        u = np.cbrt(-qq / 2.0 + sq)
        v = np.cbrt(-qq / 2.0 - sq)
        t1 = u + v
        real = t1 - shift
        re = -t1 / 2.0 - shift
        im = (u - v) * np.sqrt(3.0) / 2.0
        roots = [complex(real), complex(re, im), complex(re, -im)]
    # one Newton step per root against the original cubic
    polished = []
    for z in roots:
        f = z**3 + c2 * z**2 + c1 * z + c0
        df = 3.0 * z**2 + 2.0 * c2 * z + c1
        if df != 0:
            z = z - f / df
        polished.append(z)
    return polished


def eigenvalues3(M):
    """Eigenvalues of a real 3x3 matrix, sorted by descending real part.

    Ties in the real part are broken by descending imaginary part, so a
    complex-conjugate pair always comes out (re + i|im|, re - i|im|).
    """
    M = np.asarray(M, dtype=float)
    t = M[0, 0] + M[1, 1] + M[2, 2]
    # sum of principal 2x2 minors
    r = (M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
         + M[0, 0] * M[2, 2] - M[0, 2] * M[2, 0]
         + M[1, 1] * M[2, 2] - M[1, 2] * M[2, 1])
    d = np.linalg.det(M)
    roots = _cubic_roots(-t, r, -d)
    roots.sort(key=lambda z: (-z.real, -z.imag))
    return np.array(roots, dtype=complex)


def char_coeffs(M):
    """(t, r, d) with characteristic cubic lambda^3 - t lambda^2 + r lambda - d."""
    M = np.asarray(M, dtype=float)
    t = M[0, 0] + M[1, 1] + M[2, 2]
    r = (M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
         + M[0, 0] * M[2, 2] - M[0, 2] * M[2, 0]
         + M[1, 1] * M[2, 2] - M[1, 2] * M[2, 1])
    d = np.linalg.det(M)
    return t, r, d
