"""Closed-form equilibria and bifurcation loci of the Yamada model.

Everything here is algebra on the parameters: the off state o, the two
interior equilibria p (lower intensity) and q (upper intensity), the
transcritical line T, the fold curve S, the Hopf curve H, the
Bogdanov-Takens locus BT, and the degenerate points ST, HT0 and BT0
where those curves meet the boundary of parameter space.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .model import Params, eigenvalues3, jacobian, vector_field

__all__ = [
    "Equilibrium",
    "SpecialPoint",
    "NoHopfError",
    "off_state",
    "interior_equilibria",
    "all_equilibria",
    "transcritical_A",
    "saddlenode_A",
    "st_point",
    "hopf_gamma",
    "hopf_A",
    "ht0_point",
    "bt_locus",
    "bt0_point",
    "bt0_exists",
]

# |Re(lambda)| below this (relative to the spectrum scale) counts as a
# zero real part when classifying stability
_NEUTRAL_TOL = 1e-9


class NoHopfError(ValueError):
    """Raised when hopf_gamma is asked for a point without an upper equilibrium."""


@dataclass(frozen=True)
class Equilibrium:
    point: np.ndarray
    spectrum: np.ndarray
    stability: str          # sink | saddle-1u | saddle-2u | source | neutral
    role: str               # o | p | q
    physical: bool = True   # False for I < 0 solutions kept for bookkeeping

    @property
    def n_unstable(self):
        return int(sum(1 for lam in self.spectrum if lam.real > 0))


@dataclass(frozen=True)
class SpecialPoint:
    kind: str               # ST | HT0 | BT0
    A: float
    sigma: float
    gamma: float | None = None   # None means "any gamma" (ST)


def classify_spectrum(spectrum):
    """Stability class from the sign pattern of the real parts."""
    scale = max(1.0, max(abs(lam) for lam in spectrum))
    n_pos = n_zero = 0
    for lam in spectrum:
        if abs(lam.real) < _NEUTRAL_TOL * scale:
            n_zero += 1
        elif lam.real > 0:
            n_pos += 1
    if n_zero:
        return "neutral"
    return {0: "sink", 1: "saddle-1u", 2: "saddle-2u", 3: "source"}[n_pos]


def _newton_refine(point, p, steps=1):
    """A Newton step on the vector field; guards closed forms against cancellation."""
    x = np.asarray(point, dtype=float)
    for _ in range(steps):
        f = vector_field(x, p)
        J = jacobian(x, p)
        try:
            dx = np.linalg.solve(J, f)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(dx)) or np.linalg.norm(dx) > 1e-3 * max(
            1.0, np.linalg.norm(x)
        ):
            break   # singular Jacobian (fold/transcritical): keep the closed form
        x = x - dx
    return x


def _make_eq(point, p, role, physical=True):
    point = _newton_refine(point, p)
    spec = eigenvalues3(jacobian(point, p))
    return Equilibrium(point=point, spectrum=spec,
                       stability=classify_spectrum(spec), role=role,
                       physical=physical)


def off_state(p):
    """The non-lasing equilibrium o = (A, B, 0)."""
    point = np.array([p.A, p.B, 0.0])
    spec = eigenvalues3(jacobian(point, p))
    return Equilibrium(point=point, spectrum=spec,
                       stability=classify_spectrum(spec), role="o")


def interior_intensities(p):
    """The two roots I-, I+ of the interior-equilibrium quadratic, or None."""
    a, B, s = p.a, p.B, p.sigma
    b1 = a * (p.A - 1.0) - (B + 1.0) * s
    disc = b1 * b1 + 4.0 * a * s * (p.A - B - 1.0)
    if disc < 0.0:
        return None
    rt = np.sqrt(disc)
    return (b1 - rt) / (2.0 * a), (b1 + rt) / (2.0 * a)


def _interior_point(I, p):
    return np.array([p.A / (1.0 + I), p.B * p.sigma / (p.sigma + p.a * I), I])


def interior_equilibria(p, keep_nonphysical=False):
    """The equilibria p (role 'p', lower intensity) and q (role 'q', upper).

    Returns [] when the pair does not exist.  Solutions with I < 0 are
    tagged non-physical and dropped unless keep_nonphysical is set.
    """
    roots = interior_intensities(p)
    if roots is None:
        return []
    out = []
    for I, role in zip(roots, ("p", "q")):
        physical = I >= 0.0
        if physical or keep_nonphysical:
            out.append(_make_eq(_interior_point(I, p), p, role, physical))
    return out


def all_equilibria(p, keep_nonphysical=False):
    return [off_state(p)] + interior_equilibria(p, keep_nonphysical)


def transcritical_A(p):
    """Pump value of the transcritical line T (independent of sigma, gamma)."""
    return p.B + 1.0


def saddlenode_A(sigma, B=5.8, a=1.8):
    """Fold curve S: pump value and coalesced intensity at given sigma.

    Returns (A_S, I_fold).  Defined for 0 < sigma < a.
    """
    if not 0.0 < sigma < a:
        raise ValueError(f"fold curve requires 0 < sigma < a, got sigma={sigma}")
    rad = np.sqrt(B * sigma * (a - sigma))
    A = (a + (B - 1.0) * sigma + 2.0 * rad) / a
    I_fold = (rad - sigma) / a
    return A, I_fold


def st_point(B=5.8, a=1.8):
    """Tangency of the fold curve S with the transcritical line T."""
    return SpecialPoint(kind="ST", A=B + 1.0, sigma=a * B / (B + 1.0), gamma=None)


def hopf_gamma(A, sigma, B=5.8, a=1.8):
    """Gain-decay value at which the upper equilibrium q has an imaginary pair.

    Negative return values mean the Hopf condition has no physical
    solution there (the factor aB - A sigma^3 changed sign).
    """
    p = Params(A=A, gamma=1.0, sigma=sigma, B=B, a=a)
    roots = interior_intensities(p)
    if roots is None or roots[1] <= 0.0:
        raise NoHopfError(f"no upper equilibrium at A={A}, sigma={sigma}")
    I = roots[1]
    num = sigma * (a * B - A * sigma**3) * I
    den = (1.0 + I) * (a * I + sigma) * (a * I + sigma * (1.0 + sigma + sigma * I))
    return num / den


def hopf_A(gamma, sigma, B=5.8, a=1.8, bracket=None):
    """Pump value on the Hopf curve at given gamma (inverse of hopf_gamma)."""
    A_lo = saddlenode_A(sigma, B, a)[0] * (1.0 + 1e-12) if sigma < a else None
    A_hi = a * B / sigma**3
    if bracket is not None:
        A_lo, A_hi = bracket
    if A_lo is None or A_hi <= A_lo:
        raise NoHopfError(f"Hopf curve empty at sigma={sigma}")
    f = lambda A: hopf_gamma(A, sigma, B, a) - gamma
    lo, hi = f(A_lo), f(A_hi * (1.0 - 1e-12))
    if lo < 0 or hi > 0:
        raise NoHopfError(f"gamma={gamma} outside Hopf range at sigma={sigma}")
    return brentq(f, A_lo, A_hi * (1.0 - 1e-12), xtol=1e-14, rtol=1e-15)


def ht0_point(B=5.8, a=1.8):
    """Hopf-transcritical degeneracy on the gamma = 0 plane."""
    return SpecialPoint(kind="HT0", A=B + 1.0,
                        sigma=(a * B / (B + 1.0)) ** (1.0 / 3.0), gamma=0.0)


def _second_symmetric(M):
    return (M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
            + M[0, 0] * M[2, 2] - M[0, 2] * M[2, 0]
            + M[1, 1] * M[2, 2] - M[1, 2] * M[2, 1])


def bt_locus(sigma, B=5.8, a=1.8):
    """Bogdanov-Takens point at given sigma: (A, gamma) with a double-zero eigenvalue.

    The point sits on the fold curve (A = A_S) at the gamma where the
    characteristic polynomial of the coalesced equilibrium has lambda = 0
    as a double root.  The closed form is polished by one Newton step on
    that double-root condition to absorb cancellation near BT0.
    """
    A, I_fold = saddlenode_A(sigma, B, a)
    num = sigma * (a * B - A * sigma**3) * I_fold
    den = (1.0 + I_fold) * (a * I_fold + sigma) * (
        a * I_fold + sigma * (1.0 + sigma + sigma * I_fold))
    gamma = num / den
    if gamma < 0.0:
        raise ValueError(
            f"BT point has left gamma >= 0 at sigma={sigma} (gamma={gamma:.3e})")
    # Newton polish on r(gamma) = 0, the second characteristic coefficient
    # at the fold equilibrium (lambda = 0 is already a root there)
    x_fold = np.array([A / (1.0 + I_fold),
                       B * sigma / (sigma + a * I_fold), I_fold])
    def r_of(g):
        pp = Params(A=A, gamma=g, sigma=sigma, B=B, a=a)
        return _second_symmetric(jacobian(x_fold, pp))
    if gamma > 0.0:
        # one-sided difference: gamma - h must stay nonnegative near BT0
        h = max(1e-8, 1e-6 * gamma)
        dr = (r_of(gamma + h) - r_of(gamma)) / h
        if dr != 0.0:
            step = r_of(gamma) / dr
            if abs(step) < 0.5 * gamma:
                gamma = gamma - step
    return A, gamma


def _bt0_quartic(sigma, B, a):
    return a * a * B - 2.0 * a * B * sigma**2 - a * sigma**3 + (B + 1.0) * sigma**4


def bt0_exists(B=5.8, a=1.8):
    """Whether the quartic for BT0 has a positive root (printed inequality)."""
    rhs = (16.0 / 27.0) * (-9.0 * B - 8.0 * B**2
                           + np.sqrt(27.0 * B + 108.0 * B**2
                                     + 144.0 * B**3 + 64.0 * B**4))
    return a > rhs


def bt0_point(B=5.8, a=1.8):
    """The BT point on the gamma = 0 plane: smallest positive zero of the quartic."""
    if not bt0_exists(B, a):
        raise ValueError(f"BT0 does not exist for B={B}, a={a}")
    grid = np.linspace(0.0, a, 10001)[1:]
    vals = _bt0_quartic(grid, B, a)
    idx = np.nonzero(np.diff(np.sign(vals)) != 0)[0]
    if len(idx) == 0:
        raise ValueError(f"no sign change of the BT0 quartic on (0, {a})")
    i = idx[0]
    sigma = brentq(_bt0_quartic, grid[i], grid[i + 1], args=(B, a),
                   xtol=1e-15, rtol=1e-15)
    A = saddlenode_A(sigma, B, a)[0]
    return SpecialPoint(kind="BT0", A=A, sigma=sigma, gamma=0.0)
