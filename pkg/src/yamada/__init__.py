"""Bifurcation toolkit for the Yamada rate equations of a self-pulsing
laser with saturable absorber: equilibria, periodic orbits, invariant
manifolds, and the organization of the (A, gamma) parameter plane."""

from .model import Params, vector_field, jacobian
from .analytic import (
    off_state,
    interior_equilibria,
    all_equilibria,
    transcritical_A,
    saddlenode_A,
    st_point,
    hopf_gamma,
    hopf_A,
    ht0_point,
    bt_locus,
    bt0_point,
)
from .integrator import integrate, attractor_from, kick_response, Event
from .periodic import (
    PeriodicOrbit,
    NoOrbitError,
    solve_po,
    orbit_from_hopf,
    orbit_from_simulation,
    continue_po,
    floquet_multipliers,
    fold_multiplier,
)

__version__ = "0.1.0"
