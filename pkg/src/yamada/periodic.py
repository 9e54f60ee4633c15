"""Periodic orbits as collocation boundary-value problems.

An orbit is stored as a piecewise polynomial over normalized time
tau in [0, 1]: N mesh intervals, each carrying a degree-m Lagrange
interpolant through m+1 equally spaced representation points, collocated
at the m Gauss-Legendre points of the interval.  The unknowns are the
node values plus the period (and, in the fixed-period variants used by
the two-parameter curves, a model parameter instead).
"""

from dataclasses import dataclass, replace as _dc_replace

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import splu

from .analytic import hopf_gamma, interior_equilibria
from .integrator import attractor_from, integrate
from .model import Params, jacobian

__all__ = [
    "PeriodicOrbit",
    "NoOrbitError",
    "solve_po",
    "hopf_seed",
    "orbit_from_hopf",
    "orbit_from_simulation",
    "continue_po",
    "Branch",
    "floquet_multipliers",
    "fold_multiplier",
    "trace_integral",
    "multiplier_product_log",
    "fold_null_vector",
    "solve_fold_bvp",
    "remesh",
]

_M = 4                       # collocation degree
_T_MULTIPLIER_CAP = 2e4      # periods beyond this get no multipliers at all
_TRIVIAL_GATE = 1e-4         # accuracy gate on the trivial multiplier
_W_T = 1e-3                  # period weight in the continuation metric


class NoOrbitError(RuntimeError):
    """Newton failed to converge to a periodic orbit."""


def _basis(m):
    """Lagrange basis data on [0,1]: values and derivatives at Gauss points."""
    nodes = np.arange(m + 1) / m
    rho, w = leggauss(m)
    rho = 0.5 * (rho + 1.0)
    w = 0.5 * w
    P = np.empty((m, m + 1))
    D = np.empty((m, m + 1))
    for k in range(m + 1):
        others = np.delete(nodes, k)
        denom = np.prod(nodes[k] - others)
        for i, x in enumerate(rho):
            diffs = x - others
            P[i, k] = np.prod(diffs) / denom
            dsum = 0.0
            for skip in range(m):
                dsum += np.prod(np.delete(diffs, skip))
            D[i, k] = dsum / denom
    return nodes, rho, w, P, D


_NODES, _RHO, _W, _P, _D = _basis(_M)


def _rep_taus(mesh):
    """All representation-point positions for a mesh, shape (N*m+1,)."""
    h = np.diff(mesh)
    inner = (mesh[:-1, None] + _NODES[None, :-1] * h[:, None]).ravel()
    return np.append(inner, mesh[-1])


def _f_many(U, p):
    """The vector field on an (..., 3) stack of states."""
    G, Q, I = U[..., 0], U[..., 1], U[..., 2]
    out = np.empty_like(U)
    out[..., 0] = p.gamma * (p.A - G - G * I)
    out[..., 1] = (p.gamma / p.sigma) * (p.B - Q - (p.a / p.sigma) * Q * I)
    out[..., 2] = (G - Q - 1.0) * I
    return out


def _df_many(U, p):
    """State Jacobian on an (..., 3) stack -> (..., 3, 3)."""
    G, Q, I = U[..., 0], U[..., 1], U[..., 2]
    g, sg, a = p.gamma, p.sigma, p.a
    J = np.zeros(U.shape[:-1] + (3, 3))
    J[..., 0, 0] = -g * (I + 1.0)
    J[..., 0, 2] = -G * g
    J[..., 1, 1] = -g * (sg + I * a) / sg**2
    J[..., 1, 2] = -Q * a * g / sg**2
    J[..., 2, 0] = I
    J[..., 2, 1] = -I
    J[..., 2, 2] = G - Q - 1.0
    return J


def _dfdpar_many(U, p, name):
    """Derivative of the vector field with respect to a parameter."""
    out = np.zeros_like(U)
    if name == "A":
        out[..., 0] = p.gamma
    elif name == "gamma":
        G, Q, I = U[..., 0], U[..., 1], U[..., 2]
        out[..., 0] = p.A - G - G * I
        out[..., 1] = (p.B - Q - (p.a / p.sigma) * Q * I) / p.sigma
    else:
        raise ValueError(f"unknown continuation parameter {name!r}")
    return out


def _d2f_dir(V, p):
    """Directional derivative of the Jacobian along v, on (..., 3) stacks.

    The field is quadratic, so the second-derivative tensor is constant
    and (f''. v) is exact: Df(u + v) = Df(u) + (f''. v) for any u, v.
    Returns (..., 3, 3).
    """
    vG, vQ, vI = V[..., 0], V[..., 1], V[..., 2]
    g, sg, a = p.gamma, p.sigma, p.a
    H = np.zeros(V.shape[:-1] + (3, 3))
    H[..., 0, 0] = -g * vI
    H[..., 0, 2] = -g * vG
    H[..., 1, 1] = -(a * g / sg**2) * vI
    H[..., 1, 2] = -(a * g / sg**2) * vQ
    H[..., 2, 0] = vI
    H[..., 2, 1] = -vI
    H[..., 2, 2] = vG - vQ
    return H


def _djac_par_dir(U, V, p, name):
    """(d Df / d par) applied to v on (..., 3) stacks.

    The Jacobian does not depend on A at all, and its gamma-dependence is
    a plain scaling of the first two rows, so both cases are closed form.
    """
    out = np.zeros_like(V)
    if name == "gamma":
        G, Q, I = U[..., 0], U[..., 1], U[..., 2]
        sg, a = p.sigma, p.a
        out[..., 0] = -(I + 1.0) * V[..., 0] - G * V[..., 2]
        out[..., 1] = (-(sg + I * a) * V[..., 1] - Q * a * V[..., 2]) / sg**2
    elif name != "A":
        raise ValueError(f"unknown continuation parameter {name!r}")
    return out


@dataclass
class PeriodicOrbit:
    mesh: np.ndarray          # breakpoints, shape (N+1,)
    nodes: np.ndarray         # values at representation points, (N*m+1, 3)
    T: float
    params: Params
    residual: float
    multipliers: np.ndarray | None = None
    multiplier_note: str = ""
    stability: str | None = None      # attracting | saddle
    label: str | None = None

    @property
    def n_intervals(self):
        return len(self.mesh) - 1

    def eval(self, tau):
        """Evaluate the piecewise polynomial at tau values in [0, 1]."""
        return _eval_nodes(self.mesh, self.nodes, tau)

    @property
    def amplitude(self):
        return float(np.linalg.norm(
            self.nodes.max(axis=0) - self.nodes.min(axis=0)))

    @property
    def I_max(self):
        return float(self.nodes[:, 2].max())

    @property
    def near_homoclinic(self):
        return self.T > 1e3


def _gather(nodes, N):
    """(N*m+1, 3) flat nodes -> (N, m+1, 3) per-interval blocks."""
    idx = np.arange(N)[:, None] * _M + np.arange(_M + 1)[None, :]
    return nodes[idx]


def _eval_nodes(mesh, nodes, tau):
    """Evaluate a piecewise Lagrange profile (mesh, nodes) at tau in [0,1]."""
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    N = len(mesh) - 1
    j = np.clip(np.searchsorted(mesh, tau, side="right") - 1, 0, N - 1)
    h = np.diff(mesh)
    xi = (tau - mesh[j]) / h[j]
    out = np.zeros((len(tau), nodes.shape[1]))
    for k in range(_M + 1):
        others = np.delete(_NODES, k)
        denom = np.prod(_NODES[k] - others)
        Lk = np.prod(xi[:, None] - others[None, :], axis=1) / denom
        out += Lk[:, None] * nodes[j * _M + k]
    return out if out.shape[0] > 1 else out[0]


class _System:
    """Assembles residual and sparse Jacobian of the collocation system.

    Equation layout: 3*N*m collocation rows (scaled by the interval
    length), 3 periodicity rows, 1 integral phase row, then any border
    rows.  Unknowns: 3*(N*m+1) node values followed by the scalars named
    in `free` ('T', 'A' or 'gamma').
    """

    def __init__(self, mesh, free=("T",), n_border=0):
        self.mesh = np.asarray(mesh, dtype=float)
        self.N = len(self.mesh) - 1
        self.h = np.diff(self.mesh)
        self.M = self.N * _M + 1
        self.free = tuple(free)
        self.n_unknowns = 3 * self.M + len(self.free)
        self.n_rows = 3 * self.N * _M + 4 + n_border
        N, m = self.N, _M

        ji = np.arange(N * m).reshape(N, m)
        r3 = np.arange(3)
        self._rows_cu = np.broadcast_to(
            3 * ji[:, :, None, None, None] + r3[None, None, None, :, None],
            (N, m, m + 1, 3, 3)).ravel()
        node_of = (np.arange(N)[:, None, None] * m
                   + np.arange(m + 1)[None, None, :])
        self._cols_cu = np.broadcast_to(
            3 * node_of[:, :, :, None, None]
            + r3[None, None, None, None, :],
            (N, m, m + 1, 3, 3)).ravel()
        self._rows_sc = np.broadcast_to(
            3 * ji[:, :, None] + r3[None, None, :], (N, m, 3)).ravel()

    def interior(self, nodes):
        """States at the Gauss points, shape (N, m, 3)."""
        return np.einsum("ik,nkc->nic", _P, _gather(nodes, self.N))

    def make_ref(self, nodes, T, p):
        """Phase-condition reference: du/dtau of (nodes, T) at Gauss points."""
        Ug = self.interior(nodes)
        return {"Ug": Ug, "udot": T * _f_many(Ug, p),
                "w_h": self.h[:, None] * _W[None, :]}

    def residual(self, nodes, T, p, ref, border=()):
        Ug = self.interior(nodes)
        Rc = (np.einsum("ik,nkc->nic", _D, _gather(nodes, self.N))
              - (self.h[:, None, None] * T) * _f_many(Ug, p))
        parts = [Rc.ravel(), nodes[-1] - nodes[0],
                 [np.sum(ref["w_h"][:, :, None]
                         * (Ug - ref["Ug"]) * ref["udot"])]]
        for _, _, res in border:
            parts.append([res])
        return np.concatenate([np.atleast_1d(np.asarray(x, dtype=float))
                               for x in parts])

    def jac(self, nodes, T, p, ref, border=()):
        N, m = self.N, _M
        Ug = self.interior(nodes)
        F = _f_many(Ug, p)
        Df = _df_many(Ug, p)
        eye = np.eye(3)
        vals_cu = (_D[None, :, :, None, None] * eye[None, None, None, :, :]
                   - (self.h[:, None, None, None, None] * T)
                   * _P[None, :, :, None, None] * Df[:, :, None, :, :])
        rows = [self._rows_cu]
        cols = [self._cols_cu]
        vals = [vals_cu.ravel()]

        col0 = 3 * self.M
        for s, name in enumerate(self.free):
            if name == "T":
                dcol = -self.h[:, None, None] * F
            else:
                dcol = (-self.h[:, None, None] * T
                        * _dfdpar_many(Ug, p, name))
            rows.append(self._rows_sc)
            cols.append(np.full(N * m * 3, col0 + s))
            vals.append(dcol.ravel())

        r0 = 3 * N * m
        rows.append(np.repeat(np.arange(r0, r0 + 3), 2))
        cols.append(np.column_stack(
            [3 * (self.M - 1) + np.arange(3), np.arange(3)]).ravel())
        vals.append(np.tile([1.0, -1.0], 3))

        coeff = np.einsum("ni,ik,nic->nkc", ref["w_h"], _P, ref["udot"])
        phase = np.zeros((self.M, 3))
        for j in range(N):
            phase[j * m:j * m + m + 1] += coeff[j]
        rows.append(np.full(3 * self.M, r0 + 3))
        cols.append(np.arange(3 * self.M))
        vals.append(phase.ravel())

        r = r0 + 4
        for row_u, row_s, _ in border:
            rows.append(np.full(3 * self.M + len(row_s), r))
            cols.append(np.arange(3 * self.M + len(row_s)))
            vals.append(np.concatenate([np.asarray(row_u, dtype=float),
                                        np.asarray(row_s, dtype=float)]))
            r += 1

        A = coo_matrix(
            (np.concatenate(vals),
             (np.concatenate(rows).astype(np.int64),
              np.concatenate(cols).astype(np.int64))),
            shape=(self.n_rows, self.n_unknowns))
        return A.tocsc()


def _apply_scalars(T, p, free, delta):
    extra = {}
    for name, d in zip(free, delta):
        if name == "T":
            T = T + d
        else:
            extra[name] = getattr(p, name) + d
    if extra:
        p = p.with_(**extra)
    return T, p


def solve_bvp(nodes, T, p, mesh, free=("T",), ref=None, border=None,
              tol=1e-9, max_iter=20):
    """Damped Newton on the collocation system.

    border: callable(nodes, T, p) -> list of (row_u, row_scalars,
    residual) rows appended below the phase condition; one is needed per
    free scalar beyond the first.  Returns (nodes, T, p, residual_norm,
    n_iter); raises NoOrbitError when Newton stalls or runs out.
    """
    nodes = np.array(nodes, dtype=float)
    mesh = np.asarray(mesh, dtype=float)
    rows = border(nodes, T, p) if border else ()
    sys_ = _System(mesh, free=free, n_border=len(rows))
    if ref is None:
        ref = sys_.make_ref(nodes, T, p)

    R = sys_.residual(nodes, T, p, ref, rows)
    rnorm = np.abs(R).max()
    for it in range(max_iter):
        if rnorm < tol:
            return nodes, T, p, rnorm, it
        J = sys_.jac(nodes, T, p, ref, rows)
        try:
            step = splu(J).solve(R)
        except RuntimeError as exc:
            raise NoOrbitError(f"singular collocation system: {exc}") from exc
        lam = 1.0
        for _ in range(9):
            nd = nodes - lam * step[:3 * sys_.M].reshape(-1, 3)
            try:
                TT, pp = _apply_scalars(T, p, free,
                                        -lam * step[3 * sys_.M:])
            except ValueError:
                lam *= 0.5
                continue
            if TT <= 0:
                lam *= 0.5
                continue
            rows_new = border(nd, TT, pp) if border else ()
            R_new = sys_.residual(nd, TT, pp, ref, rows_new)
            nnew = np.abs(R_new).max()
            if nnew < rnorm * (1.0 - 0.1 * lam) or nnew < tol:
                nodes, T, p = nd, TT, pp
                R, rows, rnorm = R_new, rows_new, nnew
                break
            lam *= 0.5
        else:
            raise NoOrbitError(
                f"damped Newton stalled at residual {rnorm:.2e}")
    if rnorm < tol:
        return nodes, T, p, rnorm, max_iter
    raise NoOrbitError(
        f"no convergence after {max_iter} iterations (residual {rnorm:.2e})")


def _arclength_mesh(po, N_new, blend=0.2):
    """Breakpoints equidistributing derivative arclength (blended uniform)."""
    sys_ = _System(po.mesh)
    Ug = sys_.interior(po.nodes)
    speed = np.linalg.norm(_f_many(Ug, po.params), axis=-1) * po.T
    arc_per = (sys_.h[:, None] * _W[None, :] * speed).sum(axis=1)
    cum = np.concatenate([[0.0], np.cumsum(arc_per)])
    if cum[-1] <= 0:
        return np.linspace(0.0, 1.0, N_new + 1)
    cum = cum / cum[-1] * (1.0 - blend) + po.mesh * blend
    targets = np.linspace(0.0, 1.0, N_new + 1)
    return np.interp(targets, cum, po.mesh)


def remesh(po, N_new=None, blend=0.2):
    """Redistribute the mesh by derivative arclength and resample onto it."""
    N_new = po.n_intervals if N_new is None else N_new
    mesh = _arclength_mesh(po, N_new, blend)
    nodes = po.eval(_rep_taus(mesh))
    return _dc_replace(po, mesh=mesh, nodes=nodes)


def _condense(h_j, T, Df_j):
    """Condense one interval of the variational collocation system.

    Returns W (3m x 3) such that the variational solution at the m
    representation points past the interval start equals W @ v_start;
    the last three rows are the interval transition matrix.
    """
    m = _M
    A = np.zeros((3 * m, 3 * m))
    B = np.zeros((3 * m, 3))
    for i in range(m):
        for k in range(m + 1):
            blk = _D[i, k] * np.eye(3) - h_j * T * _P[i, k] * Df_j[i]
            if k == 0:
                B[3 * i:3 * i + 3] = -blk
            else:
                A[3 * i:3 * i + 3, 3 * (k - 1):3 * k] = blk
    return np.linalg.solve(A, B)


def _monodromy(po):
    """Monodromy matrix by per-interval condensation of the variational
    collocation system, with running rescaling of the product.

    Returns (matrix, log_scale, log_det) so that the true monodromy is
    matrix * exp(log_scale) and its determinant exp(log_det), or
    (None, reason, None) when a block is singular.  The determinant is
    accumulated per interval in the log domain because for long orbits
    the two contracting multipliers underflow any direct product.
    """
    sys_ = _System(po.mesh)
    Df = _df_many(sys_.interior(po.nodes), po.params)
    Mono = np.eye(3)
    log_scale = 0.0
    log_det = 0.0
    for j in range(sys_.N):
        try:
            W = _condense(sys_.h[j], po.T, Df[j])
        except np.linalg.LinAlgError:
            return None, "singular variational block", None
        Phi = W[-3:]
        Mono = Phi @ Mono
        log_det += np.linalg.slogdet(Phi)[1]
        s = np.abs(Mono).max()
        if s > 1e100 or (0.0 < s < 1e-100):
            Mono /= s
            log_scale += np.log(s)
    return Mono, log_scale, log_det


def floquet_multipliers(po):
    """Floquet multipliers of a converged orbit.

    Returns (multipliers sorted by descending modulus, note).  The trivial
    multiplier doubles as an a-posteriori error indicator: when the
    computed value strays from 1 by more than the gate, the whole set is
    reported as None with the reason, rather than as silently wrong
    numbers.  Extremely long periods are refused outright.
    """
    if po.T > _T_MULTIPLIER_CAP:
        return None, f"period {po.T:.6g} above multiplier cap"
    Mono, log_scale, _ = _monodromy(po)
    if Mono is None:
        return None, log_scale
    with np.errstate(over="ignore"):
        mults = np.linalg.eigvals(Mono) * np.exp(log_scale)
    if not np.all(np.isfinite(mults)):
        return None, "multiplier magnitude overflow"
    err = np.abs(mults - 1.0).min()
    if err > _TRIVIAL_GATE:
        return None, f"trivial multiplier error {err:.2e} above gate"
    order = np.argsort(-np.abs(mults))
    return mults[order], ""


def fold_multiplier(po):
    """The nontrivial multiplier nearest 1, evaluated stably at folds.

    At a saddle-node of periodic orbits the monodromy has a defective
    double eigenvalue at 1, and raw eigenvalues split from it like the
    square root of the discretization error.  The eigenvalue sum has no
    such amplification, so the fold multiplier is recovered from the
    trace after removing the small third multiplier and the trivial one
    at its exact value.
    """
    Mono, log_scale, _ = _monodromy(po)
    if Mono is None:
        raise NoOrbitError(f"monodromy unavailable: {log_scale}")
    scale = np.exp(log_scale)
    mults = np.linalg.eigvals(Mono) * scale
    third = mults[np.argmin(np.abs(mults))]
    return complex(np.trace(Mono) * scale - 1.0 - third)


def trace_integral(po):
    """Integral of trace(Df) along the orbit over one period.

    The multiplier product equals exp of this; comparing the two in log
    space is the standard consistency check on the monodromy.
    """
    sys_ = _System(po.mesh)
    Df = _df_many(sys_.interior(po.nodes), po.params)
    tr = np.trace(Df, axis1=-2, axis2=-1)
    return po.T * float(np.sum(sys_.h[:, None] * _W[None, :] * tr))


def multiplier_product_log(po):
    """Log of the product of all Floquet multipliers, accumulated in the
    log domain so it stays finite for long strongly contracting orbits.
    Equals trace_integral(po) up to discretization error."""
    Mono, log_scale, log_det = _monodromy(po)
    if Mono is None:
        raise NoOrbitError(f"monodromy unavailable: {log_scale}")
    return float(log_det)


def fold_null_vector(po):
    """Null vector of the square orbit Jacobian at a fold orbit.

    The unknowns of a plain orbit solve are the nodes and the period;
    their square Jacobian (collocation, periodicity, phase) goes singular
    exactly where the branch folds in the continuation parameter.  Its
    kernel vector (v, vT) is what the bordered fold system tracks.  The
    flow direction is not in this kernel, it violates the phase row, so
    the kernel is simple at a generic fold and inverse iteration, which
    thrives on near-singularity, recovers it.  Returns (v, vT) scaled to
    unit combined norm.
    """
    sys_ = _System(po.mesh, free=("T",))
    ref = sys_.make_ref(po.nodes, po.T, po.params)
    J = sys_.jac(po.nodes, po.T, po.params, ref)
    try:
        lu = splu(J)
    except RuntimeError as exc:
        raise NoOrbitError(
            f"orbit Jacobian factorization failed: {exc}") from exc
    rng = np.random.default_rng(12345)
    x = rng.standard_normal(3 * sys_.M + 1)
    x /= np.linalg.norm(x)
    for _ in range(3):
        x = lu.solve(x)
        nx = np.linalg.norm(x)
        if not np.isfinite(nx) or nx == 0.0:
            raise NoOrbitError("inverse iteration for the fold vector "
                               "diverged")
        x /= nx
    v = x[:3 * sys_.M].reshape(-1, 3)
    vT = float(x[-1])
    Vg = sys_.interior(v)
    scale = np.sqrt(np.sum(sys_.h[:, None, None] * _W[None, :, None]
                           * Vg * Vg) + vT * vT)
    return v / scale, vT / scale


class _FoldSystem:
    """Bordered collocation system pinning a fold of periodic orbits.

    Couples the orbit equations for u with the linearized equations for
    a null vector (v, vT) of the square orbit Jacobian: v obeys the
    variational equations driven by vT times the vector field, closes
    periodically, and is orthogonal to the phase functional.  Such a
    null vector exists exactly at folds of the orbit branch, so every
    converged point is a saddle-node of periodic orbits by construction.
    Unknowns: u nodes, v nodes, T, vT, A, gamma.  Rows: the u system,
    the v system, a normalization of (v, vT), and one caller-supplied
    border row (a parameter pin or a pseudo-arclength plane).
    """

    def __init__(self, mesh):
        self.sys = _System(mesh)
        self.N, self.M, self.h = self.sys.N, self.sys.M, self.sys.h
        self.n = 6 * self.M + 4
        self.r_v = 3 * self.N * _M + 4    # first row of the v block

    def split(self, x):
        M = self.M
        return (x[:3 * M].reshape(-1, 3), x[3 * M:6 * M].reshape(-1, 3),
                x[6 * M], x[6 * M + 1], x[6 * M + 2], x[6 * M + 3])

    def residual(self, u, v, T, vT, p, ref, vref, brow):
        sy = self.sys
        Ug, Vg = sy.interior(u), sy.interior(v)
        h3 = self.h[:, None, None]
        F = _f_many(Ug, p)
        Rcu = (np.einsum("ik,nkc->nic", _D, _gather(u, self.N))
               - (h3 * T) * F)
        Rcv = (np.einsum("ik,nkc->nic", _D, _gather(v, self.N))
               - (h3 * T) * np.einsum("nijk,nik->nij",
                                      _df_many(Ug, p), Vg)
               - (h3 * vT) * F)
        phase_u = np.sum(ref["w_h"][:, :, None] * (Ug - ref["Ug"])
                         * ref["udot"])
        phase_v = np.sum(ref["w_h"][:, :, None] * Vg * ref["udot"])
        norm = (np.sum(ref["w_h"][:, :, None] * Vg * vref["Vg"])
                + vT * vref["vT"] - 1.0)
        parts = [Rcu.ravel(), u[-1] - u[0], [phase_u],
                 Rcv.ravel(), v[-1] - v[0], [phase_v], [norm], [brow[1]]]
        return np.concatenate([np.atleast_1d(np.asarray(x, dtype=float))
                               for x in parts])

    def jac(self, u, v, T, vT, p, ref, vref, brow):
        sy, N, m, M = self.sys, self.N, _M, self.M
        Ug, Vg = sy.interior(u), sy.interior(v)
        F = _f_many(Ug, p)
        Df = _df_many(Ug, p)
        DfV = np.einsum("nijk,nik->nij", Df, Vg)
        eye = np.eye(3)
        hT = self.h[:, None, None, None, None] * T
        hvT = self.h[:, None, None, None, None] * vT
        P5 = _P[None, :, :, None, None]
        base = (_D[None, :, :, None, None] * eye[None, None, None, :, :]
                - hT * P5 * Df[:, :, None, :, :])
        dv_du = (-hT * P5 * _d2f_dir(Vg, p)[:, :, None, :, :]
                 - hvT * P5 * Df[:, :, None, :, :])

        rv = self.r_v
        rows = [sy._rows_cu, sy._rows_cu + rv, sy._rows_cu + rv]
        cols = [sy._cols_cu, sy._cols_cu + 3 * M, sy._cols_cu]
        vals = [base.ravel(), base.ravel(), dv_du.ravel()]

        h3 = self.h[:, None, None]
        cT, cvT, cA, cG = 6 * M, 6 * M + 1, 6 * M + 2, 6 * M + 3
        fA = _dfdpar_many(Ug, p, "A")
        fG = _dfdpar_many(Ug, p, "gamma")
        scalar_blocks = (
            (sy._rows_sc, cT, -h3 * F),
            (sy._rows_sc, cA, -h3 * T * fA),
            (sy._rows_sc, cG, -h3 * T * fG),
            (sy._rows_sc + rv, cT, -h3 * DfV),
            (sy._rows_sc + rv, cvT, -h3 * F),
            (sy._rows_sc + rv, cA, -h3 * vT * fA),
            (sy._rows_sc + rv, cG,
             -h3 * (T * _djac_par_dir(Ug, Vg, p, "gamma") + vT * fG)),
        )
        for rr, col, dcol in scalar_blocks:
            rows.append(rr)
            cols.append(np.full(N * m * 3, col))
            vals.append(dcol.ravel())

        for r0, c0 in ((3 * N * m, 0), (rv + 3 * N * m, 3 * M)):
            rows.append(np.repeat(np.arange(r0, r0 + 3), 2))
            cols.append(np.column_stack(
                [c0 + 3 * (M - 1) + np.arange(3),
                 c0 + np.arange(3)]).ravel())
            vals.append(np.tile([1.0, -1.0], 3))

        for r_row, c0, weight in (
                (3 * N * m + 3, 0, ref["udot"]),
                (rv + 3 * N * m + 3, 3 * M, ref["udot"]),
                (rv + 3 * N * m + 4, 3 * M, vref["Vg"])):
            coeff = np.einsum("ni,ik,nic->nkc", ref["w_h"], _P, weight)
            spread = np.zeros((M, 3))
            for j in range(N):
                spread[j * m:j * m + m + 1] += coeff[j]
            rows.append(np.full(3 * M, r_row))
            cols.append(c0 + np.arange(3 * M))
            vals.append(spread.ravel())
        rows.append(np.asarray([rv + 3 * N * m + 4]))
        cols.append(np.asarray([cvT]))
        vals.append(np.asarray([vref["vT"]]))

        rows.append(np.full(self.n, rv + 3 * N * m + 5))
        cols.append(np.arange(self.n))
        vals.append(np.asarray(brow[0], dtype=float))

        A = coo_matrix(
            (np.concatenate(vals),
             (np.concatenate(rows).astype(np.int64),
              np.concatenate(cols).astype(np.int64))),
            shape=(self.n, self.n))
        return A.tocsc()


def solve_fold_bvp(u, v, T, vT, p, mesh, border, ref=None, vref=None,
                   tol=1e-9, max_iter=25):
    """Damped Newton on the bordered fold system.

    border: callable(u, v, T, vT, p) -> (full_row, residual), one row
    over all 6M+4 unknowns closing the system.  vref: (v_nodes, vT)
    pair referencing the normalization row, defaulting to the initial
    null vector.  Returns (u, v, T, vT, p, residual_norm, n_iter);
    raises NoOrbitError on stall.
    """
    u = np.array(u, dtype=float)
    v = np.array(v, dtype=float)
    fs = _FoldSystem(np.asarray(mesh, dtype=float))
    if ref is None:
        ref = fs.sys.make_ref(u, T, p)
    if vref is None:
        vref = (v, vT)
    vref = {"Vg": fs.sys.interior(np.asarray(vref[0], dtype=float)),
            "vT": float(vref[1])}

    brow = border(u, v, T, vT, p)
    R = fs.residual(u, v, T, vT, p, ref, vref, brow)
    rnorm = np.abs(R).max()
    for it in range(max_iter):
        if rnorm < tol:
            return u, v, T, vT, p, rnorm, it
        J = fs.jac(u, v, T, vT, p, ref, vref, brow)
        try:
            step = splu(J).solve(R)
        except RuntimeError as exc:
            raise NoOrbitError(f"singular fold system: {exc}") from exc
        M3 = 3 * fs.M
        lam = 1.0
        for _ in range(9):
            un = u - lam * step[:M3].reshape(-1, 3)
            vn = v - lam * step[M3:2 * M3].reshape(-1, 3)
            TT = T - lam * step[2 * M3]
            wT = vT - lam * step[2 * M3 + 1]
            if TT <= 0:
                lam *= 0.5
                continue
            try:
                pp = p.with_(A=p.A - lam * step[2 * M3 + 2],
                             gamma=p.gamma - lam * step[2 * M3 + 3])
            except ValueError:
                lam *= 0.5
                continue
            brow_new = border(un, vn, TT, wT, pp)
            R_new = fs.residual(un, vn, TT, wT, pp, ref, vref, brow_new)
            nnew = np.abs(R_new).max()
            if nnew < rnorm * (1.0 - 0.1 * lam) or nnew < tol:
                u, v, T, vT, p = un, vn, TT, wT, pp
                R, brow, rnorm = R_new, brow_new, nnew
                break
            lam *= 0.5
        else:
            raise NoOrbitError(
                f"fold system Newton stalled at residual {rnorm:.2e}")
    if rnorm < tol:
        return u, v, T, vT, p, rnorm, max_iter
    raise NoOrbitError(
        f"fold system: no convergence after {max_iter} iterations "
        f"(residual {rnorm:.2e})")


def _classify(po):
    """Attach multipliers and the attracting/saddle verdict."""
    mults, note = floquet_multipliers(po)
    if mults is None:
        return _dc_replace(po, multipliers=None, multiplier_note=note,
                           stability=None)
    trivial = int(np.argmin(np.abs(mults - 1.0)))
    nontrivial = [z for i, z in enumerate(mults) if i != trivial]
    stab = ("attracting" if all(abs(z) < 1.0 for z in nontrivial)
            else "saddle")
    return _dc_replace(po, multipliers=mults, multiplier_note=note,
                       stability=stab)


def solve_po(seed, p, N=None, tol=1e-9, max_iter=20, adapt=True,
             min_N=40, fixed_T=None, free_param="A"):
    """Converge a periodic-orbit guess to collocation residual < tol.

    seed: a PeriodicOrbit, a (mesh, nodes, T) triple, or (states, T)
    where states sample one loop uniformly in time.  With fixed_T set the
    period is pinned and free_param is released instead (the fixed-period
    approximation used when tracking near-homoclinic orbits).
    """
    if isinstance(seed, PeriodicOrbit):
        mesh, nodes, T = seed.mesh, seed.nodes, seed.T
    elif len(seed) == 3:
        mesh, nodes, T = seed
        mesh = np.asarray(mesh, dtype=float)
        nodes = np.asarray(nodes, dtype=float)
    else:
        states, T = seed
        states = np.asarray(states, dtype=float)
        Nn = N if N is not None else max(min_N, (len(states) - 1) // _M)
        mesh = np.linspace(0.0, 1.0, Nn + 1)
        src = np.linspace(0.0, 1.0, len(states))
        taus = _rep_taus(mesh)
        nodes = np.column_stack([np.interp(taus, src, states[:, c])
                                 for c in range(3)])
    if N is not None and len(mesh) - 1 != N:
        tmp = PeriodicOrbit(mesh=mesh, nodes=nodes, T=T, params=p,
                            residual=np.inf)
        tmp = remesh(tmp, N)
        mesh, nodes = tmp.mesh, tmp.nodes

    free = ("T",) if fixed_T is None else (free_param,)
    if fixed_T is not None:
        T = fixed_T
    nodes, T, p, rnorm, _ = solve_bvp(nodes, T, p, mesh, free=free, tol=tol,
                                      max_iter=max_iter)
    po = PeriodicOrbit(mesh=mesh, nodes=nodes, T=T, params=p, residual=rnorm)
    if adapt:
        po2 = remesh(po)
        try:
            nodes, T, p2, rnorm, _ = solve_bvp(
                po2.nodes, po2.T, po2.params, po2.mesh, free=free, tol=tol,
                max_iter=max_iter)
            po = PeriodicOrbit(mesh=po2.mesh, nodes=nodes, T=T, params=p2,
                               residual=rnorm)
        except NoOrbitError:
            pass    # keep the unadapted solution
    return _classify(po)


def hopf_seed(A, sigma, B=5.8, a=1.8, eps=1e-2, N=40):
    """Ellipse seed in the critical eigenplane of q at the Hopf point.

    Returns (mesh, nodes, T_guess, params_at_hopf).  The loop is traced
    with the rotation sense of the linear flow, so tau runs the same way
    time does.
    """
    g = hopf_gamma(A, sigma, B, a)
    if g <= 0:
        raise NoOrbitError(f"no physical Hopf value at A={A}, sigma={sigma}")
    p = Params(A=A, gamma=g, sigma=sigma, B=B, a=a)
    q = [e for e in interior_equilibria(p) if e.role == "q"][0]
    lams, vecs = np.linalg.eig(jacobian(q.point, p))
    i = int(np.argmax(lams.imag))
    om = lams.imag[i]
    if om <= 0:
        raise NoOrbitError("no oscillatory pair at the Hopf point")
    v = vecs[:, i] / np.linalg.norm(vecs[:, i])
    mesh = np.linspace(0.0, 1.0, N + 1)
    taus = _rep_taus(mesh)
    loop = q.point[None, :] + eps * np.real(
        v[None, :] * np.exp(2j * np.pi * taus)[:, None])
    return mesh, loop, 2.0 * np.pi / om, p


def orbit_from_hopf(A, sigma, B=5.8, a=1.8, eps=5e-2, N=40):
    """Solve for the small orbit emerging at the Hopf point (A, gamma^H).

    Near the Hopf point the parameter-fixed collocation system is close
    to singular and Newton collapses onto the equilibrium (which solves
    every equation including the phase condition).  The first solve
    therefore pins the first-harmonic amplitude at eps and frees gamma;
    gamma lands on whichever side of H carries the family.
    """
    mesh, loop, T0, p_h = hopf_seed(A, sigma, B, a, eps, N)
    q = [e for e in interior_equilibria(p_h) if e.role == "q"][0]
    lams, vecs = np.linalg.eig(jacobian(q.point, p_h))
    i = int(np.argmax(lams.imag))
    vr = np.real(vecs[:, i] / np.linalg.norm(vecs[:, i]))

    sys_ = _System(mesh)
    h = np.diff(mesh)
    tau_g = mesh[:-1, None] + _RHO[None, :] * h[:, None]
    wcos = 2.0 * (h[:, None] * _W[None, :]) * np.cos(2.0 * np.pi * tau_g)
    # row over node unknowns (linear functional, independent of the iterate)
    coeff = np.einsum("ni,ik->nk", wcos, _P)            # (N, m+1)
    row = np.zeros((sys_.M, 3))
    for j in range(sys_.N):
        row[j * _M:j * _M + _M + 1] += coeff[j][:, None] * vr[None, :]
    target = eps * float(vr @ vr)

    def amp_row(nd, TT, pp):
        Ug = sys_.interior(nd)
        amp = np.sum(wcos[:, :, None] * (Ug - q.point) * vr[None, None, :])
        return [(row.ravel(), np.zeros(2), amp - target)]

    nodes, T, p_fin, rnorm, _ = solve_bvp(
        loop, T0, p_h, mesh, free=("T", "gamma"), border=amp_row)
    po = PeriodicOrbit(mesh=mesh, nodes=nodes, T=T, params=p_fin,
                       residual=rnorm)
    if po.amplitude < 0.1 * eps:
        raise NoOrbitError(
            f"Hopf orbit collapsed to the equilibrium at A={A}, "
            f"sigma={sigma}")
    return _classify(po)


def orbit_from_simulation(p, s0=None, N=None, budget=None, tol=1e-9):
    """Converge the attracting orbit found by forward simulation from s0.

    The seed mesh is adapted to the recorded loop before the solve:
    strongly pulsing orbits put nearly all state-space arclength into a
    brief pulse, and a uniform mesh cannot even represent the guess.
    """
    if s0 is None:
        s0 = (p.A * 0.9, 1.0, 1.0)
    aid = attractor_from(s0, p, budget=budget)
    if aid.kind != "periodic-orbit":
        raise NoOrbitError(f"simulation found {aid.kind}, not an orbit")
    if N is None:
        # long-period pulsing orbits need more intervals on the pulse
        N = int(np.clip(10.0 * np.sqrt(aid.period), 60, 400))
    tr = integrate(aid.point, p, aid.period, rtol=1e-10, atol=1e-12)
    taus = tr.t / tr.t[-1]
    arc = np.concatenate(
        [[0.0], np.cumsum(np.linalg.norm(np.diff(tr.y, axis=0), axis=1))])
    coord = 0.8 * arc / arc[-1] + 0.2 * taus
    mesh = np.interp(np.linspace(0.0, 1.0, N + 1), coord, taus)
    rep = _rep_taus(mesh)
    nodes = np.column_stack([np.interp(rep, taus, tr.y[:, c])
                             for c in range(3)])
    nodes[-1] = nodes[0]
    return solve_po((mesh, nodes, aid.period), p, tol=tol)


# ---------------------------------------------------------------- branches

@dataclass
class Branch:
    orbits: list
    param: str
    folds: list       # (param_value, PeriodicOrbit) at folds of the branch
    status: str       # target_reached | period_cap | step_collapse | max_steps

    @property
    def param_values(self):
        return np.array([getattr(o.params, self.param) for o in self.orbits])


def _weighted_tangent(prev, curr, param):
    du = (curr.nodes - prev.nodes).ravel()
    dT = curr.T - prev.T
    da = getattr(curr.params, param) - getattr(prev.params, param)
    v = np.concatenate([du / np.sqrt(du.size), [dT * _W_T], [da]])
    n = np.linalg.norm(v)
    return v / n if n > 0 else v


def _arclength_step(base, tangent, ds, param, tol):
    """One predictor-corrector step of weighted length ds along tangent."""
    M3 = base.nodes.size
    rootM = np.sqrt(M3)
    pred_nodes = base.nodes + ds * tangent[:M3].reshape(-1, 3) * rootM
    pred_T = base.T + ds * tangent[M3] / _W_T
    pred_a = getattr(base.params, param) + ds * tangent[M3 + 1]
    p_pred = base.params.with_(**{param: pred_a})

    def arc_row(nd, TT, pp):
        res = ((nd - base.nodes).ravel() @ tangent[:M3] / rootM
               + (TT - base.T) * _W_T * tangent[M3]
               + (getattr(pp, param) - getattr(base.params, param))
               * tangent[M3 + 1] - ds)
        return [(tangent[:M3] / rootM,
                 np.array([_W_T * tangent[M3], tangent[M3 + 1]]), res)]

    nd, TT, pp, rn, _ = solve_bvp(
        pred_nodes, pred_T, p_pred, base.mesh, free=("T", param),
        border=arc_row, tol=tol)
    return _classify(PeriodicOrbit(mesh=base.mesh, nodes=nd, T=TT,
                                   params=pp, residual=rn))


def _chord_pinned_solve(lo, hi, s, param, tol):
    """Solve an orbit pinned at fraction s along the chord lo -> hi, with
    both T and the parameter free.  Used by the fold refinement."""
    chord = (hi.nodes - lo.nodes).ravel()
    nc = np.linalg.norm(chord)
    if nc < 1e-14:
        return None
    chord = chord / nc
    x_s = (1.0 - s) * lo.nodes + s * hi.nodes
    T_s = (1.0 - s) * lo.T + s * hi.T
    a_s = ((1.0 - s) * getattr(lo.params, param)
           + s * getattr(hi.params, param))
    p_s = lo.params.with_(**{param: a_s})

    def pin_row(nd, TT, pp):
        return [(chord, np.zeros(2), (nd - x_s).ravel() @ chord)]

    try:
        nd, TT, pp, rn, _ = solve_bvp(x_s, T_s, p_s, lo.mesh,
                                      free=("T", param), border=pin_row,
                                      tol=tol)
    except NoOrbitError:
        return None
    return PeriodicOrbit(mesh=lo.mesh, nodes=nd, T=TT, params=pp,
                         residual=rn)


def _radial_step(po, r, param, tol):
    """Solve a neighbor orbit whose profile is expanded radially about its
    mean by the fraction r, with T and the parameter free.  Serves as the
    first continuation step when parameter stepping is degenerate."""
    center = po.nodes.mean(axis=0)
    w = po.nodes - center
    nw = np.linalg.norm(w)
    if nw < 1e-12:
        return None
    w_hat = (w / nw).ravel()
    target = (1.0 + r) * nw

    def pin_row(nd, TT, pp):
        return [(w_hat, np.zeros(2),
                 (nd - center).ravel() @ w_hat - target)]

    try:
        nd, TT, pp, rn, _ = solve_bvp(po.nodes + r * w, po.T, po.params,
                                      po.mesh, free=("T", param),
                                      border=pin_row, tol=tol)
    except NoOrbitError:
        return None
    cand = PeriodicOrbit(mesh=po.mesh, nodes=nd, T=TT, params=pp,
                         residual=rn)
    if cand.amplitude < 0.1 * po.amplitude:
        return None
    return cand


def _refine_fold(po_a, po_b, param, tol):
    """Locate a fold between two bracketing branch points.

    A first pass does successive parabolic interpolation on the parameter
    as a function of the chord coordinate s.  That pins the parameter to
    about 1e-8 but, the parameter being quadratic in s at the fold, still
    leaves the orbit measurably off along the branch.  A second pass runs
    a secant iteration on the fold multiplier, which crosses 1 linearly
    in s, and brings it to +1 at the level of the discretization error.

    Returns (param_value, orbit) or None when the refinement breaks down.
    """
    pts = [(0.0, getattr(po_a.params, param), po_a),
           (1.0, getattr(po_b.params, param), po_b)]
    mid = _chord_pinned_solve(po_a, po_b, 0.5, param, tol)
    if mid is None:
        return None
    pts.append((0.5, getattr(mid.params, param), mid))

    s_best, best = 0.5, mid
    for _ in range(30):
        pts.sort(key=lambda t: t[0])
        (s0, a0, _), (s1, a1, _), (s2, a2, _) = pts
        denom = (s1 - s0) * (a1 - a2) - (s1 - s2) * (a1 - a0)
        if abs(denom) < 1e-300:
            break
        s_new = s1 - 0.5 * ((s1 - s0) ** 2 * (a1 - a2)
                            - (s1 - s2) ** 2 * (a1 - a0)) / denom
        s_new = float(np.clip(s_new, -1.0, 2.0))
        if any(abs(s_new - s) < 1e-12 for s, _, _ in pts):
            break
        po_new = _chord_pinned_solve(po_a, po_b, s_new, param, tol)
        if po_new is None:
            break
        a_new = getattr(po_new.params, param)
        moved = abs(a_new - getattr(best.params, param))
        s_best, best = s_new, po_new
        pts.append((s_new, a_new, po_new))
        # keep the three samples closest to the newest estimate
        pts.sort(key=lambda t: abs(t[0] - s_new))
        pts = pts[:3]
        if moved < 1e-9:
            break

    if best.T <= _T_MULTIPLIER_CAP:
        polished = _polish_fold(po_a, po_b, s_best, param, tol)
        if polished is not None:
            best = polished
    return (getattr(best.params, param), _classify(best))


def _polish_fold(po_a, po_b, s_start, param, tol):
    """Secant iteration on the fold multiplier along the chord through
    the bracketing orbits, started from the parabolic estimate.  Works on
    a doubled mesh so the multiplier itself is trustworthy."""
    N2 = 2 * po_a.n_intervals
    try:
        lo = solve_po(remesh(po_a, N2), po_a.params, adapt=False, tol=tol)
        hi = solve_po(remesh(po_b, N2), po_b.params, adapt=False, tol=tol)
    except NoOrbitError:
        return None

    def gap(s):
        po_s = _chord_pinned_solve(lo, hi, s, param, tol)
        if po_s is None:
            return None, None
        try:
            g = fold_multiplier(po_s).real - 1.0
        except NoOrbitError:
            return None, None
        return g, po_s

    s1 = s_start
    g1, po1 = gap(s1)
    if g1 is None:
        return None
    best_g, best = abs(g1), po1
    s2 = s_start + 1e-2
    g2, po2 = gap(s2)
    if g2 is None:
        return None
    if abs(g2) < best_g:
        best_g, best = abs(g2), po2
    for _ in range(12):
        if g2 == g1 or abs(s2 - s1) < 1e-13:
            break
        s_new = s2 - g2 * (s2 - s1) / (g2 - g1)
        s_new = float(np.clip(s_new, -1.0, 2.0))
        g_new, po_new = gap(s_new)
        if g_new is None:
            break
        if abs(g_new) < best_g:
            best_g, best = abs(g_new), po_new
        s1, g1, s2, g2 = s2, g2, s_new, g_new
        if best_g < 1e-9:
            break
    return best


def continue_po(po, param="A", direction=+1, ds0=5e-3, ds_min=1e-7,
                ds_max=0.1, max_steps=600, target=None, period_cap=1e3,
                tol=1e-9, detect_folds=True, param_range=None,
                remesh_every=25):
    """Pseudo-arclength continuation of a periodic orbit in one parameter.

    Stops when the parameter reaches target, when the period exceeds
    period_cap (near-homoclinic), on step collapse, or after max_steps.
    Folds in the continuation parameter are detected from the sign change
    of the parameter increment and refined to about 1e-8; each yields a
    (value, orbit) pair in the returned Branch.
    """
    if po.residual > tol * 10:
        po = solve_po(po, po.params, tol=tol, adapt=False)
    orbits = [po]
    folds = []
    status = "max_steps"

    a0 = getattr(po.params, param)
    # first neighbor by a plain parameter step, kept small relative to the
    # parameter's own scale so gamma-continuation is not kicked too hard
    da0 = direction * min(ds0, 0.02 * max(abs(a0), 1e-3))
    first = None
    for _ in range(3):
        p1 = po.params.with_(**{param: a0 + da0})
        try:
            nodes, T, p1, rnorm, _ = solve_bvp(po.nodes, po.T, p1, po.mesh,
                                               tol=tol)
            cand = PeriodicOrbit(mesh=po.mesh, nodes=nodes, T=T, params=p1,
                                 residual=rnorm)
            # a collapse onto the equilibrium (which satisfies the phase
            # condition exactly) means the step went past a fold
            if cand.amplitude > 0.1 * po.amplitude:
                first = cand
                break
        except NoOrbitError:
            pass
        da0 *= 0.25
    if first is None:
        # parameter stepping fails where amplitude varies like sqrt of
        # the parameter (orbits fresh off a Hopf); grow the orbit
        # radially instead and let the parameter follow
        for r in (0.05, -0.05, 0.2, -0.2):
            cand = _radial_step(po, r, param, tol)
            if cand is None:
                continue
            da = getattr(cand.params, param) - a0
            if first is None:
                first = cand
            if da * direction > 0:
                first = cand
                break
    if first is None:
        return Branch(orbits=orbits, param=param, folds=folds,
                      status="step_collapse")
    orbits.append(_classify(first))
    ds = ds0

    for _ in range(max_steps):
        prev, curr = orbits[-2], orbits[-1]
        tangent = _weighted_tangent(prev, curr, param)
        try:
            nxt = _arclength_step(curr, tangent, ds, param, tol)
            # reject jumps: phase-slipped copies of the orbit satisfy the
            # corrector equations but land far away or behind the tangent
            move = np.concatenate(
                [(nxt.nodes - curr.nodes).ravel()
                 / np.sqrt(curr.nodes.size),
                 [(nxt.T - curr.T) * _W_T],
                 [getattr(nxt.params, param) - getattr(curr.params, param)]])
            if (np.linalg.norm(move) > 3.0 * ds
                    or _weighted_tangent(curr, nxt, param) @ tangent <= 0
                    or nxt.amplitude < 0.1 * curr.amplitude):
                raise NoOrbitError("step rejected: branch jump")
        except NoOrbitError:
            ds *= 0.5
            if ds < ds_min:
                status = "step_collapse"
                break
            continue
        ds = min(ds * 1.3, ds_max)

        a_prev = getattr(curr.params, param)
        a_next = getattr(nxt.params, param)
        if detect_folds:
            d1 = a_prev - getattr(prev.params, param)
            d2 = a_next - a_prev
            # increments at solver noise level are not sign changes
            if d1 * d2 < 0 and min(abs(d1), abs(d2)) \
                    > 1e-7 * (1.0 + abs(a_prev)):
                fold = _refine_fold(prev, nxt, param, tol)
                if fold is not None and not any(
                        abs(fold[0] - v) < 1e-6 * (1.0 + abs(v))
                        for v, _ in folds):
                    folds.append(fold)
        orbits.append(nxt)

        if nxt.T > period_cap:
            status = "period_cap"
            break
        if target is not None and min(a_prev, a_next) <= target \
                <= max(a_prev, a_next):
            status = "target_reached"
            # land exactly on the requested parameter value
            try:
                lp = nxt.params.with_(**{param: target})
                nd, TT, lp, rn, _ = solve_bvp(nxt.nodes, nxt.T, lp,
                                              nxt.mesh, tol=tol)
                orbits.append(_classify(PeriodicOrbit(
                    mesh=nxt.mesh, nodes=nd, T=TT, params=lp, residual=rn)))
            except NoOrbitError:
                pass
            break
        if param_range is not None and not (
                param_range[0] <= a_next <= param_range[1]):
            status = "target_reached"
            break
        if remesh_every and len(orbits) % remesh_every == 0:
            try:
                refreshed = _classify(
                    solve_po(remesh(nxt), nxt.params, adapt=False, tol=tol))
                # keep the secant consistent: resample the previous point
                # onto the refreshed mesh as well
                prev_rs = _dc_replace(
                    orbits[-2], mesh=refreshed.mesh,
                    nodes=orbits[-2].eval(_rep_taus(refreshed.mesh)))
                orbits[-2] = prev_rs
                orbits[-1] = refreshed
            except NoOrbitError:
                pass

    return Branch(orbits=orbits, param=param, folds=folds, status=status)
