"""Bifurcation curves in the (A, gamma) plane at fixed sigma.

S, T and H come from closed forms in analytic.  The homoclinic curve L
is tracked as a periodic orbit of fixed large period T* (the
constant-period approximation) under two-parameter pseudo-arclength
continuation.  The fold-of-cycles curve D rides the bordered fold system
from periodic, so a unit nontrivial multiplier holds by construction.
SQ is the neutral-saddle locus of the equilibrium p, a root solve per
pump value.  Codimension-two points: BT delegates to the closed form,
GH is the sign change of the first Lyapunov coefficient along H, NH are
the saddle-quantity zeros along L (cross-checked against SQ crossings),
and cusps of D are folds of its parameter projection along arclength.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .analytic import (NoHopfError, bt_locus, hopf_A, hopf_gamma,
                       interior_equilibria, saddlenode_A)
from .model import Params, jacobian
from .periodic import (NoOrbitError, PeriodicOrbit, continue_po,
                       fold_multiplier, fold_null_vector, orbit_from_hopf,
                       remesh, solve_bvp, solve_fold_bvp, solve_po)
from .periodic import _eval_nodes, _rep_taus

__all__ = [
    "BifurcationCurve",
    "Codim2Point",
    "curve_S",
    "curve_T",
    "curve_H",
    "curve_L",
    "curve_D",
    "curve_SQ",
    "saddle_quantity",
    "lyapunov_l1",
    "detect_BT",
    "detect_GH",
    "nh_points",
    "cusp_points",
    "curve_crossings",
]

_GAMMA_MAX = 0.5      # scan ceiling; reported structure sits below 0.4
_EMPTY = np.zeros((0, 2))


@dataclass
class BifurcationCurve:
    """An ordered polyline in the (A, gamma) plane at fixed sigma.

    aux holds per-point arrays (same length as points) and scalar
    diagnostics; reason explains an empty or truncated curve.
    """
    kind: str                     # S | T | H | L | D | SQ
    sigma: float
    points: np.ndarray            # (n, 2) columns A, gamma
    aux: dict = field(default_factory=dict)
    reason: str = ""

    def __len__(self):
        return len(self.points)

    @property
    def empty(self):
        return len(self.points) == 0

    @property
    def A(self):
        return self.points[:, 0]

    @property
    def gamma(self):
        return self.points[:, 1]


@dataclass
class Codim2Point:
    kind: str                     # BT | GH | C | NH
    sigma: float
    A: float
    gamma: float
    curve: str = ""               # host curve kind
    info: dict = field(default_factory=dict)

    @property
    def location(self):
        return np.array([self.A, self.gamma])


def _vertical(A, gamma_max, n):
    gam = np.linspace(0.0, gamma_max, n)
    return np.column_stack([np.full(n, A), gam])


def curve_S(sigma, B=5.8, a=1.8, gamma_max=_GAMMA_MAX, n=101):
    """Saddle-node-of-equilibria line: vertical at A_S(sigma).

    Empty past the tangency with T (the fold happens at negative
    intensity there and stops being physically relevant).
    """
    if not 0.0 < sigma < a:
        return BifurcationCurve("S", sigma, _EMPTY,
                                reason=f"no fold of equilibria for "
                                       f"sigma={sigma} outside (0, {a})")
    A_S, I_fold = saddlenode_A(sigma, B, a)
    if I_fold < 0.0:
        return BifurcationCurve(
            "S", sigma, _EMPTY, aux={"A_S": A_S, "I_fold": I_fold},
            reason="fold intensity negative past sigma_ST, "
                   "no longer physically relevant")
    return BifurcationCurve("S", sigma, _vertical(A_S, gamma_max, n),
                            aux={"A_S": A_S, "I_fold": I_fold,
                                 "physical": True})


def curve_T(sigma, B=5.8, a=1.8, gamma_max=_GAMMA_MAX, n=101):
    """Transcritical line of the off state: vertical at A = B + 1."""
    return BifurcationCurve("T", sigma, _vertical(B + 1.0, gamma_max, n),
                            aux={"A_T": B + 1.0})


def _hopf_window(sigma, B, a):
    A_S = saddlenode_A(sigma, B, a)[0]
    A_end = a * B / sigma**3
    return A_S, A_end


def curve_H(sigma, B=5.8, a=1.8, n=200):
    """Hopf curve of the focus q, sampled from the closed form.

    Runs from the BT end on S down to the gamma = 0 endpoint at
    A = aB/sigma^3 (appended exactly).  aux stores the per-point
    spectral residual |Re| of the critical pair.
    """
    if not 0.0 < sigma < a:
        return BifurcationCurve("H", sigma, _EMPTY,
                                reason=f"no upper equilibrium branch for "
                                       f"sigma={sigma} outside (0, {a})")
    A_S, A_end = _hopf_window(sigma, B, a)
    if A_end <= A_S * (1.0 + 1e-12):
        return BifurcationCurve(
            "H", sigma, _EMPTY, aux={"A_end": A_end},
            reason="Hopf window empty: aB/sigma^3 <= A_S "
                   "(past the BT0 decay ratio)")
    As = A_S + (A_end - A_S) * np.linspace(1e-7, 1.0, n)
    pts = []
    re_err = []
    for A in As[:-1]:
        g = hopf_gamma(A, sigma, B, a)
        if g <= 0.0:
            continue
        p = Params(A=A, gamma=g, sigma=sigma, B=B, a=a)
        q = [e for e in interior_equilibria(p) if e.role == "q"][0]
        lam = q.spectrum
        pair = lam[np.argsort(-np.abs(lam.imag))[:2]]
        pts.append((A, g))
        re_err.append(np.abs(pair.real).max())
    pts.append((A_end, 0.0))
    re_err.append(0.0)
    return BifurcationCurve("H", sigma, np.asarray(pts),
                            aux={"re_err": np.asarray(re_err),
                                 "A_end": A_end,
                                 "gamma_head": pts[0][1]})


def saddle_quantity(eq):
    """Saddle quantity nu = lambda_u + Re(leading stable eigenvalue).

    Accepts an Equilibrium or a bare spectrum.  Requires exactly one
    eigenvalue in the open right half plane.
    """
    spec = getattr(eq, "spectrum", eq)
    lam = np.asarray(spec, dtype=complex)
    unstable = lam[lam.real > 0.0]
    if len(unstable) != 1:
        raise ValueError("saddle quantity needs exactly one unstable "
                         f"eigenvalue, got {len(unstable)} of {len(lam)}")
    stable = lam[lam.real <= 0.0]
    return float(unstable[0].real + stable.real.max())


def _nu(A, gamma, sigma, B, a):
    """Saddle quantity of the equilibrium p, or None where undefined."""
    try:
        p = Params(A=A, gamma=gamma, sigma=sigma, B=B, a=a)
    except ValueError:
        return None
    saddles = [e for e in interior_equilibria(p) if e.role == "p"]
    if not saddles:
        return None
    try:
        return saddle_quantity(saddles[0])
    except ValueError:
        return None


def _nu_rate(A, gamma, sigma, B, a):
    """(nu, slowest local rate at p), or (None, 0.0) without a saddle.

    The rate scaled by T* counts the e-folds of contraction toward the
    homoclinic available to the fixed-period approximation; points with
    few e-folds carry a visible truncation bias.
    """
    try:
        p = Params(A=A, gamma=gamma, sigma=sigma, B=B, a=a)
    except ValueError:
        return None, 0.0
    saddles = [e for e in interior_equilibria(p) if e.role == "p"]
    if not saddles:
        return None, 0.0
    lam = saddles[0].spectrum
    unstable = lam[lam.real > 0.0]
    if len(unstable) != 1:
        return None, 0.0
    lam_u = unstable.real.max()
    lam_s = abs(lam[lam.real <= 0.0].real.max())
    return float(lam_u - lam_s), float(min(lam_u, lam_s))


def curve_SQ(sigma, B=5.8, a=1.8, n=160, gamma_lo=1e-5,
             gamma_hi=_GAMMA_MAX):
    """Neutral-saddle locus nu(p) = 0, one gamma root solve per pump.

    Not a bifurcation curve; it matters through its crossings with L.
    Pumps with no sign change in the scan window leave gaps.
    """
    if not 0.0 < sigma < a:
        return BifurcationCurve("SQ", sigma, _EMPTY,
                                reason=f"no saddle branch for sigma={sigma}")
    A_S = saddlenode_A(sigma, B, a)[0]
    A_T = B + 1.0
    if A_T <= A_S:
        return BifurcationCurve("SQ", sigma, _EMPTY,
                                reason="saddle p exists nowhere: "
                                       "A_S beyond the transcritical line")
    span = A_T - A_S
    As = np.linspace(A_S + 1e-4 * span, A_T - 1e-6 * span, n)
    gs = np.geomspace(gamma_lo, gamma_hi, 48)
    pts = []
    resid = []
    for A in As:
        vals = [_nu(A, g, sigma, B, a) for g in gs]
        for v1, v2, g1, g2 in zip(vals, vals[1:], gs, gs[1:]):
            if v1 is None or v2 is None or v1 * v2 > 0.0:
                continue
            root = brentq(lambda g: _nu(A, g, sigma, B, a), g1, g2,
                          xtol=1e-13, rtol=1e-14)
            pts.append((A, root))
            resid.append(abs(_nu(A, root, sigma, B, a)))
    if not pts:
        return BifurcationCurve("SQ", sigma, _EMPTY,
                                reason="no neutral-saddle root in the "
                                       "gamma scan window")
    pts = np.asarray(pts)
    order = np.argsort(pts[:, 0])
    return BifurcationCurve("SQ", sigma, pts[order],
                            aux={"nu_resid": np.asarray(resid)[order]})


# ---------------------------------------------------------------------------
# step policy shared by the marching continuations


class _StepPolicy:
    """Initial 1e-3, range [1e-7, 1e-2], halve on failure, grow 1.3x
    after three straight successes."""

    def __init__(self, ds0=1e-3, ds_min=1e-7, ds_max=1e-2):
        self.ds = ds0
        self.ds_min = ds_min
        self.ds_max = ds_max
        self.streak = 0

    def success(self):
        self.streak += 1
        if self.streak >= 3:
            self.ds = min(self.ds * 1.3, self.ds_max)
            self.streak = 0

    def failure(self):
        self.ds *= 0.5
        self.streak = 0
        return self.ds >= self.ds_min


# ---------------------------------------------------------------------------
# homoclinic curve L


def _l_seed(sigma, T_star, g_bt, B, a):
    """Near-homoclinic orbit: ride the Hopf branch near BT out to a long
    period at fixed gamma."""
    g0 = 0.9 * g_bt
    A_h = hopf_A(g0, sigma, B, a)
    po = orbit_from_hopf(A_h, sigma, B, a, N=60)
    last = None
    for direction in (+1, -1):
        br = continue_po(po, param="A", direction=direction, ds0=2e-3,
                         max_steps=500, period_cap=T_star)
        if br.status == "period_cap":
            return br.orbits[-1]
        last = br.status
    raise NoOrbitError(f"no long-period orbit from the Hopf branch at "
                       f"sigma={sigma} (last status: {last})")


def _march_L(po, sign, T_star, policy, gamma_floor, gamma_ceil,
             amp_min, max_points, B, a, remesh_every=30):
    """One direction of the fixed-period continuation of L.

    sign: initial gamma direction.  Returns (points, nus, reason).
    The metric is parameter arclength plus a small profile term that
    keeps the border row regular if the curve folds in parameters.
    """
    mesh, nodes, p = po.mesh, po.nodes, po.params
    M = nodes.shape[0]
    wu = 1e-2 / (3 * M)
    sigma = p.sigma
    since_remesh = 0

    def refreshed(mesh, nodes, p, tu):
        po_tmp = PeriodicOrbit(mesh=mesh, nodes=nodes, T=T_star,
                               params=p, residual=0.0)
        po_tmp = solve_po(remesh(po_tmp, len(mesh) - 1), p,
                          fixed_T=T_star, free_param="A")
        tu = _eval_nodes(mesh, tu.reshape(-1, 3),
                         _rep_taus(po_tmp.mesh)).ravel()
        return po_tmp.mesh, po_tmp.nodes, po_tmp.params, tu

    def pin_gamma(target):
        def border(nd, TT, pp):
            return [(np.zeros(3 * M), [0.0, 1.0], pp.gamma - target)]
        return border

    g1 = p.gamma + sign * 1e-4
    try:
        nodes2, _, p2, _, _ = solve_bvp(nodes, T_star, p, mesh,
                                        free=("A", "gamma"),
                                        border=pin_gamma(g1))
    except NoOrbitError as exc:
        return [], [], f"first step failed: {exc}"

    def tangent_of(nd_a, p_a, nd_b, p_b):
        tu = (nd_b - nd_a).ravel()
        tA, tg = p_b.A - p_a.A, p_b.gamma - p_a.gamma
        nrm = np.sqrt(wu * tu @ tu + tA * tA + tg * tg)
        return tu / nrm, tA / nrm, tg / nrm

    tu, tA, tg = tangent_of(nodes, p, nodes2, p2)
    nodes, p = nodes2, p2
    pts = [(p.A, p.gamma)]
    info = [_nu_rate(p.A, p.gamma, sigma, B, a)]
    reason = "max_points"
    fails_here = 0

    for _ in range(max_points):
        ds = policy.ds
        nd_pred = nodes + (policy.ds * tu).reshape(-1, 3)
        A_pred = p.A + ds * tA
        g_pred = max(p.gamma + ds * tg, 0.5 * gamma_floor)

        def arc(nd, TT, pp):
            res = (wu * tu @ (nd - nd_pred).ravel()
                   + tA * (pp.A - A_pred) + tg * (pp.gamma - g_pred))
            return [(wu * tu, [tA, tg], res)]

        try:
            p_pred = p.with_(A=A_pred, gamma=g_pred)
            nd_new, _, p_new, _, _ = solve_bvp(
                nd_pred, T_star, p_pred, mesh, free=("A", "gamma"),
                border=arc)
            amp = np.linalg.norm(nd_new.max(axis=0) - nd_new.min(axis=0))
            if amp < amp_min:
                reason = "amplitude collapsed (BT end)"
                break
        except NoOrbitError:
            fails_here += 1
            if fails_here == 2:
                try:
                    mesh, nodes, p, tu = refreshed(mesh, nodes, p, tu)
                    since_remesh = 0
                except NoOrbitError:
                    pass
            if not policy.failure():
                reason = "step size underflow"
                break
            continue
        fails_here = 0
        tu2, tA2, tg2 = tangent_of(nodes, p, nd_new, p_new)
        if wu * tu2 @ tu + tA2 * tA + tg2 * tg < 0.0:
            # the corrector landed behind the last point: the curve ends
            # here (the BT tip), and marching on would just re-trace it
            reason = "march reversed at the curve tip (BT end)"
            break
        tu, tA, tg = tu2, tA2, tg2
        nodes, p = nd_new, p_new
        pts.append((p.A, p.gamma))
        info.append(_nu_rate(p.A, p.gamma, sigma, B, a))
        policy.success()
        since_remesh += 1
        if p.gamma < gamma_floor:
            reason = "reached gamma floor"
            break
        if p.gamma > gamma_ceil:
            reason = "passed the BT gamma"
            break
        if p.A > B + 1.0:
            reason = ("crossed the transcritical line; the saddle is "
                      "gone and with it the homoclinic")
            break
        if since_remesh >= remesh_every:
            try:
                mesh, nodes, p, tu = refreshed(mesh, nodes, p, tu)
            except NoOrbitError:
                pass
            since_remesh = 0
    return pts, info, reason


def curve_L(sigma, seed=None, T_star=1e3, B=5.8, a=1.8, N=160,
            gamma_floor=1e-5, amp_min=5e-2, max_points=400):
    """Homoclinic curve by fixed-large-period orbit continuation.

    The orbit is held at period T*; a seed near the homoclinic (period
    >= T*, e.g. from continue_po hitting its period cap) is continued in
    (A, gamma) by pseudo-arclength both ways: up toward BT and down
    toward the gamma floor.  Per-point aux: the saddle quantity of p.
    The constant-period approximation self-converges exponentially in T*
    away from the transcritical line; points with gamma below about 0.05
    carry a visible O(1/T*) bias toward T (see the module tests).
    """
    try:
        A_bt, g_bt = bt_locus(sigma, B, a)
    except ValueError as exc:
        return BifurcationCurve("L", sigma, _EMPTY,
                                reason=f"no BT point, L absent: {exc}")
    if seed is None:
        try:
            seed = _l_seed(sigma, T_star, g_bt, B, a)
        except (NoOrbitError, NoHopfError, ValueError) as exc:
            return BifurcationCurve("L", sigma, _EMPTY,
                                    reason=f"seeding failed: {exc}")
    po = solve_po(remesh(seed, N), seed.params, fixed_T=T_star,
                  free_param="A")

    down_pts, down_info, down_reason = _march_L(
        po, -1, T_star, _StepPolicy(), gamma_floor, g_bt * 1.05,
        amp_min, max_points, B, a)
    up_pts, up_info, up_reason = _march_L(
        po, +1, T_star, _StepPolicy(), gamma_floor, g_bt * 1.05,
        amp_min, max_points, B, a)

    head = (po.params.A, po.params.gamma)
    pts = list(reversed(up_pts)) + [head] + down_pts
    info = (list(reversed(up_info))
            + [_nu_rate(head[0], head[1], sigma, B, a)] + down_info)
    if not pts:
        return BifurcationCurve("L", sigma, _EMPTY,
                                reason="continuation produced no points")
    nus = np.asarray([r[0] for r in info], dtype=float)
    efolds = np.asarray([r[1] for r in info]) * T_star
    return BifurcationCurve(
        "L", sigma, np.asarray(pts),
        aux={"nu": nus, "efolds": efolds, "T_star": T_star,
             "bt": (A_bt, g_bt), "reason_up": up_reason,
             "reason_down": down_reason})


# ---------------------------------------------------------------------------
# fold-of-cycles curve D


def _fold_seed(sigma, A_seed, B, a, T_cap):
    """Fold orbit at fixed pump: ride the Hopf branch up in gamma."""
    po0 = orbit_from_hopf(A_seed, sigma, B, a, N=60)
    br = continue_po(po0, param="gamma", direction=+1, ds0=2e-3,
                     max_steps=80, period_cap=T_cap)
    if not br.folds:
        raise NoOrbitError(f"no fold along the gamma branch at A={A_seed} "
                           f"(status {br.status})")
    return br.folds[0][1]


def _pin_A(M, target):
    eA = np.zeros(6 * M + 4)
    eA[6 * M + 2] = 1.0

    def border(uu, vv, TT, wT, pp):
        return eA, pp.A - target
    return border


def _d_refresh(mesh, u, v, T, vT, p, tan):
    """Redistribute the mesh under the current orbit and re-land on the
    fold curve at the same pump (the bordered system stays regular, so
    pinning A is safe here)."""
    po = remesh(PeriodicOrbit(mesh=mesh, nodes=u, T=T, params=p,
                              residual=0.0), len(mesh) - 1)
    taus = _rep_taus(po.mesh)
    M = u.shape[0]
    v2 = _eval_nodes(mesh, v, taus)
    u2, v2, T2, vT2, p2, _, _ = solve_fold_bvp(
        po.nodes, v2, T, vT, p, po.mesh, _pin_A(M, p.A), vref=(v2, vT),
        tol=1e-8)
    tan2 = np.concatenate([
        _eval_nodes(mesh, tan[:3 * M].reshape(-1, 3), taus).ravel(),
        _eval_nodes(mesh, tan[3 * M:6 * M].reshape(-1, 3), taus).ravel(),
        tan[6 * M:]])
    wgt = _d_weights(M)
    tan2 /= np.sqrt(wgt * tan2 @ tan2)
    return po.mesh, u2, v2, T2, vT2, p2, tan2


def _march_D(state, direction, policy, stop, max_points,
             remesh_every=30):
    """One direction of the bordered fold continuation.

    state: dict with mesh, u, v, T, vT, p and a full-space tangent.
    stop: callable(T, amplitude, p) -> reason or None.  Returns
    (rows of (A, gamma, T, amplitude, |mult-1|), reason).
    """
    mesh = state["mesh"]
    u, v, T, vT, p = (state[k] for k in ("u", "v", "T", "vT", "p"))
    tan = direction * state["tan"]
    M = u.shape[0]
    wgt = _d_weights(M)
    out = []
    reason = "max_points"
    since_remesh = 0
    T_ref = T

    while len(out) < max_points:
        x = np.concatenate([u.ravel(), v.ravel(), [T, vT, p.A, p.gamma]])
        xp = x + policy.ds * tan

        def border(uu, vv, TT, wT, pp, xp=xp, tan=tan):
            xx = np.concatenate([uu.ravel(), vv.ravel(),
                                 [TT, wT, pp.A, pp.gamma]])
            return wgt * tan, float(wgt * tan @ (xx - xp))

        try:
            pp0 = p.with_(A=xp[6 * M + 2], gamma=max(xp[6 * M + 3], 1e-6))
            un, vn, Tn, vTn, pn, _, _ = solve_fold_bvp(
                xp[:3 * M].reshape(-1, 3),
                xp[3 * M:6 * M].reshape(-1, 3),
                xp[6 * M], xp[6 * M + 1], pp0, mesh, border,
                vref=(v, vT), tol=1e-8)
        except (NoOrbitError, ValueError):
            if since_remesh:
                try:
                    mesh, u, v, T, vT, p, tan = _d_refresh(
                        mesh, u, v, T, vT, p, tan)
                    since_remesh = 0
                    continue
                except NoOrbitError:
                    since_remesh = 0
            if not policy.failure():
                reason = "step size underflow"
                break
            continue
        xn = np.concatenate([un.ravel(), vn.ravel(),
                             [Tn, vTn, pn.A, pn.gamma]])
        step = xn - x
        tan_new = step / np.sqrt(wgt * step @ step)
        if tan_new @ (wgt * tan) < 0.0:
            tan_new = -tan_new
        mult = fold_multiplier(PeriodicOrbit(mesh=mesh, nodes=un, T=Tn,
                                             params=pn, residual=0.0))
        if abs(mult - 1.0) > 1e-5:
            # the period direction goes null near the homoclinic end and
            # the bordered system stops meaning "fold"; quit while the
            # last accepted point is still sound
            reason = "fold multiplier degrading (homoclinic end)"
            break
        tan = tan_new
        u, v, T, vT, p = un, vn, Tn, vTn, pn
        amp = np.linalg.norm(u.max(axis=0) - u.min(axis=0))
        out.append((p.A, p.gamma, T, amp, abs(mult - 1.0)))
        policy.success()
        since_remesh += 1
        why = stop(T, amp, p)
        if why:
            reason = why
            break
        if since_remesh >= remesh_every or T > 1.25 * T_ref:
            try:
                mesh, u, v, T, vT, p, tan = _d_refresh(
                    mesh, u, v, T, vT, p, tan)
            except NoOrbitError:
                pass
            since_remesh = 0
            T_ref = T
    return out, reason


def _d_weights(M):
    w = np.empty(6 * M + 4)
    w[:3 * M] = 1.0 / (3 * M)
    w[3 * M:6 * M] = 0.0
    w[6 * M:6 * M + 2] = 1e-5
    w[6 * M + 2:] = 0.25
    return w


def curve_D(sigma, seed=None, B=5.8, a=1.8, N=120, T_cap=200.0,
            amp_min=5e-2, max_points=600):
    """Saddle-node-of-cycles curve via the bordered fold system.

    Seeded from a fold orbit (found on a Hopf branch between GH and S
    when not supplied) and marched both ways; one end shrinks to zero
    amplitude at GH, the other runs toward infinite period at NH, where
    marching stops at T_cap.  Points are ordered from the GH end to the
    NH end.  aux: period, amplitude, arclength, and the a-posteriori
    Floquet check |mu - 1| per point.
    """
    if seed is None:
        h = curve_H(sigma, B=B, a=a, n=80)
        if h.empty:
            return BifurcationCurve("D", sigma, _EMPTY,
                                    reason=f"no Hopf curve: {h.reason}")
        gh = detect_GH(h)
        if gh is None:
            return BifurcationCurve("D", sigma, _EMPTY,
                                    reason="no generalized Hopf point on "
                                           "H, so no fold of cycles")
        A_S = saddlenode_A(sigma, B, a)[0]
        seed = None
        for frac in (0.25, 0.1, 0.45):
            try:
                seed = _fold_seed(sigma, gh.A - frac * (gh.A - A_S),
                                  B, a, T_cap)
                break
            except (NoOrbitError, NoHopfError):
                continue
        if seed is None:
            return BifurcationCurve("D", sigma, _EMPTY,
                                    reason="no fold orbit found on Hopf "
                                           "branches between S and GH")

    po = remesh(seed, N)
    M0 = po.nodes.shape[0]
    try:
        v, vT = fold_null_vector(po)
        u, v, T, vT, p, _, _ = solve_fold_bvp(
            po.nodes, v, po.T, vT, po.params, po.mesh,
            _pin_A(M0, po.params.A))
        u2, v2, T2, vT2, p2, _, _ = solve_fold_bvp(
            u, v, T, vT, p, po.mesh, _pin_A(M0, p.A - 1e-3),
            vref=(v, vT))
    except NoOrbitError as exc:
        return BifurcationCurve("D", sigma, _EMPTY,
                                reason=f"fold system seeding failed: {exc}")

    M = u.shape[0]
    wgt = _d_weights(M)
    step = (np.concatenate([u2.ravel(), v2.ravel(),
                            [T2, vT2, p2.A, p2.gamma]])
            - np.concatenate([u.ravel(), v.ravel(), [T, vT, p.A, p.gamma]]))
    tan = step / np.sqrt(wgt * step @ step)
    # tan currently points toward decreasing A; GH sits at larger A
    state = {"mesh": po.mesh, "u": u2, "v": v2, "T": T2, "vT": vT2,
             "p": p2, "tan": tan}

    def stop_gh(TT, amp, pp):
        if amp < amp_min:
            return "amplitude collapsed (GH end)"
        return None

    def stop_nh(TT, amp, pp):
        if TT > T_cap:
            return "period cap (NH end)"
        if amp < amp_min:
            return "amplitude collapsed"
        return None

    rows_gh, reason_gh = _march_D(state, -1.0, _StepPolicy(),
                                  stop_gh, max_points)
    rows_nh, reason_nh = _march_D(state, +1.0, _StepPolicy(),
                                  stop_nh, max_points)
    mult_head = fold_multiplier(PeriodicOrbit(
        mesh=po.mesh, nodes=u2, T=T2, params=p2, residual=0.0))
    head = (p2.A, p2.gamma, T2,
            float(np.linalg.norm(u2.max(axis=0) - u2.min(axis=0))),
            abs(mult_head - 1.0))
    rows = list(reversed(rows_gh)) + [head] + rows_nh
    if rows_gh and rows_nh and rows_gh[-1][0] < rows_nh[-1][0]:
        rows = rows[::-1]
        reason_gh, reason_nh = reason_nh, reason_gh
    arr = np.asarray(rows)
    seg = np.linalg.norm(np.diff(arr[:, :2], axis=0), axis=1)
    return BifurcationCurve(
        "D", sigma, arr[:, :2],
        aux={"T": arr[:, 2], "amplitude": arr[:, 3],
             "mult_err": arr[:, 4],
             "s": np.concatenate([[0.0], np.cumsum(seg)]),
             "reason_gh": reason_gh, "reason_nh": reason_nh})


# ---------------------------------------------------------------------------
# codimension-two points


def _bilinear(x, y, p):
    """The constant bilinear form of the quadratic field: B(x, y)."""
    gi = x[0] * y[2] + x[2] * y[0]
    qi = x[1] * y[2] + x[2] * y[1]
    return np.array([-p.gamma * gi,
                     -(p.a * p.gamma / p.sigma**2) * qi,
                     gi - qi])


def lyapunov_l1(A, sigma, B=5.8, a=1.8):
    """First Lyapunov coefficient of the Hopf at (A, gamma_H(A)).

    Projection formula on the critical eigenspace.  The field is
    quadratic, so the cubic term is identically zero; this is asserted
    against a finite second-difference of the Jacobian rather than
    assumed.
    """
    g = hopf_gamma(A, sigma, B, a)
    if g <= 0.0:
        raise NoHopfError(f"Hopf curve has no positive gamma at A={A}")
    p = Params(A=A, gamma=g, sigma=sigma, B=B, a=a)
    q_eq = [e for e in interior_equilibria(p) if e.role == "q"][0]
    J = jacobian(q_eq.point, p)

    rng = np.random.default_rng(5)
    x0, dx = rng.standard_normal(3), rng.standard_normal(3)
    dJ = jacobian(x0 + dx, p) - jacobian(x0, p)
    bi = np.column_stack([_bilinear(e, dx, p) for e in np.eye(3)])
    if not np.allclose(dJ, bi, atol=1e-12):
        raise AssertionError("vector field is not quadratic; the cubic "
                             "term of the normal form cannot be dropped")

    lam, vec = np.linalg.eig(J)
    i = int(np.argmax(lam.imag))
    om = lam[i].imag
    if om <= 0.0:
        raise NoHopfError(f"no complex pair at A={A}, sigma={sigma}")
    qv = vec[:, i]
    lamT, vecT = np.linalg.eig(J.T)
    j = int(np.argmin(np.abs(lamT - np.conj(lam[i]))))
    pv = vecT[:, j]
    pv = pv / np.conj(np.vdot(pv, qv))

    qb = np.conj(qv)
    t1 = -2.0 * np.vdot(pv, _bilinear(qv, np.linalg.solve(
        J, _bilinear(qv, qb, p)), p))
    t2 = np.vdot(pv, _bilinear(qb, np.linalg.solve(
        2j * om * np.eye(3) - J, _bilinear(qv, qv, p)), p))
    return float((t1 + t2).real / (2.0 * om))


def detect_GH(h_curve, B=5.8, a=1.8, n_scan=40):
    """Generalized Hopf point: sign change of l1 along H, refined in A.

    Returns None when l1 keeps one sign over the curve.
    """
    if h_curve.empty:
        return None
    sigma = h_curve.sigma
    As = h_curve.points[:-1, 0]          # drop the exact gamma = 0 tail
    if len(As) > n_scan:
        As = As[np.linspace(0, len(As) - 1, n_scan).astype(int)]
    vals = []
    for A in As:
        try:
            vals.append(lyapunov_l1(A, sigma, B, a))
        except NoHopfError:
            vals.append(np.nan)
    vals = np.asarray(vals)
    for i in range(len(As) - 1):
        v1, v2 = vals[i], vals[i + 1]
        if np.isnan(v1) or np.isnan(v2) or v1 * v2 > 0.0:
            continue
        A_star = brentq(lambda A: lyapunov_l1(A, sigma, B, a),
                        As[i], As[i + 1], xtol=1e-9)
        g_star = hopf_gamma(A_star, sigma, B, a)
        slope = (v2 - v1) / (As[i + 1] - As[i])
        return Codim2Point("GH", sigma, A_star, g_star, curve="H",
                           info={"l1_slope": slope})
    return None


def detect_BT(sigma, B=5.8, a=1.8):
    """Bogdanov-Takens point on S, with the H-endpoint cross-check."""
    A_bt, g_bt = bt_locus(sigma, B, a)
    A_S = saddlenode_A(sigma, B, a)[0]
    g_end = hopf_gamma(A_S * (1.0 + 1e-11), sigma, B, a)
    return Codim2Point("BT", sigma, A_bt, g_bt, curve="S",
                       info={"hopf_endpoint_gap": abs(g_end - g_bt)})


def _segment_crossing(p1, p2, q1, q2):
    """Intersection point of two segments, or None."""
    d1, d2 = p2 - p1, q2 - q1
    den = d1[0] * d2[1] - d1[1] * d2[0]
    if den == 0.0:
        return None
    r = q1 - p1
    t = (r[0] * d2[1] - r[1] * d2[0]) / den
    s = (r[0] * d1[1] - r[1] * d1[0]) / den
    if 0.0 <= t <= 1.0 and 0.0 <= s <= 1.0:
        return p1 + t * d1
    return None


def curve_crossings(c1, c2):
    """All intersection points of two curves' polylines, (n, 2)."""
    P, Q = np.asarray(c1.points), np.asarray(c2.points)
    out = []
    for i in range(len(P) - 1):
        lo = np.minimum(P[i], P[i + 1])
        hi = np.maximum(P[i], P[i + 1])
        for j in range(len(Q) - 1):
            if (np.minimum(Q[j], Q[j + 1]) > hi).any():
                continue
            if (np.maximum(Q[j], Q[j + 1]) < lo).any():
                continue
            x = _segment_crossing(P[i], P[i + 1], Q[j], Q[j + 1])
            if x is not None:
                out.append(x)
    return np.asarray(out) if out else _EMPTY


def nh_points(l_curve, sq_curve=None, B=5.8, a=1.8, min_efolds=8.0):
    """Neutral-saddle homoclinic points: nu = 0 along L.

    Each zero of the saddle quantity along L is refined on its segment;
    when the SQ curve is supplied, the matching geometric L-SQ crossing
    distance is recorded per point (the two constructions should agree
    to about the continuation step size).  Sign changes between points
    with fewer than min_efolds e-folds of contraction are discarded:
    that stretch of the computed L is dominated by the fixed-period
    truncation bias and crossings there are artifacts.
    """
    if l_curve.empty:
        return []
    sigma = l_curve.sigma
    pts = l_curve.points
    nus = np.asarray(l_curve.aux["nu"], dtype=float)
    efolds = np.asarray(l_curve.aux.get("efolds", np.full(len(pts), np.inf)))
    crossings = (curve_crossings(l_curve, sq_curve)
                 if sq_curve is not None and not sq_curve.empty
                 else _EMPTY)
    out = []
    for i in range(len(pts) - 1):
        v1, v2 = nus[i], nus[i + 1]
        if np.isnan(v1) or np.isnan(v2) or v1 * v2 > 0.0:
            continue
        if min(efolds[i], efolds[i + 1]) < min_efolds:
            continue

        def nu_on_seg(t):
            x = pts[i] + t * (pts[i + 1] - pts[i])
            val = _nu(x[0], x[1], sigma, B, a)
            return val if val is not None else np.nan

        t_star = brentq(nu_on_seg, 0.0, 1.0, xtol=1e-12)
        loc = pts[i] + t_star * (pts[i + 1] - pts[i])
        info = {}
        if len(crossings):
            gaps = np.linalg.norm(crossings - loc, axis=1)
            info["sq_gap"] = float(gaps.min())
            info["sq_point"] = crossings[np.argmin(gaps)]
        out.append(Codim2Point("NH", sigma, float(loc[0]), float(loc[1]),
                               curve="L", info=info))
    return out


def cusp_points(d_curve, dot_threshold=0.0):
    """Cusps of D: reversals of the parameter-plane tangent along the
    curve, localized by a parabola fit in arclength."""
    pts, s = d_curve.points, d_curve.aux.get("s")
    if len(pts) < 5 or s is None:
        return []
    seg = np.diff(pts, axis=0)
    lens = np.linalg.norm(seg, axis=1)
    good = lens > 0
    out = []
    for i in range(len(seg) - 1):
        if not (good[i] and good[i + 1]):
            continue
        if seg[i] @ seg[i + 1] / (lens[i] * lens[i + 1]) < dot_threshold:
            lo, hi = max(i - 2, 0), min(i + 4, len(pts))
            sw = s[lo:hi]
            cA = np.polyfit(sw, pts[lo:hi, 0], 2)
            cg = np.polyfit(sw, pts[lo:hi, 1], 2)
            # vertex of whichever projection folds harder
            s_star = (-cA[1] / (2 * cA[0]) if abs(cA[0]) > abs(cg[0])
                      else -cg[1] / (2 * cg[0]))
            s_star = min(max(s_star, sw[0]), sw[-1])
            out.append(Codim2Point(
                "C", d_curve.sigma, float(np.polyval(cA, s_star)),
                float(np.polyval(cg, s_star)), curve="D",
                info={"s": float(s_star)}))
    return out
