"""Adaptive time integration, attractor identification, and kick response.

The integrator is an explicit Dormand-Prince 5(4) pair with PI step-size
control and FSAL reuse.  Events are scalar functions of the state located
by bisection on a cubic Hermite interpolant of each accepted step.
"""

from dataclasses import dataclass, field

import numpy as np

from .analytic import all_equilibria
from .model import vector_field

__all__ = [
    "Event",
    "Trajectory",
    "AttractorID",
    "StiffnessError",
    "DivergenceError",
    "integrate",
    "attractor_from",
    "kick_response",
    "kick_scan",
]

_DIVERGE_NORM = 1e8
_EVENT_TIME_TOL = 1e-10

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B5 = np.append(_A[6], 0.0)
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                -92097 / 339200, 187 / 2100, 1 / 40])


class StiffnessError(RuntimeError):
    """Step size underflowed; the problem is stiff at this tolerance."""


class DivergenceError(RuntimeError):
    """The trajectory left the |state| < 1e8 ball."""


@dataclass
class Event:
    fn: object                 # scalar function of the state
    direction: int = 0         # +1: -- to +, -1: + to -, 0: any crossing
    terminal: bool = False


@dataclass
class EventHit:
    index: int
    t: float
    state: np.ndarray


@dataclass
class Trajectory:
    t: np.ndarray
    y: np.ndarray              # shape (len(t), 3)
    reason: str                # t_end | event | converged | diverged
    events: list = field(default_factory=list)
    n_steps: int = 0
    n_rejected: int = 0

    @property
    def final(self):
        return self.y[-1]


@dataclass
class AttractorID:
    kind: str                  # equilibrium | periodic-orbit | undecided
    ref: object = None         # Equilibrium, or dict describing the orbit
    metric: float = np.inf
    period: float | None = None
    point: np.ndarray | None = None
    I_max: float | None = None


def _hermite(t0, y0, f0, t1, y1, f1, t):
    h = t1 - t0
    s = (t - t0) / h
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1


def integrate(s0, p, t_end, rtol=1e-10, atol=1e-12, events=None,
              max_step=np.inf, backward=False, max_steps=10_000_000,
              t0=0.0, record=True):
    """Integrate the model from s0 for t in [t0, t_end].

    Returns a Trajectory.  Event functions are evaluated on the state;
    sign changes are located to time accuracy 1e-10 and recorded, and a
    terminal event stops the run with reason 'event'.  With backward=True
    the reversed vector field is integrated (times still increase).

    Raises StiffnessError on step-size underflow and DivergenceError when
    the state norm exceeds 1e8.
    """
    if rtol <= 0 or atol <= 0:
        raise ValueError("tolerances must be positive")
    sign = -1.0 if backward else 1.0
    f = lambda s: sign * vector_field(s, p)

    y = np.array(s0, dtype=float)
    on_plane = abs(y[2]) < 1e-14
    if on_plane:
        y[2] = 0.0
    t = float(t0)
    span = t_end - t0
    if span <= 0:
        raise ValueError("t_end must exceed t0")

    evs = [e if isinstance(e, Event) else Event(e) for e in (events or [])]
    g_prev = [e.fn(y) for e in evs]

    k1 = f(y)
    # initial step from the usual |y|/|f| heuristic
    d0 = np.linalg.norm(y / (atol + rtol * np.abs(y)))
    d1 = np.linalg.norm(k1 / (atol + rtol * np.abs(y)))
    h = min(span, 1e-2 * d0 / d1 if d1 > 1e-10 else 1e-6 * span)
    h = max(h, 1e-12)

    ts, ys = [t], [y.copy()]
    hits = []
    err_prev = 1.0
    n_steps = n_rej = 0
    reason = "t_end"

    while t < t_end:
        if n_steps >= max_steps:
            raise StiffnessError(f"step budget {max_steps} exhausted at t={t}")
        h = min(h, t_end - t, max_step)
        if h < 1e-14 * max(1.0, abs(t)):
            raise StiffnessError(f"step size underflow at t={t}")

        K = np.empty((7, 3))
        K[0] = k1
        for i in range(1, 7):
            K[i] = f(y + h * (_A[i] @ K[:i]))
        y1 = y + h * (_B5 @ K)
        err_vec = h * ((_B5 - _B4) @ K)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y1))
        err = np.sqrt(np.mean((err_vec / scale) ** 2))

        if err <= 1.0:
            t1 = t + h
            if on_plane:
                y1[2] = 0.0
            elif abs(y1[2]) < 1e-300:
                y1[2] = 0.0   # guard against denormal underflow spirals
            if np.linalg.norm(y1) > _DIVERGE_NORM:
                raise DivergenceError(
                    f"state norm exceeded {_DIVERGE_NORM:.0e} at t={t1}")

            k_new = K[6] if not on_plane else f(y1)
            step_hits = []
            for j, e in enumerate(evs):
                g1 = e.fn(y1)
                g0 = g_prev[j]
                crossed = (g0 < 0.0 <= g1) or (g0 > 0.0 >= g1)
                if crossed:
                    rising = g0 < g1
                    if e.direction == 0 or (e.direction > 0) == rising:
                        lo, hi = t, t1
                        for _ in range(200):
                            if hi - lo < _EVENT_TIME_TOL:
                                break
                            mid = 0.5 * (lo + hi)
                            gm = e.fn(_hermite(t, y, K[0], t1, y1, K[6], mid))
                            if (gm < 0.0) == (g0 < 0.0):
                                lo = mid
                            else:
                                hi = mid
                        te = 0.5 * (lo + hi)
                        se = _hermite(t, y, K[0], t1, y1, K[6], te)
                        step_hits.append((te, se, j, e.terminal))
                g_prev[j] = g1

            step_hits.sort(key=lambda rec: rec[0])
            stop = False
            for te, se, j, terminal in step_hits:
                hits.append(EventHit(index=j, t=te, state=se))
                if terminal:
                    # stop the trajectory at the event point itself
                    t1, y1 = te, se.copy()
                    stop = True
                    break

            t, y, k1 = t1, y1, k_new
            if record:
                ts.append(t)
                ys.append(y.copy())
            n_steps += 1
            # PI controller
            fac = 0.9 * err ** -0.14 * err_prev ** 0.08 if err > 0 else 5.0
            h *= min(5.0, max(0.2, fac))
            err_prev = max(err, 1e-4)
            if stop:
                reason = "event"
                break
        else:
            n_rej += 1
            h *= max(0.2, 0.9 * err ** -0.2)

    if not record:
        ts.append(t)
        ys.append(y.copy())
    return Trajectory(t=np.array(ts), y=np.array(ys), reason=reason,
                      events=hits, n_steps=n_steps, n_rejected=n_rej)


def _section_I_turn(s):
    # the dI/dt = 0 plane G - Q - 1 = 0; pulsing orbits cross it transversally
    return s[0] - s[1] - 1.0


_FLOOR = 1e-12          # below this the intensity dynamics is slaved to (G, Q)
_REINJECT = 1e-6


def _floor_fast_forward(y, p):
    """Exact advance along the near-invariant plane while I is negligible.

    For I below 1e-12 the (G, Q) subsystem is linear and the log of I
    integrates in closed form.  Returns (state at I = 1e-6, elapsed time,
    section crossing during the skip or None), or None when I never
    recovers (A <= B+1: the off state wins).
    """
    G0, Q0, I0 = y
    mu = p.A - p.B - 1.0
    if mu <= 0.0 or I0 <= 0.0 or p.gamma <= 0:
        return None
    g, gq = p.gamma, p.gamma / p.sigma
    dG, dQ = G0 - p.A, Q0 - p.B

    def G_of(t):
        return p.A + dG * np.exp(-g * t)

    def Q_of(t):
        return p.B + dQ * np.exp(-gq * t)

    def log_gain(t):
        return (mu * t + dG * (1.0 - np.exp(-g * t)) / g
                - dQ * (1.0 - np.exp(-gq * t)) / gq)

    def bisect(fn, lo, hi, target=0.0):
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if fn(mid) < target:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-9 * max(hi, 1.0):
                break
        return 0.5 * (lo + hi)

    need = np.log(_REINJECT / I0)
    hi = max((need + abs(dG) / g + abs(dQ) / gq) / mu, 1.0)
    while log_gain(hi) < need:
        hi *= 2.0
    t = bisect(log_gain, 0.0, hi, target=need)
    state = np.array([G_of(t), Q_of(t), _REINJECT])

    # the rising crossing of G - Q - 1 = 0 sits at the intensity minimum,
    # always inside the skipped stretch when the gain starts negative
    crossing = None
    gain = lambda tt: G_of(tt) - Q_of(tt) - 1.0
    if gain(0.0) < 0.0 < gain(t):
        tc = bisect(gain, 0.0, t)
        crossing = (tc, np.array([G_of(tc), Q_of(tc),
                                  I0 * np.exp(log_gain(tc))]))
    return state, t, crossing


def attractor_from(s0, p, transient=None, budget=None, rtol=1e-9, atol=1e-11,
                   equilibria=None, eq_tol=1e-6):
    """Identify the attractor reached from s0.

    Integrates a transient (default 5/gamma), then watches for either
    convergence to an attracting equilibrium or recurrent increasing
    crossings of the dI/dt = 0 section with a settled period.  Stretches
    where I sits below 1e-12 are advanced by the closed-form plane
    solution and not charged against the integration budget (default
    50/gamma).  Returns an AttractorID with kind 'equilibrium',
    'periodic-orbit' or 'undecided'.
    """
    if p.gamma <= 0:
        raise ValueError("attractor identification needs gamma > 0")
    transient = 5.0 / p.gamma if transient is None else transient
    budget = 50.0 / p.gamma if budget is None else budget
    eqs = all_equilibria(p) if equilibria is None else equilibria
    sinks = [e for e in eqs if e.stability == "sink"]

    tr = integrate(s0, p, transient, rtol=rtol, atol=atol, record=False)
    y = tr.y[-1]

    chunk = max(2.0 / p.gamma, 10.0)
    t_used = 0.0          # integrated time, charged against the budget
    t_dyn = 0.0           # dynamical time including fast-forwarded stretches
    crossings_t, crossings_y = [], []
    ev = Event(_section_I_turn, direction=+1)
    I_max = y[2]
    last_dist = np.inf
    while t_used < budget:
        tr = integrate(y, p, chunk, rtol=rtol, atol=atol, events=[ev])
        I_max = max(I_max, tr.y[:, 2].max())
        y = tr.y[-1]
        for h in tr.events:
            crossings_t.append(t_dyn + h.t)
            crossings_y.append(h.state)
        t_used += chunk
        t_dyn += chunk

        # attracting-equilibrium match: proximity plus non-increasing distance
        dists = [np.linalg.norm(y - e.point) for e in sinks]
        if dists:
            i_near = int(np.argmin(dists))
            if dists[i_near] < eq_tol and dists[i_near] <= last_dist:
                return AttractorID(kind="equilibrium", ref=sinks[i_near],
                                   metric=dists[i_near],
                                   point=sinks[i_near].point, I_max=I_max)
            last_dist = dists[i_near]

        if len(crossings_t) >= 4:
            gaps = np.diff(crossings_t[-4:])
            pts = np.array(crossings_y[-4:])
            T = gaps[-1]
            # a settled loop away from the equilibria (a spiral into an
            # interior equilibrium also crosses the section every turn)
            clear = all(
                min(np.linalg.norm(q - e.point) for e in eqs) >
                1e-3 * (1.0 + np.linalg.norm(q)) for q in pts[-2:])
            d1, d2, d3 = (np.linalg.norm(pts[k + 1] - pts[k])
                          for k in range(3))
            scale = max(1.0, np.linalg.norm(pts[-1]))
            if (clear and np.abs(gaps - T).max() < 1e-3 * T
                    and d3 < 1e-4 * scale):
                # a weakly damped spiral also recurs with a settled
                # period and small increments; the two differ in where
                # the geometric limit of the crossings lands
                rho = d3 / d2 if d2 > 0 else 0.0
                stretch = rho / (1.0 - rho) if 0.0 < rho < 1.0 else 0.0
                reach = d3 * max(stretch, 1.0)
                p_inf = pts[-1] + (pts[-1] - pts[-2]) * stretch
                lim_clear = min(np.linalg.norm(p_inf - e.point)
                                for e in eqs)
                if d3 <= 1e-6 * scale or lim_clear > 2.0 * reach:
                    return AttractorID(
                        kind="periodic-orbit",
                        ref={"section_point": p_inf, "period": T},
                        metric=float(np.abs(gaps - T).max()),
                        period=float(T), point=p_inf, I_max=I_max)
                # consistently contracting toward a sink: call it early
                # instead of crawling there at rate rho per turn
                if 0.0 < rho < 0.95 and d2 > 0 and d1 > 0 \
                        and abs(d3 / d2 - d2 / d1) < 0.25 * rho and sinks:
                    i_near = int(np.argmin(
                        [np.linalg.norm(p_inf - e.point) for e in sinks]))
                    e = sinks[i_near]
                    if np.linalg.norm(p_inf - e.point) < 1e-3 * scale:
                        return AttractorID(kind="equilibrium", ref=e,
                                           metric=float(reach),
                                           point=e.point, I_max=I_max)

        if 0.0 < y[2] < _FLOOR:
            jump = _floor_fast_forward(y, p)
            if jump is None:
                # I is dead and cannot recover; the off state is the target
                o = next(e for e in eqs if e.role == "o")
                if o.stability == "sink":
                    return AttractorID(kind="equilibrium", ref=o,
                                       metric=float(np.linalg.norm(y - o.point)),
                                       point=o.point, I_max=I_max)
            else:
                y, dt, crossing = jump
                if crossing is not None:
                    crossings_t.append(t_dyn + crossing[0])
                    crossings_y.append(crossing[1])
                t_dyn += dt

    return AttractorID(kind="undecided", metric=float(last_dist), point=y,
                       I_max=I_max)


def kick_response(p, delta_I, delta_G=0.0, delta_Q=0.0, budget=None,
                  rtol=1e-9, atol=1e-11):
    """Response of the off state to a state kick.

    Returns a dict with response ('pulse' or 'decay'), peak_I, and
    return_time (first time back within 1e-6 of the off state, or None
    if it never returns within the budget).
    """
    budget = (50.0 / p.gamma if p.gamma > 0 else 1e4) if budget is None else budget
    o = np.array([p.A, p.B, 0.0])
    s0 = o + np.array([delta_G, delta_Q, delta_I])
    if np.linalg.norm(s0 - o) <= 1e-6:
        return {"response": "decay", "peak_I": float(max(delta_I, 0.0)),
                "return_time": 0.0}

    returned = Event(lambda s, o=o: np.linalg.norm(s - o) - 1e-6,
                     direction=-1, terminal=True)
    tr = integrate(s0, p, budget, rtol=rtol, atol=atol, events=[returned])
    peak = float(tr.y[:, 2].max())
    kick_size = abs(delta_I) + abs(delta_G) + abs(delta_Q)
    pulse = peak > 10.0 * kick_size and peak > 0.1
    rt = tr.events[0].t if tr.events else None
    return {"response": "pulse" if pulse else "decay",
            "peak_I": peak, "return_time": rt}


def kick_scan(p, kicks, **kw):
    """kick_response over a list of intensity kicks; returns the profile list."""
    return [{"delta_I": float(k), **kick_response(p, k, **kw)} for k in kicks]
