"""Fixed-step RK4 integration of the impulsive delay equation.

The solution is piecewise left continuous: the value stored at an
impulse instant is the left limit, and the right limit is
``(1 + gamma_k) * left + delta_k``.  The impulse at the start time, if
any, is applied, so ``x(alpha)`` is the pre-jump value.
"""

from __future__ import annotations

import bisect
import functools
import math

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError, NumericalError
from .model import InitialHistory
from .quad import simpson_weights

_LAND = 1e-3  # relative slack for merging a grid node with a nearby impulse or t_end
_SNAP_REL = 1e-11  # delayed arguments this close to a node are read as that node

# node markers; impulse indices run negative before t0, so these sit far below
ORDINARY = int(np.iinfo(np.int64).min)
KINK = ORDINARY + 1


def grid_nodes(schedule, lo, hi, h, snap=_LAND, extra=()):
    """Nodes lo + j*h (last one moved to ``hi``) merged with the impulse instants in [lo, hi].

    A node within ``snap * h`` of an impulse is moved onto it; otherwise the
    impulse is inserted.  An impulse at ``lo`` itself is kept.  Points in
    ``extra`` are placed the same way and marked KINK.  Returns
    (times, kind) with the impulse index at impulse nodes and ORDINARY
    elsewhere; ``kind > KINK`` picks out the impulses.
    """
    n = max(1, math.ceil((hi - lo) / h - snap))
    times = lo + h * np.arange(n + 1)
    times[-1] = hi
    kind = np.full(n + 1, ORDINARY, dtype=np.int64)
    eps = 1e-12 * max(1.0, abs(lo), abs(hi))
    pts = [(tk, k) for k, tk, _, _ in schedule.impulses_in(lo - eps, hi + eps)]
    pts += [(float(u), KINK) for u in extra if lo + eps < u < hi - eps]
    extra_t, extra_k = [], []
    for tk, k in pts:
        j = min(int(np.searchsorted(times, tk)), n)
        if j > 0 and tk - times[j - 1] < times[j] - tk:
            j -= 1
        near = abs(times[j] - tk) <= (eps if j in (0, n) else snap * h)
        if near and kind[j] == ORDINARY:
            times[j] = tk
            kind[j] = k
        elif not (k == KINK and abs(times[j] - tk) <= eps):
            extra_t.append(tk)
            extra_k.append(k)
    if extra_t:
        times = np.concatenate([times, extra_t])
        kind = np.concatenate([kind, extra_k])
        order = np.argsort(times, kind="stable")
        times, kind = times[order], kind[order]
        keep = np.concatenate([[True], np.diff(times) > eps])
        times, kind = times[keep], kind[keep]
    return times, kind


def delay_breaks(model, lo, hi, h, targets=()):
    """Times s in (lo, hi) at which a pointwise delayed argument s - d(s) crosses an impulse.

    The right-hand side jumps there.  ``targets`` adds further instants to
    watch for (the start time, say).  Crossings are bracketed on a grid of
    step h/4 and refined with brentq, so two crossings of one target
    closer than that may be missed.
    """
    delays = [t.tau for t in model.terms if not (t.b.is_constant and float(t.b(0.0)) == 0.0)]
    delays += [
        t.sigma for t in model.terms if not (t.harvest.is_constant and float(t.harvest(0.0, 0.0)) == 0.0)
    ]
    if not delays or not hi > lo:
        return np.empty(0)
    n = max(2, math.ceil(4 * (hi - lo) / h)) + 1
    s = np.linspace(lo, hi, n)
    found = []
    for d in delays:
        u = s - np.broadcast_to(d(s), s.shape)
        tk = np.array(sorted(set(model.schedule.times_in(float(u.min()) - 1.0, float(u.max()) + 1.0)) | set(targets)))
        if not len(tk):
            continue
        side = np.searchsorted(tk, u, side="left")
        for j in np.flatnonzero(side[1:] != side[:-1]):
            lo_i, hi_i = sorted((side[j], side[j + 1]))
            for target in tk[lo_i:hi_i]:
                f = lambda x, c=target: x - float(d(x)) - c
                fa, fb = f(s[j]), f(s[j + 1])
                if fa == 0.0:
                    found.append(s[j])
                elif fb == 0.0:
                    found.append(s[j + 1])
                elif fa * fb < 0:
                    found.append(brentq(f, s[j], s[j + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps))
    return np.unique(np.array(found)) if found else np.empty(0)


def coefficient_kinks(model, lo, hi, h):
    """Kinks of the time-dependent coefficients (abs() arguments changing sign) in (lo, hi)."""
    exprs = [model.a]
    for t in model.terms:
        exprs += [t.b, t.c, t.tau, t.sigma, t.harvest]
    pts = [e.kinks(lo, hi, h) for e in exprs]
    return np.unique(np.concatenate(pts))


def rough_points(model, lo, hi, h, targets=()):
    """Where the right-hand side jumps or bends: grid nodes belong here."""
    return np.union1d(delay_breaks(model, lo, hi, h, targets), coefficient_kinks(model, lo, hi, h))


def hermite(t0, t1, y0, y1, m0, m1, u):
    """Cubic Hermite interpolant on [t0, t1] evaluated at ``u``."""
    d = t1 - t0
    th = (u - t0) / d
    th2 = th * th
    th3 = th2 * th
    return (
        (2 * th3 - 3 * th2 + 1) * y0
        + (th3 - 2 * th2 + th) * d * m0
        + (-2 * th3 + 3 * th2) * y1
        + (th3 - th2) * d * m1
    )


def _quadratic(t0, y0, m0, t1, y1, u):
    d = t1 - t0
    th = u - t0
    return y0 + m0 * th + (y1 - y0 - m0 * d) * (th / d) ** 2


@functools.lru_cache(maxsize=32)
def _simpson_nodes(n):
    return np.linspace(0.0, 1.0, 2 * n + 1), simpson_weights(n)


def distributed_delay(v, beta, T, s, lookup, breaks, h_max, panels=None):
    """int_0^T v(r) / (1 + x(s - r)^beta) dr for every entry of ``s``.

    The u = s - r range [s - T, s] is cut at the points of ``breaks`` lying
    strictly inside it; every piece gets the same number of Simpson panels,
    of width at most ``h_max`` unless ``panels`` fixes the count.  A piece's
    first point is looked up with the right limit of ``x`` and its last
    point with the left limit.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    breaks = np.asarray(breaks, dtype=float)
    lo = np.searchsorted(breaks, s - T, side="right")
    hi = np.searchsorted(breaks, s, side="left")
    if len(s) == 1:
        edges = np.concatenate([[s[0] - T], breaks[lo[0]:hi[0]], s])
        n = panels or max(1, math.ceil(T / h_max - 1e-9))
        theta, w = _simpson_nodes(n)
        a = edges[:-1, None]
        length = edges[1:, None] - a
        u = a + length * theta
        right = np.zeros(u.shape, dtype=bool)
        right[:, 0] = True
        xu = lookup(u, right)
        kern = float(v(0.0)) if v.is_constant else np.asarray(v(s[0] - u))
        with np.errstate(invalid="ignore"):
            val = np.sum(kern / (1.0 + np.power(xu, beta)) * w * (length / n))
        if not math.isfinite(val):
            raise NumericalError("non-finite distributed-delay integral")
        return np.array([val])
    count = hi - lo
    nb = int(count.max()) if len(s) else 0
    bounds = np.empty((len(s), nb + 2))
    bounds[:, 0] = s - T
    bounds[:, 1:] = s[:, None]
    for j in range(nb):
        has = count > j
        bounds[has, j + 1] = breaks[lo[has] + j]
    n = panels or max(1, math.ceil(T / h_max - 1e-9))
    theta, w = _simpson_nodes(n)
    a = bounds[:, :-1, None]
    length = bounds[:, 1:, None] - a
    u = a + length * theta
    right = np.zeros(u.shape, dtype=bool)
    right[..., 0] = True
    xu = lookup(u, right)
    kern = float(v(0.0)) if v.is_constant else np.asarray(v(s[:, None, None] - u))
    with np.errstate(invalid="ignore"):
        integrand = kern / (1.0 + np.power(xu, beta))
    out = np.sum(integrand * w * (length / n), axis=(1, 2))
    if not np.all(np.isfinite(out)):
        raise NumericalError("non-finite distributed-delay integral")
    return out


class Trajectory:
    """Numerical solution with cubic Hermite dense output.

    Attributes ``times``, ``x_left``, ``x_right``, ``f_left``, ``f_right``
    are node arrays; ``is_impulse`` marks nodes that are impulse instants.
    """

    def __init__(self, model, history, times, x_left, x_right, f_left, f_right, is_impulse, h, sigma_bar):
        self.model = model
        self.history = history
        self.times = times
        self.x_left = x_left
        self.x_right = x_right
        self.f_left = f_left
        self.f_right = f_right
        self.is_impulse = is_impulse
        self.h = h
        self.sigma_bar = sigma_bar

    @property
    def alpha(self):
        return float(self.times[0])

    @property
    def t_end(self):
        return float(self.times[-1])

    @property
    def jumps(self):
        idx = np.flatnonzero(self.is_impulse)
        return {float(self.times[i]): (float(self.x_left[i]), float(self.x_right[i])) for i in idx}

    def evaluate_at(self, t, side="left"):
        """Solution value at ``t``; ``side`` picks the one-sided limit at impulses."""
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        lo = self.alpha - self.sigma_bar
        if np.any(t < lo - 1e-12) or np.any(t > self.t_end + 1e-12 * max(1.0, abs(self.t_end))):
            raise ValueError(f"evaluation outside [{lo}, {self.t_end}]")
        right = np.full(t.shape, side == "right")
        out = _stored_lookup(self, len(self.times), True, self.history, t, right)
        return float(out[0]) if scalar else out

    def samples(self):
        """(times, x_left, x_right) node arrays."""
        return self.times, self.x_left, self.x_right


def _stored_lookup(st, n, last_slope_known, history, u, right):
    """Interpolate the first ``n`` stored nodes of ``st``; history before alpha."""
    times = st.times
    out = np.empty(u.shape)
    tol = _SNAP_REL * np.maximum(1.0, np.abs(u))
    before = u < times[0] - tol
    if np.any(before):
        out[before] = history(u[before])
    inside = ~before
    if not np.any(inside):
        return out
    uu = u[inside]
    rr = right[inside]
    tol = tol[inside]
    if n == 1:
        out[inside] = np.where(rr, st.x_right[0], st.x_left[0])
        return out
    idx = np.searchsorted(times[:n], uu + tol, side="right") - 1
    idx = np.clip(idx, 0, n - 1)
    exact = np.abs(times[idx] - uu) <= tol
    cell = np.minimum(idx, n - 2)
    t0, t1 = times[cell], times[cell + 1]
    y0, y1 = st.x_right[cell], st.x_left[cell + 1]
    m0, m1 = st.f_right[cell], st.f_left[cell + 1]
    val = hermite(t0, t1, y0, y1, m0, m1, uu)
    if not last_slope_known:
        last = cell == n - 2
        if np.any(last):
            val[last] = _quadratic(t0[last], y0[last], m0[last], t1[last], y1[last], uu[last])
    node_val = np.where(rr, st.x_right[idx], st.x_left[idx])
    out[inside] = np.where(exact, node_val, val)
    return out


class _Integrator:
    def __init__(self, model, history, t_end, h, sigma_bar):
        self.model = model
        self.history = history
        self.sigma_bar = sigma_bar
        self.h = h
        alpha = history.alpha
        sched = model.schedule
        times, kind = grid_nodes(sched, alpha, t_end, h, extra=rough_points(model, alpha, t_end, h, (alpha,)))
        self.times = times
        self.is_impulse = kind > KINK
        self.jump = np.array([(sched.gamma_k(k), sched.delta_k(k)) if k > KINK else (0.0, 0.0) for k in kind])
        N = len(times)
        self.x_left = np.full(N, np.nan)
        self.x_right = np.full(N, np.nan)
        self.f_left = np.full(N, np.nan)
        self.f_right = np.full(N, np.nan)
        self.mid = 0.5 * (self.times[:-1] + self.times[1:])
        self.hit_jump = False
        # distributed-delay cut points: impulses reachable by any lookup, plus alpha
        lo = alpha - sigma_bar - model.T - 1.0
        cuts = [it[1] for it in sched.impulses_in(lo, t_end)] + [alpha]
        # every grid node is a cut too, so kinks of x at nodes never sit inside a panel
        pre = alpha - h * np.arange(1, math.ceil((alpha - lo) / h) + 1)
        self.breaks = np.unique(np.concatenate([cuts, pre, times]))
        self._tabulate()

    def _tabulate(self):
        pts = {"node": self.times, "mid": self.mid}
        self.coef = {}
        for key, ts in pts.items():
            row = {"a": np.broadcast_to(self.model.a(ts), ts.shape).tolist()}
            for i, term in enumerate(self.model.terms):
                for name in ("b", "tau", "c", "sigma"):
                    row[name, i] = np.broadcast_to(getattr(term, name)(ts), ts.shape).tolist()
            self.coef[key] = row
        self.times_list = self.times.tolist()
        self.has_harvest = [
            not (term.harvest.is_constant and float(term.harvest(0.0, 0.0)) == 0.0) for term in self.model.terms
        ]

    # stage = None, or (t_n, x_n, k1, t_stage, Y)
    def lookup_scalar(self, u, right, n, slope_known, stage):
        if stage is not None and u > stage[0]:
            tn, xn, k1, ts, Y = stage
            return _quadratic(tn, xn, k1, ts, Y, u)
        times = self.times_list
        tol = _SNAP_REL * max(1.0, abs(u))
        if u < times[0] - tol:
            if u < times[0] - self.sigma_bar - 1e-9:
                raise ConfigError("delay argument precedes the initial history interval")
            return float(self.history(u))
        i = bisect.bisect_right(times, u + tol, 0, n) - 1
        if abs(times[i] - u) <= tol:
            if self.is_impulse[i]:
                self.hit_jump = True
            return float(self.x_right[i] if right else self.x_left[i])
        t0, t1 = times[i], times[i + 1]
        y0, y1, m0 = self.x_right[i], self.x_left[i + 1], self.f_right[i]
        if i == n - 2 and not slope_known:
            return float(_quadratic(t0, y0, m0, t1, y1, u))
        return float(hermite(t0, t1, y0, y1, m0, self.f_left[i + 1], u))

    def lookup(self, u, right, n, slope_known, stage):
        u = np.asarray(u, dtype=float)
        right = np.broadcast_to(right, u.shape)
        if np.any(u < self.times[0] - self.sigma_bar - 1e-9):
            raise ConfigError("delay argument precedes the initial history interval")
        if stage is None:
            return _stored_lookup(self, n, slope_known, self.history, u, right)
        tn, xn, k1, ts, Y = stage
        out = np.empty(u.shape)
        cur = u > tn
        if np.any(cur):
            out[cur] = _quadratic(tn, xn, k1, ts, Y, u[cur])
        past = ~cur
        if np.any(past):
            out[past] = _stored_lookup(self, n, slope_known, self.history, u[past], right[past])
        return out

    def rhs(self, key, idx, t, x, n, slope_known, stage, right):
        c = self.coef[key]
        val = -c["a"][idx] * x
        for i, term in enumerate(self.model.terms):
            b = c["b", i][idx]
            if b != 0.0:
                y = self.lookup_scalar(t - c["tau", i][idx], right, n, slope_known, stage)
                val += b / (1.0 + y**term.alpha)
            ci = c["c", i][idx]
            if ci != 0.0:
                look = lambda uu, rr: self.lookup(uu, rr, n, slope_known, stage)
                val += ci * float(distributed_delay(term.v, term.beta, self.model.T, t, look, self.breaks, self.h, 1)[0])
            if self.has_harvest[i]:
                y = self.lookup_scalar(t - c["sigma", i][idx], right, n, slope_known, stage)
                val -= term.harvest.scalar(t, y)
        if isinstance(val, complex) or not math.isfinite(val):
            raise NumericalError(f"non-finite right-hand side at t={t}")
        return float(val)

    def run(self):
        times = self.times
        N = len(times)
        x0 = float(self.history(times[0]))
        self.x_left[0] = x0
        g, d = self.jump[0]
        self.x_right[0] = (1.0 + g) * x0 + d if self.is_impulse[0] else x0
        for j in range(N - 1):
            t0, t1 = times[j], times[j + 1]
            hj = t1 - t0
            tm = self.mid[j]
            x = self.x_right[j]
            self.hit_jump = False
            k1 = self.rhs("node", j, t0, x, j + 1, bool(self.is_impulse[j]), None, True)
            self.f_right[j] = k1
            if not self.is_impulse[j] or j == 0:
                # a delayed argument sitting on an impulse makes the slope one-sided
                self.f_left[j] = k1 if not (self.hit_jump and j) else self.rhs("node", j, t0, x, j + 1, False, None, False)
            Y2 = x + 0.5 * hj * k1
            k2 = self.rhs("mid", j, tm, Y2, j + 1, True, (t0, x, k1, tm, Y2), True)
            Y3 = x + 0.5 * hj * k2
            k3 = self.rhs("mid", j, tm, Y3, j + 1, True, (t0, x, k1, tm, Y3), True)
            Y4 = x + hj * k3
            k4 = self.rhs("node", j + 1, t1, Y4, j + 1, True, (t0, x, k1, t1, Y4), False)
            xn = x + hj / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not math.isfinite(xn):
                raise NumericalError(f"state became non-finite at t={t1}")
            self.x_left[j + 1] = xn
            if self.is_impulse[j + 1]:
                self.f_left[j + 1] = self.rhs("node", j + 1, t1, xn, j + 2, False, None, False)
                g, d = self.jump[j + 1]
                with np.errstate(over="ignore"):
                    self.x_right[j + 1] = (1.0 + g) * xn + d
                if not math.isfinite(self.x_right[j + 1]):
                    raise NumericalError(f"state became non-finite at t={t1}")
            else:
                self.x_right[j + 1] = xn
        last = N - 1
        self.hit_jump = False
        self.f_right[last] = self.rhs("node", last, times[last], self.x_right[last], N, False, None, True)
        if not self.is_impulse[last]:
            if self.hit_jump and last:
                self.f_left[last] = self.rhs("node", last, times[last], self.x_left[last], N, False, None, False)
            else:
                self.f_left[last] = self.f_right[last]
        elif last == 0:
            self.f_left[last] = self.f_right[last]
        return Trajectory(
            self.model, self.history, self.times, self.x_left, self.x_right,
            self.f_left, self.f_right, self.is_impulse, self.h, self.sigma_bar,
        )


def integrate(model, history, t_end, h, sigma_bar=None) -> Trajectory:
    """Integrate from ``history.alpha`` to ``t_end`` with nominal step ``h``.

    ``history`` may be an :class:`InitialHistory`, a number, or a callable
    of time (the start time is then 0).
    """
    if not isinstance(history, InitialHistory):
        history = InitialHistory(0.0, history)
    if not t_end > history.alpha:
        raise ValueError("t_end must exceed the start time")
    if not h > 0:
        raise ValueError("step must be positive")
    eta = model.schedule.eta
    if h > eta / 4 * (1 + 1e-12):
        raise ValueError(f"step h={h} exceeds eta/4={eta / 4}")
    if sigma_bar is None:
        sigma_bar = model.delay_bound()
    return _Integrator(model, history, float(t_end), float(h), float(sigma_bar)).run()


def pairwise_gap(traj1, traj2, window=None):
    """(times, |x1 - x2|) at shared nodes inside ``window`` using left values."""
    if traj1.times.shape != traj2.times.shape or not np.array_equal(traj1.times, traj2.times):
        raise ValueError("trajectories do not share a time grid")
    t = traj1.times
    mask = np.ones(t.shape, dtype=bool)
    if window is not None:
        mask = (t >= window[0]) & (t <= window[1])
    return t[mask], np.abs(traj1.x_left[mask] - traj2.x_left[mask])
