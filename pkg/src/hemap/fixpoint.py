"""Picard iteration of the integral operator on a finite time window.

A candidate solution lives on a grid over [T_lo, T_hi] that contains every
impulse instant as a node.  Between impulses it is interpolated by a cubic
spline; outside the window it is clamped to the endpoint values.

The operator is evaluated as the solution of the linear impulsive problem
y' = -a(t) y + g(t), y(t_k+) = (1 + gamma_k) y(t_k) + delta_k started from
zero at T_lo - W, where g is the nonlinear forcing built from the
candidate.  Per cell the variation-of-constants integral uses Simpson's
rule with the exact exponential weights, so panels never cross an impulse.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import AssumptionViolation, ConvergenceError, NumericalError
from . import sim
from .sim import KINK, ORDINARY, distributed_delay

_SNAP = 0.25  # impulses closer than this fraction of h replace a uniform node
_NODE_TOL = 1e-11


def grid_nodes(schedule, lo, hi, h, extra=()):
    return sim.grid_nodes(schedule, lo, hi, h, snap=_SNAP, extra=extra)


class GridFunction:
    """Piecewise-smooth function sampled on nodes with two-sided values at impulses.

    ``impulse_index`` holds the impulse index at impulse nodes, KINK at
    nodes where only the derivative may jump, and ORDINARY elsewhere.
    """

    def __init__(self, times, left, right, impulse_index):
        self.times = np.asarray(times, dtype=float)
        self.left = np.asarray(left, dtype=float)
        self.right = np.asarray(right, dtype=float)
        self.impulse_index = np.asarray(impulse_index)
        if not (self.times.shape == self.left.shape == self.right.shape == self.impulse_index.shape):
            raise ValueError("GridFunction arrays must share one shape")
        self._build()

    @classmethod
    def constant(cls, schedule, lo, hi, h, value, extra=()):
        times, kind = grid_nodes(schedule, lo, hi, h, extra)
        vals = np.full(times.shape, float(value))
        return cls(times, vals, vals.copy(), kind)

    @property
    def window(self):
        return float(self.times[0]), float(self.times[-1])

    @property
    def is_impulse(self):
        return self.impulse_index > KINK

    def _build(self):
        # one spline per smooth cell, flattened into a single piecewise cubic;
        # cells end at impulses and at marked kinks
        t = self.times
        cuts = np.flatnonzero(self.impulse_index[1:-1] != ORDINARY) + 1
        starts = np.concatenate([[0], cuts])
        ends = np.concatenate([cuts, [len(t) - 1]])
        coef = np.zeros((4, len(t) - 1))
        for s, e in zip(starts, ends):
            if e == s:
                continue
            y = self.left[s : e + 1].copy()
            y[0] = self.right[s]
            coef[:, s:e] = CubicSpline(t[s : e + 1], y).c
        self._coef = coef

    def __call__(self, u, right=False):
        """Evaluate at ``u``; ``right`` (bool or array) selects right limits at impulses."""
        scalar = np.ndim(u) == 0
        u = np.atleast_1d(np.asarray(u, dtype=float))
        right = np.broadcast_to(np.asarray(right, dtype=bool), u.shape)
        t = self.times
        n = len(t)
        uc = np.clip(u, t[0], t[-1])
        # arguments within round-off of a node are read as that node
        tol = _NODE_TOL * np.maximum(1.0, np.abs(uc))
        near = np.clip(np.searchsorted(t, uc), 1, n - 1)
        near = np.where(np.abs(t[near - 1] - uc) < np.abs(t[near] - uc), near - 1, near)
        on_node = np.abs(t[near] - uc) <= tol
        i_r = np.searchsorted(t, uc, side="right") - 1
        i_l = np.searchsorted(t, uc, side="left") - 1
        idx = np.clip(np.where(right, i_r, i_l), 0, n - 2)
        d = uc - t[idx]
        c = self._coef
        out = ((c[0, idx] * d + c[1, idx]) * d + c[2, idx]) * d + c[3, idx]
        out = np.where(on_node, np.where(right, self.right[near], self.left[near]), out)
        out = np.where(u < t[0], self.right[0], out)
        out = np.where(u > t[-1], self.left[-1], out)
        return float(out[0]) if scalar else out

    def restrict(self, lo, hi):
        """(times, left, right) of the nodes in [lo, hi] (up to round-off in node placement)."""
        eps = 1e-9 * max(1.0, abs(lo), abs(hi))
        m = (self.times >= lo - eps) & (self.times <= hi + eps)
        return self.times[m], self.left[m], self.right[m]

    def sup_distance(self, other):
        """max over nodes of left differences and right differences at impulses."""
        if not np.array_equal(self.times, other.times):
            raise ValueError("grid functions live on different grids")
        dl = np.max(np.abs(self.left - other.left))
        imp = self.is_impulse
        dr = np.max(np.abs(self.right[imp] - other.right[imp])) if imp.any() else 0.0
        return float(max(dl, dr))


def truncation_window(model, report, tol):
    """Smallest W whose neglected tail A e^{-a_L W} [sum(b_M + c_M + H_M)/a_L + delta_bar/(1 - e^{-a_L eta})] is <= tol."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    a_L = report.a_L
    K = sum(b + c + h for b, c, h in zip(report.b_M, report.c_M, report.H_M_global)) / a_L
    K += report.delta_abs_sup / (1.0 - math.exp(-a_L * report.eta))
    bound = report.A * K
    if bound <= tol:
        return 0.0
    return math.log(bound / tol) / a_L


def padded_window(model, report, t_lo, t_hi, trunc_tol=1e-8):
    """Grid window reaching a whole number of time units past W + sigma_bar below ``t_lo``."""
    W = truncation_window(model, report, trunc_tol)
    return t_lo - math.ceil(W + report.sigma_bar), t_hi


def _cumulative_a(a, times, mids):
    """int_{t_0}^{times[j]} a and int_{t_0}^{mids[j]} a by Simpson on each half cell."""
    q1 = 0.5 * (times[:-1] + mids)
    q3 = 0.5 * (mids + times[1:])
    fa = np.broadcast_to(a(times), times.shape)
    fm = np.broadcast_to(a(mids), mids.shape)
    f1 = np.broadcast_to(a(q1), q1.shape)
    f3 = np.broadcast_to(a(q3), q3.shape)
    half = 0.5 * np.diff(times)
    first = half / 6.0 * (fa[:-1] + 4.0 * f1 + fm)
    second = half / 6.0 * (fm + 4.0 * f3 + fa[1:])
    at_nodes = np.concatenate([[0.0], np.cumsum(first + second)])
    at_mids = at_nodes[:-1] + first
    return at_nodes, at_mids


def forcing(model, phi, s, right, h_max, breaks, panels=1):
    """Nonlinear forcing g(s) = sum_i b_i/(1+phi^alpha) + c_i int v/(1+phi^beta) - H_i(s, phi)."""
    s = np.asarray(s, dtype=float)
    right = np.broadcast_to(np.asarray(right, dtype=bool), s.shape)
    g = np.zeros(s.shape)
    look = lambda u, r: phi(u, r)
    with np.errstate(invalid="ignore"):
        for term in model.terms:
            b = np.broadcast_to(term.b(s), s.shape)
            if np.any(b != 0):
                y = phi(s - term.tau(s), right)
                g += b / (1.0 + np.power(y, term.alpha))
            c = np.broadcast_to(term.c(s), s.shape)
            if np.any(c != 0):
                g += c * distributed_delay(term.v, term.beta, model.T, s, look, breaks, h_max, panels)
            if not (term.harvest.is_constant and term.harvest(0.0, 0.0) == 0.0):
                y = phi(s - term.sigma(s), right)
                g -= term.harvest(s, y)
    if not np.all(np.isfinite(g)):
        raise NumericalError("non-finite forcing in the fixed-point operator")
    return g


def apply_F(model, report, phi, W, h=None):
    """One application of the operator on the grid of ``phi``."""
    lo, hi = phi.window
    out_t = phi.times
    if h is None:
        h = float(np.median(np.diff(out_t)))
    pre_n = int(math.ceil(W / h - 1e-9))
    sched = model.schedule
    if pre_n:
        start = lo - pre_n * h
        pre_t, pre_k = grid_nodes(sched, start, lo, h, sim.rough_points(model, start, lo, h))
        times = np.concatenate([pre_t[:-1], out_t])
        kind = np.concatenate([pre_k[:-1], phi.impulse_index])
    else:
        times, kind = out_t, phi.impulse_index
    first_out = len(times) - len(out_t)
    imp = kind > KINK
    two_sided = kind != ORDINARY
    mids = 0.5 * (times[:-1] + times[1:])
    A_n, A_m = _cumulative_a(model.a, times, mids)
    E = np.exp(-(A_n[1:] - A_n[:-1]))
    Em = np.exp(-(A_n[1:] - A_m))
    T = model.T
    # every node of phi cuts the inner integral, so its kinks never sit inside a panel
    brk = sched.times_in(times[0] - report.sigma_bar - T - 1.0, hi)
    brk = np.unique(np.concatenate([brk, phi.times]))
    gl = forcing(model, phi, times, False, h, brk)
    gm = forcing(model, phi, mids, False, h, brk)
    gr = gl.copy()
    if two_sided.any():
        gr[two_sided] = forcing(model, phi, times[two_sided], True, h, brk)
    dt = np.diff(times)
    inc = dt / 6.0 * (E * gr[:-1] + 4.0 * Em * gm + gl[1:])
    gam = np.array([sched.gamma_k(k) if k > KINK else 0.0 for k in kind])
    dl = np.array([sched.delta_k(k) if k > KINK else 0.0 for k in kind])
    n = len(times)
    yl = np.empty(n)
    yr = np.empty(n)
    yl[0] = yr[0] = 0.0
    E_l, inc_l, imp_l, gam_l, dl_l = E.tolist(), inc.tolist(), imp.tolist(), gam.tolist(), dl.tolist()
    y = 0.0
    for j in range(n - 1):
        y = E_l[j] * y + inc_l[j]
        yl[j + 1] = y
        if imp_l[j + 1]:
            y = (1.0 + gam_l[j + 1]) * y + dl_l[j + 1]
        yr[j + 1] = y
    if not np.all(np.isfinite(yl)):
        raise NumericalError("non-finite value in the fixed-point operator")
    return GridFunction(out_t, yl[first_out:], yr[first_out:], phi.impulse_index)


def iterate_to_fixed_point(model, report, t_lo, t_hi, h_g=0.01, tol=1e-6, trunc_tol=1e-8,
                           max_iter=200, phi0=None, callback=None, require_certificate=True):
    """Picard iteration from the band midpoint; returns (phi, residuals).

    ``callback(n, phi)`` is called with every new iterate.  With
    ``require_certificate=False`` the iteration runs even when the
    contraction bound is not certified, and may then fail to converge.
    """
    if require_certificate and not report.existence_ok:
        raise AssumptionViolation(
            f"existence conditions fail (M2={report.M2:.6g}, contraction lhs={report.existence_lhs:.6g})"
        )
    W = truncation_window(model, report, trunc_tol)
    if phi0 is None:
        kinks = sim.rough_points(model, t_lo, t_hi, h_g)
        phi = GridFunction.constant(model.schedule, t_lo, t_hi, h_g, 0.5 * (report.M1 + report.M2), kinks)
    else:
        phi = phi0
    residuals = []
    for n in range(1, max_iter + 1):
        new = apply_F(model, report, phi, W, h_g)
        residuals.append(new.sup_distance(phi))
        phi = new
        if callback is not None:
            callback(n, phi)
        if residuals[-1] < tol:
            return phi, residuals
    raise ConvergenceError(f"no convergence in {max_iter} iterations (last residual {residuals[-1]:.3e})", residuals)
