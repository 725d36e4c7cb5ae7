"""Decay-rate certificates from the impulsive Halanay inequality, and empirical rate fits."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .cauchy import gamma_extrema, jump_factor
from .errors import AssumptionViolation, NumericalError


@dataclass(frozen=True)
class HalanayProblem:
    """D+y <= -R y + S sup_{[t-tau, t]} y, with jumps bounded by the factor c."""

    R: float
    S: float
    tau: float
    c: float = 1.0

    def __post_init__(self):
        if not (self.R > 0 and self.S > 0):
            raise ValueError("R and S must be positive")
        if not self.tau >= 0:
            raise ValueError("tau must be nonnegative")
        if not self.c >= 1:
            raise ValueError("c must be at least 1")

    @property
    def feasible(self):
        return self.c < self.R / self.S

    def g(self, lam):
        return lam + self.S * self.c * math.exp(lam * self.tau) - self.R


def from_report(report):
    """Instance used for exponential attractivity: R = a_L, S = sum(b_M K* + c_M G* + L), tau = sigma_bar."""
    return HalanayProblem(
        R=report.a_L,
        S=report.delay_sum,
        tau=report.sigma_bar,
        c=max(1.0 / (1.0 + report.gamma_L), 1.0),
    )


def solve_rate(p: HalanayProblem) -> float:
    """Largest lambda with lambda <= R - S c e^{lambda tau}."""
    if not p.feasible:
        raise AssumptionViolation(
            f"condition d1 fails: c = {p.c:.12g} is not below R/S = {p.R / p.S:.12g}"
        )
    if p.tau == 0:
        return float(p.R - p.S * p.c)
    lo, hi = 0.0, p.R
    # bisect to floating-point resolution; g is strictly increasing
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if p.g(mid) < 0:
            lo = mid
        else:
            hi = mid
    return lo if abs(p.g(lo)) <= abs(p.g(hi)) else hi


def certified_envelope(p, ybar0, schedule, T0, t, include_t=True):
    """(exact, simplified) upper bounds for y(t), t >= T0.

    ``exact`` multiplies (1 + gamma_k) over T0 < t_k <= t; with
    ``include_t=False`` the impulse at t itself is left out, which is the
    bound for the left limit y(t-).  ``simplified`` uses Gamma_M in place of
    the product.
    """
    if t < T0:
        raise ValueError("certified_envelope needs t >= T0")
    lam = solve_rate(p)
    decay = math.exp(-lam * (t - T0))
    prod = jump_factor(schedule, T0, t, include_s=False)
    if include_t and t > T0 and schedule.is_impulse(t):
        prod *= 1.0 + schedule.gamma_k(schedule.first_index_at_or_after(t))
    exact = ybar0 * prod * decay
    simplified = ybar0 * gamma_extrema(schedule).Gamma_M * decay
    return exact, simplified


def envelope_margin(p, schedule, ybar0, T0, t, gap_left, gap_right=None):
    """Smallest envelope - gap over the sample times t >= T0 (negative means a violation).

    Left gaps are held against the bound without the jump at t itself,
    right gaps against the full product.
    """
    t = np.asarray(t, dtype=float)
    keep = t >= T0
    t = t[keep]
    lam = solve_rate(p)
    decay = ybar0 * np.exp(-lam * (t - T0))
    imps = schedule.impulses_in(T0, float(t.max())) if len(t) else []
    tk = np.array([it[1] for it in imps])
    cum = np.concatenate([[1.0], np.cumprod([1.0 + it[2] for it in imps])])
    tol = 1e-12 * np.maximum(1.0, np.abs(t))
    before = cum[np.searchsorted(tk, t - tol, side="left")] if len(tk) else np.ones(len(t))
    upto = cum[np.searchsorted(tk, t + tol, side="right")] if len(tk) else np.ones(len(t))
    margin = np.min(before * decay - np.asarray(gap_left, dtype=float)[keep])
    if gap_right is not None:
        margin = min(margin, np.min(upto * decay - np.asarray(gap_right, dtype=float)[keep]))
    return float(margin)


class EmpiricalRate(NamedTuple):
    rate: float
    intercept: float

    @property
    def identical(self):
        return math.isinf(self.rate)


def window_sup(t, g, width):
    """sup of g over [t_i, t_i + width] for every t_i whose window fits in the record."""
    t = np.asarray(t, dtype=float)
    g = np.asarray(g, dtype=float)
    keep = t + width <= t[-1] + 1e-12 * max(1.0, abs(t[-1]))
    start = np.flatnonzero(keep)
    end = np.searchsorted(t, t[start] + width * (1 + 1e-14), side="right")
    padded = np.append(g, 0.0)
    idx = np.empty(2 * len(start), dtype=np.int64)
    idx[0::2] = start
    idx[1::2] = end
    sup = np.maximum.reduceat(padded, idx)[0::2]
    return t[start], sup


def fit_empirical_rate(t, g=None, width=0.0, rel_floor=1e-11, min_points=10):
    """Exponential rate of a decaying gap record.

    Accepts ``(t, g)`` arrays or a single sequence of ``(t, g)`` pairs.
    The record is replaced by its window-sup with window ``width``; points
    below ``rel_floor`` times the record maximum are treated as round-off and
    the record is cut there.  The slope of log(gap) against t over the second
    half of what remains gives the rate.
    """
    if g is None:
        arr = np.asarray(t, dtype=float)
        t, g = arr[:, 0], arr[:, 1]
    t = np.asarray(t, dtype=float)
    g = np.abs(np.asarray(g, dtype=float))
    if len(t) != len(g):
        raise ValueError("t and g must have the same length")
    if len(t) and not np.any(g > 0):
        return EmpiricalRate(math.inf, -math.inf)
    ts, w = window_sup(t, g, width) if width > 0 else (t, g)
    floor = rel_floor * float(np.max(w)) if len(w) else 0.0
    bad = np.flatnonzero(w <= floor)
    n = int(bad[0]) if len(bad) else len(w)
    ts, w = ts[:n], w[:n]
    half = len(ts) // 2
    ts, w = ts[half:], w[half:]
    if len(ts) < min_points:
        raise NumericalError(f"only {len(ts)} usable gap points (need {min_points})")
    slope, intercept = np.polyfit(ts, np.log(w), 1)
    return EmpiricalRate(float(-slope), float(intercept))
