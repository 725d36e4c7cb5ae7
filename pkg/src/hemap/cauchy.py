"""Cauchy function of the linear impulsive equation y' = -a(t) y, y(t_k+) = (1 + gamma_k) y(t_k).

Convention: H(t, s) propagates a left value at s to a left value at t, so
it collects the multipliers of all impulses with s <= t_k < t.  At s == t
no multiplier is taken.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import AssumptionViolation
from .quad import adaptive_simpson

PRODUCT_TOL = 1e-12


def gamma_product(schedule, q: int, p: int) -> float:
    """prod_{i=q}^{p} (1 + gamma_i), using whole periods of the pattern."""
    if p < q:
        raise ValueError(f"gamma_product needs p >= q (got q={q}, p={p})")
    P = schedule.period_count
    count = p - q + 1
    whole, rest = divmod(count, P)
    value = schedule.period_product**whole if whole else 1.0
    r0 = q % P
    for j in range(rest):
        value *= 1.0 + schedule.gamma[(r0 + j) % P]
    return value


@dataclass(frozen=True)
class GammaExtrema:
    Gamma_M: float
    Gamma_L: float
    gamma_L: float

    @property
    def A(self):
        return max(self.Gamma_M, 1.0)

    @property
    def B(self):
        return min(self.Gamma_L, 1.0)


def gamma_extrema(schedule) -> GammaExtrema:
    """Supremum and infimum of gamma_product over all windows, and min gamma."""
    pi0 = schedule.period_product
    if abs(pi0 - 1.0) > PRODUCT_TOL:
        which = "Gamma_M is infinite" if pi0 > 1 else "Gamma_L is zero"
        raise AssumptionViolation(
            f"impulse multipliers over one period multiply to {pi0:.12g} != 1, so {which}"
        )
    P = schedule.period_count
    vals = []
    for q in range(P):
        acc = 1.0
        for p in range(q, q + 2 * P):
            acc *= 1.0 + schedule.gamma[p % P]
            vals.append(acc)
    return GammaExtrema(max(vals), min(vals), schedule.gamma_L)


def integral_a(model, s: float, t: float, rtol=1e-10) -> float:
    """int_s^t a(r) dr, split at impulse instants."""
    if t <= s:
        return 0.0
    cuts = [s] + [imp[1] for imp in model.schedule.impulses_in(s, t) if imp[1] < t] + [t]
    return sum(adaptive_simpson(model.a, lo, hi, rtol=rtol) for lo, hi in zip(cuts, cuts[1:]) if hi > lo)


def jump_factor(schedule, s, t, include_s=True):
    """Product of (1 + gamma_k) over impulses in [s, t) (or (s, t) when not include_s)."""
    if t <= s:
        return 1.0
    k0 = schedule.first_index_at_or_after(s) if include_s else schedule.first_index_after(s)
    k1 = schedule.first_index_at_or_after(t) - 1
    if k1 < k0:
        return 1.0
    return gamma_product(schedule, k0, k1)


def cauchy_H(model, t: float, s: float, include_s=True) -> float:
    """Cauchy function H(t, s) for s <= t.

    ``include_s=False`` gives the right limit H(t, s+), used for the
    impulse increments delta_k which act after the jump at s.
    """
    if s > t:
        raise ValueError(f"cauchy_H requires s <= t (got s={s}, t={t})")
    if s == t:
        return 1.0
    return jump_factor(model.schedule, s, t, include_s) * math.exp(-integral_a(model, s, t))


def H_bounds(a_L, a_M, extrema, t, s):
    """(lower, upper) = (B e^{-a_M (t-s)}, A e^{-a_L (t-s)})."""
    d = t - s
    return extrema.B * math.exp(-a_M * d), extrema.A * math.exp(-a_L * d)


def constant_M(a_L, eta, extrema):
    """Shift-sensitivity constant max{2/a_L, Gamma_M [2/a_L + (1+gamma_L)^-1 (1 + 2/(a_L eta))]}."""
    g = extrema
    return max(2.0 / a_L, g.Gamma_M * (2.0 / a_L + (1.0 + 2.0 / (a_L * eta)) / (1.0 + g.gamma_L)))


def impulse_decay_sum(schedule, rate, t, cutoff=1e-16):
    """sum_{t_k < t} exp(-rate (t - t_k)), truncated once terms drop below ``cutoff``."""
    k = schedule.first_index_at_or_after(t) - 1
    total = 0.0
    while True:
        term = math.exp(-rate * (t - schedule.time(k)))
        if term < cutoff:
            return total
        total += term
        k -= 1


def impulse_sum_bound(rate, eta):
    return 1.0 / (1.0 - math.exp(-rate * eta))

