import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hemap.errors import AssumptionViolation, NumericalError
from hemap.halanay import (
    HalanayProblem,
    certified_envelope,
    envelope_margin,
    fit_empirical_rate,
    from_report,
    solve_rate,
    window_sup,
)
from hemap.model import ImpulseSchedule
from hemap.sim import integrate, pairwise_gap

# root of lam + 4.4778 e^lam - 5 (50-digit bisection)
LAM_ROUNDED = 0.09177958
# same root with the unrounded delay sum of the worked example
LAM_56 = 0.0917967064374918


def test_no_delay():
    assert solve_rate(HalanayProblem(5, 2, 0.0, 2)) == 1.0


def test_worked_example_rate(report56):
    assert solve_rate(HalanayProblem(5, 2.2389, 1.0, 2)) == pytest.approx(LAM_ROUNDED, abs=1e-6)
    p = from_report(report56)
    assert (p.R, p.tau, p.c) == (5.0, 1.0, 2.0)
    assert solve_rate(p) == pytest.approx(LAM_56, abs=1e-13)


def test_infeasible():
    with pytest.raises(AssumptionViolation, match="d1"):
        solve_rate(HalanayProblem(1, 1, 0.0, 1))
    with pytest.raises(AssumptionViolation, match="d1"):
        solve_rate(HalanayProblem(5, 2, 1.0, 2.5))


def test_problem_validation():
    for args in [(0, 1, 0), (1, -1, 0), (1, 1, -0.5), (1, 0.1, 0, 0.5)]:
        with pytest.raises(ValueError):
            HalanayProblem(*args)


feasible = st.tuples(
    st.floats(0.1, 50.0), st.floats(0.01, 0.99), st.just(0.0) | st.floats(0.01, 5.0), st.floats(1.0, 3.0)
).map(lambda v: HalanayProblem(v[0], v[0] * v[1] / v[3], v[2], v[3]))


@settings(max_examples=300, deadline=None)
@given(feasible)
def test_root(p):
    lam = solve_rate(p)
    assert 0 < lam <= p.R
    assert abs(p.g(lam)) <= 1e-10 * max(1.0, p.R)
    assert p.g(lam + 1e-6) > 0


@settings(max_examples=100, deadline=None)
@given(feasible, st.floats(1.01, 1.5))
def test_monotone(p, f):
    lam = solve_rate(p)
    grow = lambda **kw: HalanayProblem(**{**p.__dict__, **kw})
    for q in (grow(S=p.S * f), grow(c=p.c * f)):
        if q.feasible:
            assert solve_rate(q) < lam
    if p.tau > 0:
        assert solve_rate(grow(tau=p.tau * f)) < lam
    assert solve_rate(grow(R=p.R * f)) > lam


def test_envelope_without_impulses():
    p = HalanayProblem(5, 2, 1.0, 1)
    sched = ImpulseSchedule(0.0, 1, 10.0, (0.0,), (0.0,), (0.3,))
    lam = solve_rate(p)
    exact, simple = certified_envelope(p, 3.0, sched, 1.0, 4.0)
    assert exact == pytest.approx(3.0 * math.exp(-3 * lam), rel=1e-15)
    assert simple >= exact


def test_envelope_worked_schedule(model56, report56):
    p = from_report(report56)
    lam = solve_rate(p)
    exact, simple = certified_envelope(p, 1.0, model56.schedule, 0.0, 2.5)
    assert exact == pytest.approx(math.exp(-2.5 * lam), rel=1e-14)
    assert simple == pytest.approx(2 * math.exp(-2.5 * lam), rel=1e-14)
    # at t = 1 the jump at 1 is counted for y(1+) but not for y(1-)
    right, _ = certified_envelope(p, 1.0, model56.schedule, 0.0, 1.0)
    left, _ = certified_envelope(p, 1.0, model56.schedule, 0.0, 1.0, include_t=False)
    assert right == pytest.approx(2 * left, rel=1e-15)
    with pytest.raises(ValueError):
        certified_envelope(p, 1.0, model56.schedule, 1.0, 0.5)


def test_synthetic_rate():
    t = np.linspace(0.0, 20.0, 2001)
    fit = fit_empirical_rate(t, 3 * np.exp(-0.5 * t))
    assert fit.rate == pytest.approx(0.5, abs=1e-6)
    pairs = np.column_stack([t, 3 * np.exp(-0.5 * t)])
    assert fit_empirical_rate(pairs).rate == pytest.approx(0.5, abs=1e-6)


def test_window_sup_handles_crossings():
    t = np.linspace(0.0, 20.0, 4001)
    g = np.exp(-0.7 * t) * np.abs(np.sin(3 * t))
    ts, w = window_sup(t, g, 1.5)
    assert ts[-1] <= 18.5 + 1e-9
    assert np.all(w >= g[: len(w)])
    assert fit_empirical_rate(t, g, width=1.5).rate == pytest.approx(0.7, rel=0.05)


def test_identical_trajectories():
    fit = fit_empirical_rate(np.arange(20.0), np.zeros(20))
    assert fit.identical and fit.rate == math.inf


def test_too_few_points():
    with pytest.raises(NumericalError):
        fit_empirical_rate(np.arange(8.0), np.exp(-np.arange(8.0)))


def test_counterexample_gap_rate(model1):
    a = integrate(model1, 1.0, 10.0, 0.01)
    b = integrate(model1, 2.0, 10.0, 0.01)
    t, g = pairwise_gap(a, b)
    assert fit_empirical_rate(t, g).rate == pytest.approx(1.0, abs=1e-3)


def test_envelope_margin_matches_pointwise(model56, report56):
    p = from_report(report56)
    t = np.array([0.0, 0.5, 1.0, 1.0 + 1e-9, 2.0, 3.7, 6.0])
    exact = np.array([certified_envelope(p, 2.0, model56.schedule, 0.0, u)[0] for u in t])
    left = np.array([certified_envelope(p, 2.0, model56.schedule, 0.0, u, include_t=False)[0] for u in t])
    assert envelope_margin(p, model56.schedule, 2.0, 0.0, t, left, exact) == pytest.approx(0.0, abs=1e-15)
    assert envelope_margin(p, model56.schedule, 2.0, 0.0, t, exact) < 0 or np.array_equal(exact, left)
    assert envelope_margin(p, model56.schedule, 2.0, 0.0, t, 0 * t) > 0
