import math

import numpy as np
import pytest

from hemap.cases import example1_closed_form
from hemap.cauchy import cauchy_H
from hemap.errors import ConfigError, NumericalError
from hemap.model import InitialHistory, load_model
from hemap.sim import delay_breaks, integrate, pairwise_gap

from conftest import GOLDEN, make_config

LIMIT = -math.exp(-1) / (1 - math.exp(-1))


def smooth_dde():
    term = {
        "b": "1", "alpha": 2, "tau": "0.5", "c": "0.5", "beta": 1, "v": "2",
        "harvest": "0.1*abs(x)/(1 + abs(x))", "harvest_lipschitz": 0.1, "sigma": "0.3",
    }
    return load_model(make_config(a="2 + sin(t)^2", T=0.5, terms=[term], offsets=[0.5], delta=[0.2]))


@pytest.mark.parametrize("x0", [0.5, 1.0, 5.0, 50.0])
def test_example1_closed_form(model1, x0):
    traj = integrate(model1, x0, 10.0, 0.01)
    for n in range(1, 11):
        assert traj.evaluate_at(float(n)) == pytest.approx(example1_closed_form(x0, n), abs=1e-8)
    assert np.all(traj.x_right[traj.times >= 4.0] < 0)


def test_pure_decay():
    m = load_model(make_config(a="1"))
    traj = integrate(m, 1.0, 1.0, 0.01)
    assert abs(traj.evaluate_at(1.0) - math.exp(-1)) < 1e-10


def test_golden_equilibrium(golden_model):
    traj = integrate(golden_model, GOLDEN, 10.0, 0.01)
    assert np.max(np.abs(traj.x_left - GOLDEN)) < 1e-6


def test_evaluate_at_one_sided(model1):
    # x(0+) = 1 after the jump at the start time
    traj = integrate(model1, 2.0, 3.0, 0.01)
    assert traj.evaluate_at(1.0, "left") == pytest.approx(math.exp(-1), abs=1e-10)
    assert traj.evaluate_at(1.0, "right") == pytest.approx(math.exp(-1) - 1, abs=1e-10)
    assert traj.evaluate_at(1.3, "left") == traj.evaluate_at(1.3, "right")
    assert traj.evaluate_at(-0.5) == 2.0
    with pytest.raises(ValueError):
        traj.evaluate_at(3.5)
    with pytest.raises(ValueError):
        traj.evaluate_at(-1.5)


def test_start_jump_convention(model1):
    traj = integrate(model1, 1.0, 2.0, 0.01)
    assert traj.x_left[0] == 1.0 and traj.x_right[0] == 0.0
    assert traj.evaluate_at(1.0) == pytest.approx(0.0, abs=1e-12)
    assert traj.evaluate_at(1.0, "right") == pytest.approx(-1.0, abs=1e-12)


def test_jump_law_exact(model56):
    traj = integrate(model56, 0.5, 6.0, 0.01)
    s = model56.schedule
    assert len(traj.jumps) == 7
    for t, (left, right) in traj.jumps.items():
        k = s.first_index_at_or_after(t)
        assert right - ((1 + s.gamma_k(k)) * left + s.delta_k(k)) == 0.0


def test_order_of_accuracy():
    m = smooth_dde()
    vals = [integrate(m, 1.0, 3.0, h).evaluate_at(3.0) for h in (0.04, 0.02, 0.01, 0.005)]
    d = np.abs(np.diff(vals))
    assert d[0] / d[1] >= 8 and d[1] / d[2] >= 8


def test_linear_consistency():
    m = load_model(make_config(a="1 + sin(t)^2", P=2, theta=2.0, offsets=[0.3, 1.1], gamma=[1.0, -0.5], delta=[0.0, 0.0]))
    traj = integrate(m, InitialHistory(0.2, 1.5), 9.0, 0.01)
    for t in (0.9, 1.1, 4.25, 9.0):
        assert traj.evaluate_at(t) == pytest.approx(1.5 * cauchy_H(m, t, 0.2), rel=1e-8)


def test_history_used_before_start():
    m = smooth_dde()
    hist = InitialHistory(0.0, lambda u: 1.0 + np.asarray(u) ** 2)
    traj = integrate(m, hist, 1.0, 0.01)
    assert traj.evaluate_at(-0.4) == pytest.approx(1.16)


def test_pairwise_gaps(model1, model56):
    a = integrate(model1, 1.0, 5.0, 0.01)
    b = integrate(model1, 2.0, 5.0, 0.01)
    t, g = pairwise_gap(a, b)
    for n in range(1, 6):
        assert g[np.argmin(np.abs(t - n))] == pytest.approx(math.exp(-n), rel=1e-9)
    t, g = pairwise_gap(a, integrate(model1, 1.0, 5.0, 0.01), (1.0, 4.0))
    assert t[0] >= 1.0 and t[-1] <= 4.0 and not g.any()
    with pytest.raises(ValueError):
        pairwise_gap(a, integrate(model1, 1.0, 5.0, 0.02))
    x = integrate(model56, 0.5, 20.0, 0.01)
    y = integrate(model56, 2.0, 20.0, 0.01)
    assert pairwise_gap(x, y)[1][-1] < 1e-3


def test_step_and_history_errors(model56):
    with pytest.raises(ValueError, match="eta/4"):
        integrate(model56, 1.0, 2.0, 0.3)
    with pytest.raises(ConfigError, match="history"):
        integrate(model56, 1.0, 2.0, 0.01, sigma_bar=0.05)


def test_blow_up_is_numerical_error():
    m = load_model(make_config(a="1", gamma=[1e300], delta=[0.0]))
    with pytest.raises(NumericalError):
        integrate(m, 1.0, 5.0, 0.01)


def test_delay_crossings(model56):
    pts = delay_breaks(model56, 0.0, 6.0, 0.01)
    tk = np.arange(-1.0, 7.0)
    for s in pts:
        term = model56.terms[0]
        u = [s - term.tau(s), s - term.sigma(s)]
        assert min(abs(v - tk).min() for v in u) < 1e-12
    assert len(pts) >= 10


def test_order_with_variable_delays(model56):
    # crossings and coefficient kinks become nodes, so fourth order survives
    vals = [integrate(model56, 0.8, 4.0, h).evaluate_at(4.0) for h in (0.04, 0.02, 0.01)]
    d = np.abs(np.diff(vals))
    assert d[0] / d[1] >= 8
