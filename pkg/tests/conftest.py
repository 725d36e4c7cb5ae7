import copy

import pytest

from hemap import cases
from hemap.analyze import analyze
from hemap.model import load_model


def make_config(a="1", terms=(), T=1.0, P=1, theta=1.0, offsets=(0.0,), gamma=(0.0,), delta=(0.0,), **extra):
    doc = {
        "a": a,
        "T": T,
        "terms": [dict(t) for t in terms],
        "impulses": {
            "t0": 0.0,
            "period_count": P,
            "period_length": theta,
            "offsets": list(offsets),
            "gamma": list(gamma),
            "delta": list(delta),
        },
    }
    doc.update(extra)
    return doc


GOLDEN = 0.6180339887498949


@pytest.fixture(scope="session")
def cfg56():
    return cases.config("example56")


@pytest.fixture(scope="session")
def model56(cfg56):
    return load_model(copy.deepcopy(cfg56))


@pytest.fixture(scope="session")
def report56(model56):
    return analyze(model56)


@pytest.fixture(scope="session")
def model1():
    return load_model(cases.config("example1"))


@pytest.fixture(scope="session")
def golden_model():
    # a = 1, one term b = 1, alpha = 1, nothing else; equilibrium solves x = 1/(1+x)
    cfg = make_config(terms=[{"b": "1", "alpha": 1}], P=1, theta=1.0, gamma=(0.0,), delta=(0.0,))
    return load_model(cfg)


# criterion number -> (passed, detail), filled by the acceptance suite
ACCEPTANCE = {}


@pytest.fixture
def record():
    def rec(number, ok, detail):
        ACCEPTANCE[number] = (bool(ok), detail)
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}")
        return ok

    return rec


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
