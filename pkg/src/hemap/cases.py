"""Pinned worked cases shipped with the package."""

import json
import math
from importlib import resources

CASES = ("example1", "example56")

# acceptance numbers the reproduce command checks against
EXAMPLE56_PINS = {
    "M1": (2.1736, 1e-3),
    "M2": (0.0027, 5e-4),
    "existence_lhs": (0.8956, 1e-3),
    "attractivity_lhs": (0.8956, 1e-3),
}
EXAMPLE56_HISTORIES = (0.3, 0.8, 1.5, 2.5)
EXAMPLE1_HISTORIES = (0.5, 1.0, 5.0, 50.0)


def config(name):
    """The JSON document for a pinned case, as a dict."""
    if name not in CASES:
        raise KeyError(name)
    text = resources.files("hemap").joinpath("data", f"{name}.json").read_text()
    return json.loads(text)


def example1_closed_form(x0, n):
    """x(n-) for the scalar counterexample when the jump at t = 0 is applied."""
    e1 = math.exp(-1.0)
    return math.exp(-n) * x0 - e1 * (1.0 - math.exp(-n)) / (1.0 - e1)
