"""Model data: delay terms, the periodic impulse schedule and JSON loading."""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

from . import expr
from .errors import AssumptionViolation, ConfigError, ExprSyntaxError
from .quad import composite_simpson

ZERO = expr.parse("0")
ONE_ARG = ("t", "s")


@dataclass(frozen=True)
class ImpulseSchedule:
    """Bi-infinite impulse sequence built from one repeating pattern.

    Index ``k = q*P + r`` with ``0 <= r < P`` fires at
    ``t0 + q*period_length + offsets[r]`` with multiplier ``gamma[r]`` and
    increment ``delta[r]``.
    """

    t0: float
    period_count: int
    period_length: float
    offsets: tuple
    gamma: tuple
    delta: tuple

    def __post_init__(self):
        P = self.period_count
        if P < 1:
            raise ConfigError("period_count must be a positive integer")
        if not self.period_length > 0:
            raise ConfigError("period_length must be positive")
        for name in ("offsets", "gamma", "delta"):
            seq = getattr(self, name)
            if len(seq) != P:
                raise ConfigError(f"impulses.{name} must have period_count={P} entries")
            object.__setattr__(self, name, tuple(float(v) for v in seq))
        off = self.offsets
        if off[0] < 0 or off[-1] >= self.period_length:
            raise ConfigError("impulse offsets must lie in [0, period_length)")
        if any(b <= a for a, b in zip(off, off[1:])):
            raise ConfigError("impulse offsets must be strictly increasing")
        if any(not g > -1.0 for g in self.gamma):
            raise ConfigError("gamma must exceed -1 for every impulse")

    # -- indexing --------------------------------------------------------
    def split(self, k):
        q, r = divmod(int(k), self.period_count)
        return q, r

    def time(self, k):
        q, r = self.split(k)
        return self.t0 + q * self.period_length + self.offsets[r]

    def gamma_k(self, k):
        return self.gamma[int(k) % self.period_count]

    def delta_k(self, k):
        return self.delta[int(k) % self.period_count]

    def first_index_after(self, u):
        """Smallest k with t_k > u."""
        q = math.floor((u - self.t0) / self.period_length)
        rel = u - self.t0 - q * self.period_length
        r = bisect.bisect_right(self.offsets, rel)
        k = q * self.period_count + r
        while self.time(k) <= u:
            k += 1
        while self.time(k - 1) > u:
            k -= 1
        return k

    def first_index_at_or_after(self, u):
        """Smallest k with t_k >= u."""
        k = self.first_index_after(u)
        while self.time(k - 1) >= u:
            k -= 1
        return k

    def impulses_in(self, s, t):
        """Impulses with s < t_k <= t as (k, t_k, gamma_k, delta_k), ascending."""
        if t < s:
            raise ValueError("impulses_in requires s <= t")
        out = []
        k = self.first_index_after(s)
        while True:
            tk = self.time(k)
            if tk > t:
                return out
            out.append((k, tk, self.gamma_k(k), self.delta_k(k)))
            k += 1

    def times_in(self, s, t):
        return np.array([imp[1] for imp in self.impulses_in(s, t)])

    def is_impulse(self, u, rtol=1e-12):
        k = self.first_index_at_or_after(u - rtol * max(1.0, abs(u)))
        return abs(self.time(k) - u) <= rtol * max(1.0, abs(u))

    # -- pattern summaries ---------------------------------------------------
    @property
    def gaps(self):
        t = list(self.offsets) + [self.offsets[0] + self.period_length]
        return np.diff(t)

    @property
    def eta(self):
        return float(self.gaps.min())

    @property
    def eta_bar(self):
        return float(self.gaps.max())

    @property
    def gamma_L(self):
        return min(self.gamma)

    @property
    def delta_L(self):
        return min(self.delta)

    @property
    def delta_M(self):
        return max(self.delta)

    @property
    def delta_abs_inf(self):
        return min(abs(d) for d in self.delta)

    @property
    def delta_abs_sup(self):
        return max(abs(d) for d in self.delta)

    @property
    def period_product(self):
        return math.prod(1.0 + g for g in self.gamma)

    def to_dict(self):
        return {
            "t0": self.t0,
            "period_count": self.period_count,
            "period_length": self.period_length,
            "offsets": list(self.offsets),
            "gamma": list(self.gamma),
            "delta": list(self.delta),
        }


@dataclass(frozen=True)
class DelayTerm:
    """One summand of the right-hand side: discrete delay, distributed delay, harvest."""

    b: expr.Expression = ZERO
    alpha: float = 1.0
    tau: expr.Expression = ZERO
    c: expr.Expression = ZERO
    beta: float = 1.0
    v: expr.Expression = expr.parse("1", ONE_ARG)
    harvest: expr.Expression = ZERO
    harvest_lipschitz: float = 0.0
    sigma: expr.Expression = ZERO

    def to_dict(self):
        return {
            "b": self.b.source,
            "alpha": self.alpha,
            "tau": self.tau.source,
            "c": self.c.source,
            "beta": self.beta,
            "v": self.v.source,
            "harvest": self.harvest.source,
            "harvest_lipschitz": self.harvest_lipschitz,
            "sigma": self.sigma.source,
        }


@dataclass(frozen=True)
class InitialHistory:
    """Initial function on [alpha - sigma_bar, alpha].

    ``xi`` is an expression in ``t``, a number, or any vectorised callable.
    """

    alpha: float
    xi: Union[expr.Expression, float, Callable] = 1.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if isinstance(self.xi, (int, float)):
            out = np.full(t.shape, float(self.xi))
        else:
            out = np.asarray(self.xi(t), dtype=float)
            out = np.broadcast_to(out, t.shape).copy()
        return out if out.shape else float(out)

    @classmethod
    def from_text(cls, text, alpha=0.0):
        try:
            return cls(float(alpha), float(text))
        except ValueError:
            return cls(float(alpha), expr.parse(text, ONE_ARG))


@dataclass(frozen=True)
class ModelSpec:
    a: expr.Expression
    terms: tuple
    T: float
    schedule: ImpulseSchedule
    declared_bounds: dict = field(default_factory=dict)
    history: Optional[InitialHistory] = None

    @property
    def m(self):
        return len(self.terms)

    def declared(self, name):
        return self.declared_bounds.get(name)

    def delay_bound(self, samples=10**5, window=1000.0):
        """sigma_bar = max{T, sup tau_i, sup sigma_i}, preferring declared bounds."""
        vals = [self.T]
        for i, term in enumerate(self.terms, start=1):
            for name, e in (("tau", term.tau), ("sigma", term.sigma)):
                d = self.declared(f"{name}{i}")
                vals.append(d[1] if d is not None else expr.estimate_bounds(e, window, samples)[1])
        return float(max(vals))

    def to_dict(self):
        out = {
            "a": self.a.source,
            "T": self.T,
            "terms": [term.to_dict() for term in self.terms],
            "impulses": self.schedule.to_dict(),
        }
        if self.declared_bounds:
            out["declared_bounds"] = {k: list(v) for k, v in self.declared_bounds.items()}
        if self.history is not None and isinstance(self.history.xi, (int, float, expr.Expression)):
            xi = self.history.xi
            out["history"] = {"alpha": self.history.alpha, "xi": xi.source if isinstance(xi, expr.Expression) else str(xi)}
        return out


TERM_KEYS = {"b", "alpha", "tau", "c", "beta", "v", "harvest", "harvest_lipschitz", "sigma"}
TOP_KEYS = {"a", "T", "terms", "impulses", "declared_bounds", "history"}
IMPULSE_KEYS = {"t0", "period_count", "period_length", "offsets", "gamma", "delta"}


def _expr_field(doc, key, path, variables=("t",), default="0"):
    src = doc.get(key, default)
    if isinstance(src, (int, float)) and not isinstance(src, bool):
        src = repr(float(src))
    if not isinstance(src, str):
        raise ConfigError(f"{path}.{key}: expected an expression string")
    try:
        return expr.parse(src, variables)
    except ExprSyntaxError as exc:
        err = ExprSyntaxError(f"{path}.{key}: {exc}", source=src)
        err.position = exc.position
        raise err from None


def _number(doc, key, path, default=None):
    if key not in doc:
        if default is None:
            raise ConfigError(f"{path}: missing required key {key!r}")
        return default
    val = doc[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{path}.{key}: expected a number")
    return float(val)


def _check_keys(doc, allowed, path):
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected an object")
    extra = set(doc) - allowed
    if extra:
        raise ConfigError(f"{path}: unknown keys {sorted(extra)}")


def load_model(config, validate_samples=10**4, x_cap=1e3) -> ModelSpec:
    """Build and validate a :class:`ModelSpec`.

    ``config`` is a path, a JSON string, or an already-decoded mapping.
    """
    if isinstance(config, (str, Path)) and not (isinstance(config, str) and config.lstrip().startswith("{")):
        path = Path(config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    elif isinstance(config, str):
        doc = json.loads(config)
    else:
        doc = config
    _check_keys(doc, TOP_KEYS, "config")
    if "a" not in doc:
        raise ConfigError("config: missing required key 'a'")
    if "impulses" not in doc:
        raise ConfigError("config: missing required key 'impulses'")
    a = _expr_field(doc, "a", "config")
    T = _number(doc, "T", "config")
    if not T > 0:
        raise ConfigError("config.T must be positive")

    imp = doc["impulses"]
    _check_keys(imp, IMPULSE_KEYS, "impulses")
    missing = IMPULSE_KEYS - set(imp)
    if missing:
        raise ConfigError(f"impulses: missing keys {sorted(missing)}")
    pc = imp["period_count"]
    if isinstance(pc, bool) or not isinstance(pc, int):
        raise ConfigError("impulses.period_count must be an integer")
    schedule = ImpulseSchedule(
        t0=_number(imp, "t0", "impulses"),
        period_count=pc,
        period_length=_number(imp, "period_length", "impulses"),
        offsets=tuple(imp["offsets"]),
        gamma=tuple(imp["gamma"]),
        delta=tuple(imp["delta"]),
    )

    raw_terms = doc.get("terms", [])
    if not isinstance(raw_terms, list):
        raise ConfigError("config.terms must be an array")
    terms = []
    for i, td in enumerate(raw_terms):
        path = f"terms[{i}]"
        _check_keys(td, TERM_KEYS, path)
        alpha = _number(td, "alpha", path, 1.0)
        beta = _number(td, "beta", path, 1.0)
        if not (alpha > 0 and beta > 0):
            raise ConfigError(f"{path}: alpha and beta must be positive")
        lip = _number(td, "harvest_lipschitz", path, 0.0)
        if lip < 0:
            raise ConfigError(f"{path}.harvest_lipschitz must be nonnegative")
        term = DelayTerm(
            b=_expr_field(td, "b", path),
            alpha=alpha,
            tau=_expr_field(td, "tau", path),
            c=_expr_field(td, "c", path),
            beta=beta,
            v=_expr_field(td, "v", path, ONE_ARG, default="1"),
            harvest=_expr_field(td, "harvest", path, ("t", "x")),
            harvest_lipschitz=lip,
            sigma=_expr_field(td, "sigma", path),
        )
        if "harvest" in td and not term.harvest.is_constant and lip == 0.0:
            raise ConfigError(f"{path}: harvest_lipschitz is required with a harvest term")
        terms.append(term)

    declared = {}
    for name, pair in (doc.get("declared_bounds") or {}).items():
        if not (isinstance(pair, (list, tuple)) and len(pair) == 2) or not pair[0] <= pair[1]:
            raise ConfigError(f"declared_bounds.{name}: expected [inf, sup] with inf <= sup")
        declared[name] = (float(pair[0]), float(pair[1]))

    history = None
    if "history" in doc:
        h = doc["history"]
        _check_keys(h, {"alpha", "xi"}, "history")
        xi = h.get("xi", "1")
        history = InitialHistory.from_text(str(xi), _number(h, "alpha", "history", 0.0))

    model = ModelSpec(a, tuple(terms), T, schedule, declared, history)
    validate_model(model, samples=validate_samples, x_cap=x_cap)
    return model


def validate_model(model, samples=10**4, window=1000.0, x_cap=1e3, kernel_panels=10**4):
    """Cheap load-time checks; the analyzer performs the dense bound extraction."""
    ts = np.linspace(0.0, window, samples)
    if np.any(np.asarray(model.a(ts)) <= 0):
        raise AssumptionViolation("a(t) must be positive (a_L > 0)")
    sigma_bar = model.delay_bound(samples=samples, window=window)
    xs = np.linspace(0.0, x_cap, 41)
    for i, term in enumerate(model.terms, start=1):
        path = f"terms[{i - 1}]"
        integral = composite_simpson(term.v, 0.0, model.T, kernel_panels)
        if abs(integral - 1.0) > 1e-6:
            raise ConfigError(f"{path}.v: kernel integrates to {integral:.9g} on [0, T], expected 1")
        vv = np.asarray(term.v(np.linspace(0.0, model.T, 2001)))
        if np.any(vv < 0):
            raise ConfigError(f"{path}.v: kernel must be nonnegative")
        for name in ("b", "c"):
            if np.any(np.asarray(getattr(term, name)(ts)) < 0):
                raise ConfigError(f"{path}.{name} must be nonnegative")
        for name in ("tau", "sigma"):
            vals = np.asarray(getattr(term, name)(ts))
            if np.any(vals < 0) or np.any(vals > sigma_bar * (1 + 1e-12)):
                raise ConfigError(f"{path}.{name} must take values in [0, sigma_bar]")
        hv = term.harvest(ts[:: max(1, samples // 1000), None], xs[None, :])
        if np.any(np.asarray(hv) < 0):
            raise ConfigError(f"{path}.harvest must be nonnegative")
    if model.history is not None:
        hs = np.linspace(model.history.alpha - sigma_bar, model.history.alpha, 201)
        vals = np.asarray(model.history(hs))
        if np.any(vals < 0) or not vals[-1] > 0:
            raise ConfigError("history must be nonnegative with xi(alpha) > 0")
    return model
