"""Certification constants and verdicts on the existence and attractivity hypotheses.

Coefficient ranges come from dense sampling of the expressions, with
declared bounds taking precedence.  A declared interval must contain the
sampled one, otherwise the declaration is wrong and loading fails.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import expr
from .cauchy import constant_M, gamma_extrema
from .errors import AssumptionViolation, ConfigError, NumericalError

DECLARED_SLACK = 1e-9


@dataclass(frozen=True)
class TermBounds:
    b: tuple
    c: tuple
    harvest_global: tuple  # (H_L, H_M) with x over [0, x_cap]
    lipschitz: float
    lipschitz_sampled: float


@dataclass
class CoefficientBounds:
    model: object
    a: tuple
    terms: list
    sigma_bar: float
    window: float
    samples: int
    x_cap: float

    def harvest_sup(self, i, x_hi, x_samples=33):
        """sup of H_i(t, x) over sampled t and x in [0, x_hi], never above the global sup."""
        term = self.model.terms[i]
        glob = self.terms[i].harvest_global[1]
        if x_hi <= 0:
            x_hi = 0.0
        if "x" not in term.harvest.variables:
            return glob
        _, hi = expr.estimate_bounds(
            term.harvest, self.window, max(2, self.samples // 10), (0.0, x_hi), x_samples
        )
        return min(hi, glob)


def _checked(name, declared, sampled):
    if declared is None:
        return tuple(sampled)
    lo, hi = float(declared[0]), float(declared[1])
    scale = max(1.0, abs(lo), abs(hi))
    if sampled[0] < lo - DECLARED_SLACK * scale or sampled[1] > hi + DECLARED_SLACK * scale:
        raise ConfigError(
            f"declared bounds for {name} [{lo}, {hi}] do not contain sampled range "
            f"[{sampled[0]:.12g}, {sampled[1]:.12g}]"
        )
    return lo, hi


def _lipschitz_estimate(e, window, x_cap, t_samples=2001):
    if "x" not in e.variables:
        return 0.0
    xs = np.unique(np.concatenate([np.linspace(0.0, 1.0, 51), np.linspace(1.0, x_cap, 201)]))
    ts = np.linspace(0.0, window, t_samples)
    vals = np.asarray(e(ts[:, None], xs[None, :]))
    slopes = np.abs(np.diff(vals, axis=1)) / np.diff(xs)[None, :]
    return float(slopes.max())


def extract_bounds(model, window=1000.0, samples=10**6, x_cap=1e3) -> CoefficientBounds:
    """Inf/sup of every coefficient over [0, window]."""
    a = _checked("a", model.declared("a"), expr.estimate_bounds(model.a, window, samples))
    terms = []
    for i, term in enumerate(model.terms, start=1):
        b = _checked(f"b{i}", model.declared(f"b{i}"), expr.estimate_bounds(term.b, window, samples))
        c = _checked(f"c{i}", model.declared(f"c{i}"), expr.estimate_bounds(term.c, window, samples))
        for name in ("tau", "sigma"):
            e = getattr(term, name)
            _checked(f"{name}{i}", model.declared(f"{name}{i}"), expr.estimate_bounds(e, window, samples))
        x_range = (0.0, x_cap) if "x" in term.harvest.variables else None
        hs = expr.estimate_bounds(term.harvest, window, max(2, samples // 10), x_range)
        hg = _checked(f"harvest{i}", model.declared(f"harvest{i}"), hs)
        lip = _lipschitz_estimate(term.harvest, window, x_cap)
        if lip > term.harvest_lipschitz * (1 + 1e-9) + 1e-15:
            raise ConfigError(
                f"terms[{i - 1}].harvest: sampled Lipschitz slope {lip:.6g} exceeds "
                f"harvest_lipschitz={term.harvest_lipschitz}"
            )
        terms.append(TermBounds(b, c, hg, float(term.harvest_lipschitz), lip))
    if not a[0] > 0:
        raise AssumptionViolation(f"a_L = {a[0]} must be positive")
    return CoefficientBounds(model, a, terms, model.delay_bound(window=window), window, samples, x_cap)


def power_sup(alpha, lo, hi):
    """sup of alpha * x^(alpha - 1) over [lo, hi] (x > 0), by monotonicity."""
    if alpha == 1:
        return 1.0
    if alpha > 1:
        return alpha * hi ** (alpha - 1)
    if lo <= 0:
        return math.inf
    return alpha * lo ** (alpha - 1)


def _finite(name, value):
    if not math.isfinite(value):
        raise NumericalError(f"{name} is not finite ({value})")
    return value


def compute_M1(model, bounds) -> float:
    g = gamma_extrema(model.schedule)
    a_L = bounds.a[0]
    eta = model.schedule.eta
    s = sum(tb.b[1] + tb.c[1] - tb.harvest_global[0] for tb in bounds.terms)
    value = g.A / a_L * s + g.A * model.schedule.delta_M / (1.0 - math.exp(-a_L * eta))
    return _finite("M1", value)


def compute_M2(model, bounds, M1, H_M=None) -> float:
    """Lower invariant bound.  ``H_M`` overrides the per-term harvest sups."""
    g = gamma_extrema(model.schedule)
    a_L, a_M = bounds.a
    sch = model.schedule
    if H_M is None:
        H_M = [bounds.harvest_sup(i, M1) for i in range(model.m)]
    s = 0.0
    for term, tb, hm in zip(model.terms, bounds.terms, H_M):
        s += tb.b[0] / (1.0 + M1**term.alpha) + tb.c[0] / (1.0 + M1**term.beta) - hm
    if sch.delta_L >= 0:
        e = math.exp(-a_M * sch.eta_bar)
        tail = g.B * sch.delta_L * e / (1.0 - e)
    else:
        tail = g.A * sch.delta_L / (1.0 - math.exp(-a_L * sch.eta))
    return _finite("M2", g.B / a_M * s + tail)


def compute_contraction_constants(model, bounds, M1, M2):
    """(existence_lhs, attractivity_lhs, K*, G*); K* and G* are per-term lists."""
    g = gamma_extrema(model.schedule)
    a_L = bounds.a[0]
    K = [power_sup(t.alpha, M2, M1) for t in model.terms]
    G = [power_sup(t.beta, M2, M1) for t in model.terms]
    S = sum(tb.b[1] * k + tb.c[1] * gg + tb.lipschitz for tb, k, gg in zip(bounds.terms, K, G))
    existence = g.A / a_L * S
    attract = max(g.A, 1.0 / (1.0 + g.gamma_L)) / a_L * S
    return existence, attract, K, G


@dataclass
class AnalysisReport:
    a_L: float
    a_M: float
    b_L: list
    b_M: list
    c_L: list
    c_M: list
    H_L: list
    H_M_global: list
    H_M_restricted: list
    L: list
    L_sampled: list
    K_star: list
    G_star: list
    delta_L: float
    delta_M: float
    delta_abs_inf: float
    delta_abs_sup: float
    eta: float
    eta_bar: float
    gamma_L: float
    Gamma_M: float
    Gamma_L: float
    A: float
    B: float
    M: float
    M1: float
    M2: float
    M2_global: float
    sigma_bar: float
    delay_sum: float
    existence_lhs: float
    attractivity_lhs: float
    existence_ok: bool = False
    attractivity_ok: bool = False
    delay_vs_eta_ok: bool = False
    M2_positive: bool = False
    M2_sign_disagreement: bool = False
    warnings: list = field(default_factory=list)

    @property
    def m(self):
        return len(self.b_L)

    def to_flat(self):
        """Flat snake_case mapping; per-term lists become ``name_i`` keys (1-based)."""
        out = {}
        for key, value in asdict(self).items():
            if key == "warnings":
                out[key] = "; ".join(value)
            elif isinstance(value, list):
                for i, v in enumerate(value, start=1):
                    out[f"{key}_{i}"] = v
            else:
                out[key] = value
        return out


def verdicts(report):
    """(existence_ok, attractivity_ok) with strict inequalities."""
    positive = report.M2 > 0
    existence = positive and report.existence_lhs < 1
    attract = positive and report.sigma_bar <= report.eta and report.attractivity_lhs < 1
    return existence, attract


def analyze(model, window=1000.0, samples=10**6, x_cap=1e3) -> AnalysisReport:
    bounds = extract_bounds(model, window, samples, x_cap)
    sch = model.schedule
    g = gamma_extrema(sch)
    M1 = compute_M1(model, bounds)
    H_res = [bounds.harvest_sup(i, M1) for i in range(model.m)]
    H_glob = [tb.harvest_global[1] for tb in bounds.terms]
    M2 = compute_M2(model, bounds, M1, H_res)
    M2_glob = compute_M2(model, bounds, M1, H_glob)
    ex, at, K, G = compute_contraction_constants(model, bounds, M1, M2)
    S = sum(tb.b[1] * k + tb.c[1] * gg + tb.lipschitz for tb, k, gg in zip(bounds.terms, K, G))
    rep = AnalysisReport(
        a_L=bounds.a[0],
        a_M=bounds.a[1],
        b_L=[tb.b[0] for tb in bounds.terms],
        b_M=[tb.b[1] for tb in bounds.terms],
        c_L=[tb.c[0] for tb in bounds.terms],
        c_M=[tb.c[1] for tb in bounds.terms],
        H_L=[tb.harvest_global[0] for tb in bounds.terms],
        H_M_global=H_glob,
        H_M_restricted=H_res,
        L=[tb.lipschitz for tb in bounds.terms],
        L_sampled=[tb.lipschitz_sampled for tb in bounds.terms],
        K_star=K,
        G_star=G,
        delta_L=sch.delta_L,
        delta_M=sch.delta_M,
        delta_abs_inf=sch.delta_abs_inf,
        delta_abs_sup=sch.delta_abs_sup,
        eta=sch.eta,
        eta_bar=sch.eta_bar,
        gamma_L=g.gamma_L,
        Gamma_M=g.Gamma_M,
        Gamma_L=g.Gamma_L,
        A=g.A,
        B=g.B,
        M=constant_M(bounds.a[0], sch.eta, g),
        M1=M1,
        M2=M2,
        M2_global=M2_glob,
        sigma_bar=bounds.sigma_bar,
        delay_sum=S,
        existence_lhs=ex,
        attractivity_lhs=at,
    )
    if M2 <= 0:
        rep.warnings.append("M2 <= 0: invariant band empty, K*/G* are not certified")
    if (M2 > 0) != (M2_glob > 0):
        rep.M2_sign_disagreement = True
        rep.warnings.append("M2 changes sign when harvest sup is taken over all x >= 0")
    rep.M2_positive = M2 > 0
    rep.delay_vs_eta_ok = rep.sigma_bar <= rep.eta
    rep.existence_ok, rep.attractivity_ok = verdicts(rep)
    return rep
