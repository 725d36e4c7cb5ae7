"""Simpson quadrature: composite rule and a level-batched adaptive rule."""

import numpy as np

from .errors import NumericalError


def simpson_weights(n_panels):
    """Weights for ``2*n_panels + 1`` equispaced points, unscaled by the panel width."""
    w = np.empty(2 * n_panels + 1)
    w[0::2] = 2.0
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return w / 6.0


def composite_simpson(f, a, b, n_panels):
    """Composite Simpson with ``n_panels`` panels (each panel has its own midpoint)."""
    if b == a:
        return 0.0
    x = np.linspace(a, b, 2 * n_panels + 1)
    y = np.asarray(f(x), dtype=float)
    return float(np.dot(simpson_weights(n_panels), y) * (b - a) / n_panels)


def adaptive_simpson(f, a, b, rtol=1e-10, atol=1e-14, max_depth=48):
    """Adaptive Simpson on [a, b] for a vectorised integrand.

    All unresolved intervals of one level are refined together.  An interval
    is accepted when the Richardson estimate |S2 - S1|/15 falls below its
    share of the global tolerance (proportional to its length).
    """
    if b == a:
        return 0.0
    if b < a:
        return -adaptive_simpson(f, b, a, rtol, atol, max_depth)
    n0 = 8
    edges = np.linspace(a, b, n0 + 1)
    lo, hi = edges[:-1], edges[1:]
    mid = 0.5 * (lo + hi)
    pts = np.concatenate([lo, mid, hi])
    vals = np.asarray(f(pts), dtype=float)
    flo, fmid, fhi = vals[:n0], vals[n0 : 2 * n0], vals[2 * n0 :]
    whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)
    tol = max(atol, rtol * abs(float(whole.sum())))
    total = 0.0
    length = b - a
    for _ in range(max_depth):
        q1 = 0.5 * (lo + mid)
        q3 = 0.5 * (mid + hi)
        k = len(lo)
        v = np.asarray(f(np.concatenate([q1, q3])), dtype=float)
        fq1, fq3 = v[:k], v[k:]
        left = (mid - lo) / 6.0 * (flo + 4.0 * fq1 + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4.0 * fq3 + fhi)
        refined = left + right
        err = np.abs(refined - whole) / 15.0
        ok = err <= tol * (hi - lo) / length
        total += float(np.sum(refined[ok] + (refined[ok] - whole[ok]) / 15.0))
        if ok.all():
            return total
        bad = ~ok
        lo_b, mid_b, hi_b = lo[bad], mid[bad], hi[bad]
        lo = np.concatenate([lo_b, mid_b])
        hi = np.concatenate([mid_b, hi_b])
        mid = np.concatenate([q1[bad], q3[bad]])
        flo = np.concatenate([flo[bad], fmid[bad]])
        fhi = np.concatenate([fmid[bad], fhi[bad]])
        fmid = np.concatenate([fq1[bad], fq3[bad]])
        whole = np.concatenate([left[bad], right[bad]])
        if not np.all(np.isfinite(whole)):
            raise NumericalError("non-finite integrand in adaptive Simpson")
    raise NumericalError(f"adaptive Simpson did not reach tolerance on [{a}, {b}]")
