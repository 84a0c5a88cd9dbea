"""Exact L1 isotonic regression by median pool-adjacent-violators.

Pooled blocks carry the midpoint median (numpy convention), so ties such as
pooling {0.6, 0.4} resolve to 0.5.  Box constraints commute with the
isotonic projection for separable convex losses, hence the bounded variant
clips the unconstrained fit and re-runs the (then trivial) pass.
"""

from __future__ import annotations

import numpy as np


def l1_isotonic(y) -> np.ndarray:
    """Nondecreasing fit minimizing sum |g - y| (unweighted, exact)."""
    y = np.asarray(y, dtype=float).ravel()
    n = y.size
    if n == 0:
        return y.copy()
    # stack of pooled blocks: (median, start index, member values)
    medians: list[float] = []
    starts: list[int] = []
    members: list[np.ndarray] = []
    for i, v in enumerate(y):
        med, start, vals = float(v), i, np.array([v])
        while medians and medians[-1] > med:
            prev_vals = members.pop()
            start = starts.pop()
            medians.pop()
            vals = np.concatenate([prev_vals, vals])
            med = float(np.median(vals))
        medians.append(med)
        starts.append(start)
        members.append(vals)
    out = np.empty(n)
    bounds = starts[1:] + [n]
    for med, lo, hi in zip(medians, starts, bounds):
        out[lo:hi] = med
    return out


def l1_isotonic_unit_interval(y) -> np.ndarray:
    """Nondecreasing fit with values in [0, 1] minimizing sum |g - y|."""
    z = np.clip(l1_isotonic(y), 0.0, 1.0)
    # clipping preserves monotonicity; the second pass is a no-op guard
    return l1_isotonic(z)
