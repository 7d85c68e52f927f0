"""Interval estimates and log-log fits."""
import math
from collections import namedtuple

import numpy as np
from scipy import stats

Z95 = 1.959963984540054

FitReport = namedtuple("FitReport", "points slope stderr intercept reference kind variant used")


def clopper_pearson(k, n, level=0.95):
    if n <= 0:
        raise ValueError("trials must be positive")
    a = 1 - level
    lo = 0.0 if k == 0 else float(stats.beta.ppf(a / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(stats.beta.ppf(1 - a / 2, k + 1, n - k))
    return lo, hi


def log_var_from_ci(p, lo, hi):
    """Variance of log p-hat read off a 95% interval."""
    if p <= 0 or lo <= 0:
        return math.inf
    return ((math.log(hi) - math.log(lo)) / (2 * Z95)) ** 2


def fit_exponent(points, reference=None, kind="", variant="", min_successes=10):
    """Weighted least squares of log p on log(l/d).

    points: iterables (l, d, p_hat, ci_lo, ci_hi[, successes]).  The returned
    slope is the exponent, i.e. p ~ (l/d)^slope.
    """
    used = []
    for pt in points:
        l, d, p, lo, hi = pt[:5]
        k = pt[5] if len(pt) > 5 else None
        if k is not None and k < min_successes:
            continue
        if p <= 0 or lo <= 0:
            continue
        used.append((l, d, p, lo, hi))
    if len(used) < 3:
        raise ValueError(f"need at least 3 usable points, got {len(used)}")
    x = np.array([math.log(l / d) for l, d, *_ in used])
    y = np.array([math.log(p) for _, _, p, _, _ in used])
    var = np.array([log_var_from_ci(p, lo, hi) for _, _, p, lo, hi in used])
    var = np.where(var > 0, var, 1e-300)
    w = 1.0 / var
    A = np.vstack([x, np.ones_like(x)]).T
    Aw = A * w[:, None]
    cov = np.linalg.inv(A.T @ Aw)
    beta = cov @ (Aw.T @ y)
    return FitReport(list(points), float(beta[0]), float(math.sqrt(cov[0, 0])), float(beta[1]),
                     reference, kind, variant, len(used))


def ratio_ci(num, den):
    """Ratio of two (p, lo, hi) estimates with a delta-method interval on logs.

    num/den may be products of estimates given as lists.
    """
    def parts(e):
        return e if isinstance(e, list) else [e]

    lp = 0.0
    v = 0.0
    for sign, group in ((1, parts(num)), (-1, parts(den))):
        for p, lo, hi in group:
            if p <= 0:
                return (math.inf if sign < 0 else 0.0), 0.0, math.inf
            lp += sign * math.log(p)
            v += log_var_from_ci(p, lo, hi)
    s = math.sqrt(v)
    return math.exp(lp), math.exp(lp - Z95 * s), math.exp(lp + Z95 * s)
