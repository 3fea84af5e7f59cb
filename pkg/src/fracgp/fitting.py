"""Least-squares fits used to compare empirical curves against rate exponents."""

import numpy as np
from scipy import stats

from .errors import InputError


def fit_line(xs, ys):
    """Ordinary least squares ``y = slope * x + intercept``.

    Returns ``(slope, intercept, r2)``. A perfectly flat response has ``r2 = 1``.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise InputError("xs and ys must be 1-D arrays of equal length")
    if xs.size < 3:
        raise InputError(f"need at least 3 points, got {xs.size}")
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
        raise InputError("non-finite values in fit input")
    if np.ptp(xs) == 0:
        raise InputError("xs are all equal; slope undefined")
    res = stats.linregress(xs, ys)
    slope, intercept = float(res.slope), float(res.intercept)
    resid = ys - (slope * xs + intercept)
    ss_res = float(resid @ resid)
    centered = ys - ys.mean()
    ss_tot = float(centered @ centered)
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return slope, intercept, r2


def fit_log_slope(xs, ys):
    """Fit ``log y = slope * log x + intercept``; returns ``(slope, intercept, r2)``."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise InputError("log-log fit requires strictly positive xs and ys")
    return fit_line(np.log(xs), np.log(ys))
