"""Principal-branch Lambert-W evaluation.

The closed-form markup formulas use W(g/e) with g a nonnegative CPGF value,
so only arguments >= 0 matter here; the full principal branch down to -1/e
is supported anyway.
"""

import numpy as np

from .errors import DomainError

_BRANCH_POINT = -np.exp(-1.0)


def lambert_w0(x):
    """Principal branch W0 of the Lambert-W function.

    Solves w * exp(w) = x for w >= -1. Accepts a scalar or an array and
    returns the same shape. Initial guess log1p(x) for x >= 0 (a series /
    branch-point guess for negative x), refined by Halley iterations to
    machine precision; the defining identity holds to ~1e-15 relative.

    Raises
    ------
    DomainError
        If any entry is non-finite or below -1/e.
    """
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    z = np.atleast_1d(arr).copy()
    if not np.all(np.isfinite(z)):
        raise DomainError("lambert_w0: non-finite argument")
    if np.any(z < _BRANCH_POINT - 1e-12):
        raise DomainError(f"lambert_w0: argument below -1/e: min={z.min()!r}")
    z = np.maximum(z, _BRANCH_POINT)

    w = np.where(z >= 0.0, np.log1p(z), z)
    near_branch = z < -0.25
    if np.any(near_branch):
        # Series around the branch point: w = -1 + p - p^2/3 with p = sqrt(2(1+e*z)).
        p = np.sqrt(2.0 * (1.0 + np.e * np.maximum(z, _BRANCH_POINT)))
        w = np.where(near_branch, -1.0 + p - p * p / 3.0, w)

    for _ in range(12):
        ew = np.exp(w)
        f = w * ew - z
        wp1 = w + 1.0
        # Halley step; the denominator never vanishes away from the branch point.
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * np.where(wp1 == 0.0, 1.0, wp1))
        dw = f / denom
        w = w - dw
        if np.all(np.abs(dw) <= 1e-16 * (2.0 + np.abs(w))):
            break

    return float(w[0]) if scalar else w.reshape(arr.shape)
