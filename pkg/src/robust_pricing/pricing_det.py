"""Deterministic pricing with fixed choice parameters.

Homogeneous sensitivities admit the closed form built on the Lambert-W
function; partition-wise homogeneous sensitivities reduce to a scalar fixed
point solved by bisection.  Both return constant-markup (per partition)
prices.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericError
from .gev import expected_revenue, log_partition_value, partition_nest_map
from .lambertw import lambert_w0

__all__ = ["DetSolution", "det_price_homogeneous", "det_price_partition"]


@dataclass
class DetSolution:
    markup: object  # scalar (homogeneous) or ndarray of per-partition markups
    prices: np.ndarray
    revenue: float


def _stationarity_check(model, params, costs, prices, revenue, tol=1e-5):
    """Central-difference gradient of Phi at the solution must vanish."""
    grad = np.empty(len(prices))
    for i in range(len(prices)):
        h = 1e-6 * (1.0 + abs(prices[i]))
        xp = prices.copy(); xp[i] += h
        xm = prices.copy(); xm[i] -= h
        grad[i] = (
            expected_revenue(model, params, costs, xp)
            - expected_revenue(model, params, costs, xm)
        ) / (2.0 * h)
    worst = float(np.max(np.abs(grad)))
    if worst > tol * (1.0 + abs(revenue)):
        raise NumericError(
            f"stationarity check failed: |grad|_inf = {worst:.3e}"
        )


def det_price_homogeneous(model, params, costs):
    """Optimal constant-markup prices for homogeneous b.

    gamma = G(Y at zero markup), R* = W(gamma/e) / b, markup = 1/b + R*.
    """
    costs = np.asarray(costs, dtype=float)
    if not params.is_homogeneous():
        raise ConfigurationError(
            "det_price_homogeneous requires identical b across products"
        )
    b = params.shared_b()
    log_gamma, _ = model.log_terms(params.a - params.b * costs)
    gamma = float(np.exp(log_gamma))
    revenue = lambert_w0(gamma * np.exp(-1.0)) / b
    markup = 1.0 / b + revenue
    prices = costs + markup
    _stationarity_check(model, params, costs, prices, revenue)
    return DetSolution(markup=float(markup), prices=prices,
                       revenue=float(revenue))


def det_price_partition(model, params, costs, partitions, tol=1e-12,
                        max_iter=200):
    """Optimal partition-wise constant markups for partition-homogeneous b.

    Solves R = sum_n (1/b_n) * exp(-(b_n R + 1)) * G^n(Y^n | 0) by bisection
    (the residual is strictly increasing in R), then z_n = 1/b_n + R.
    """
    costs = np.asarray(costs, dtype=float)
    partitions = tuple(tuple(int(i) for i in p) for p in partitions)
    partition_nest_map(model, partitions)  # validates separability
    b_n = params.partition_b(partitions)
    gammas = np.array([
        float(np.exp(log_partition_value(
            model, partitions, n,
            params.a[list(p)] - params.b[list(p)] * costs[list(p)],
        )))
        for n, p in enumerate(partitions)
    ])

    def residual(R):
        return R - float(np.sum(np.exp(-(b_n * R + 1.0)) * gammas / b_n))

    # Upper bracket from the single-markup relaxation; overestimates R*.
    r_hi = (1.0 + lambert_w0(gammas.sum() * np.exp(-1.0))) / float(b_n.min())
    n_expand = 0
    while residual(r_hi) < 0:
        r_hi *= 2.0
        n_expand += 1
        if n_expand > 200:
            raise NumericError("fixed-point bracketing failed")
    r_lo = 0.0
    for _ in range(max_iter):
        mid = 0.5 * (r_lo + r_hi)
        if residual(mid) > 0:
            r_hi = mid
        else:
            r_lo = mid
        if r_hi - r_lo <= tol * max(1.0, r_hi):
            break
    R = 0.5 * (r_lo + r_hi)
    if abs(residual(R)) > 1e-10 * (1.0 + R):
        raise NumericError(f"fixed-point residual too large: {residual(R):.3e}")

    markups = 1.0 / b_n + R
    prices = costs.copy()
    for n, p in enumerate(partitions):
        prices[list(p)] = costs[list(p)] + markups[n]
    revenue = expected_revenue(model, params, costs, prices)
    if abs(revenue - R) > 1e-8 * (1.0 + abs(R)):
        raise NumericError(
            f"revenue/fixed-point mismatch: Phi={revenue!r} vs R={R!r}"
        )
    return DetSolution(markup=markups, prices=prices, revenue=float(revenue))
