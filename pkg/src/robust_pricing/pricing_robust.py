"""Robust pricing solvers: worst-case revenue maximization over the set.

Two routes, both returning constant-markup prices together with the
worst-case parameters that certify them:

* homogeneous sensitivities: a scalar fixed point z = (1 + W(G_min(0|z)/e))/b*
  solved by bisection inside a provable bracket;
* partition-wise sensitivities: the concave program over aggregated purchase
  probabilities p (one total purchase probability per partition), solved by
  projected gradient ascent, with markups recovered by inverting the
  minimized per-partition CPGFs.
"""

from dataclasses import dataclass

import numpy as np

from .adversary import AdversarySession
from .errors import ConfigurationError, ConvergenceError, DomainError, NumericError
from .gev import (
    ChoiceParams,
    expected_revenue,
    expected_revenue_batch,
    partition_nest_map,
)
from .lambertw import lambert_w0
from .pricing_det import det_price_partition
from .uncertainty import coordinate_bounds, params_at, sample_scenarios

__all__ = [
    "RobustSolution",
    "SampledEvaluation",
    "markup_bracket",
    "robust_price_homogeneous",
    "markups_from_probabilities",
    "reduced_objective_and_grad",
    "robust_price_partition",
    "worst_case_markup_revenue",
    "sampled_worst_case",
    "solution_to_json",
]

INTERIOR_MARGIN = 1e-9  # keeps p strictly inside; the gradient blows up on the boundary


@dataclass
class RobustSolution:
    markup: object  # scalar (homogeneous) or ndarray (per partition)
    prices: np.ndarray
    worst_params: ChoiceParams
    worst_case_revenue: float
    diagnostics: dict
    aggregate_probabilities: np.ndarray = None


@dataclass
class SampledEvaluation:
    worst: float
    average: float
    max_value: float
    revenues: np.ndarray


def solution_to_json(sol):
    markup = sol.markup
    markup = [float(markup)] if np.ndim(markup) == 0 else [float(v) for v in markup]
    return {
        "markup": markup,
        "prices": [float(v) for v in sol.prices],
        "worst_case_revenue": float(sol.worst_case_revenue),
        "diagnostics": {
            k: (v.tolist() if isinstance(v, np.ndarray) else v)
            for k, v in sol.diagnostics.items()
        },
    }


def _shared_bound(vec, name):
    vec = np.asarray(vec, dtype=float)
    if np.max(vec) - np.min(vec) > 1e-9 * (1.0 + abs(np.max(vec))):
        raise ConfigurationError(f"{name} is not homogeneous across products")
    return float(vec[0])


def markup_bracket(model, uset, costs):
    """Bracket [Z_lo, Z_hi] that contains the robust homogeneous markup.

    Built from coordinatewise parameter bounds: the fixed-point map is
    sandwiched between its values at (a_lo, b_hi) and (a_hi, b_lo).
    """
    costs = np.asarray(costs, dtype=float)
    a_lo, a_hi, b_lo, b_hi = coordinate_bounds(uset)
    bhi = _shared_bound(b_hi, "upper b bound")
    blo = _shared_bound(b_lo, "lower b bound")
    log_g_low, _ = model.log_terms(a_lo - b_hi * costs)
    log_g_high, _ = model.log_terms(a_hi - b_lo * costs)
    z_lo = (1.0 + lambert_w0(np.exp(float(log_g_low) - 1.0))) / bhi
    z_hi = (1.0 + lambert_w0(np.exp(float(log_g_high) - 1.0))) / blo
    return z_lo, z_hi


def robust_price_homogeneous(model, uset, costs, z_tol=1e-10, f_tol=1e-8,
                             max_iter=200):
    """Robust constant-markup prices for homogeneous-b uncertainty sets.

    Bisects f(z) = z - (1 + W(G(Y|0, a*(z), b*(z))/e)) / b*(z) on the
    markup bracket, where (a*(z), b*(z)) solves the adversary problem at z.
    """
    costs = np.asarray(costs, dtype=float)
    if uset.mode != "joint":
        raise ConfigurationError(
            "robust_price_homogeneous requires a joint-mode uncertainty set"
        )
    session = AdversarySession(model, uset, costs)
    z_lo, z_hi = markup_bracket(model, uset, costs)

    def f(z):
        sol = session.minimize(z)
        log_g0, _ = model.log_terms(
            sol.params_star.a - sol.params_star.b * costs
        )
        z_hat = (1.0 + lambert_w0(np.exp(float(log_g0) - 1.0))) / sol.b_value
        return z - z_hat, sol

    iterations = 0
    if z_hi - z_lo <= 1e-13:
        z_star = 0.5 * (z_lo + z_hi)
        f_star, sol = f(z_star)
    else:
        f_lo, _ = f(z_lo)
        f_hi, _ = f(z_hi)
        if f_lo > 1e-9 or f_hi < -1e-9:
            raise NumericError(
                f"fixed point escaped its bracket: f({z_lo})={f_lo}, "
                f"f({z_hi})={f_hi}"
            )
        lo, hi = z_lo, z_hi
        z_star, f_star, sol = z_lo, f_lo, None
        for iterations in range(1, max_iter + 1):
            z_star = 0.5 * (lo + hi)
            f_star, sol = f(z_star)
            if f_star > 0:
                hi = z_star
            else:
                lo = z_star
            if hi - lo <= z_tol and abs(f_star) <= 0.1 * f_tol:
                break
        if sol is None:
            f_star, sol = f(z_star)

    if abs(f_star) > f_tol:
        raise NumericError(f"fixed-point residual {abs(f_star):.3e} > {f_tol}")
    prices = costs + z_star
    worst = expected_revenue(model, sol.params_star, costs, prices)
    return RobustSolution(
        markup=float(z_star),
        prices=prices,
        worst_params=sol.params_star,
        worst_case_revenue=float(worst),
        diagnostics={
            "fixed_point_residual": abs(float(f_star)),
            "bracket": [float(z_lo), float(z_hi)],
            "iterations": iterations,
            "adversary_residual": sol.residual,
        },
    )


def _check_interior(p_agg, n_partitions):
    p_agg = np.asarray(p_agg, dtype=float)
    if p_agg.shape != (n_partitions,):
        raise DomainError("aggregate probabilities have the wrong length")
    if np.any(p_agg <= 0.0) or p_agg.sum() >= 1.0:
        raise DomainError(
            "aggregate probabilities must be strictly positive with sum < 1"
        )
    return p_agg


def _markups_with_solutions(session, partitions, p_agg, hints=None):
    p_agg = _check_interior(p_agg, len(partitions))
    scale = p_agg / (1.0 - p_agg.sum())
    z = np.empty(len(partitions))
    sols = []
    for n in range(len(partitions)):
        hint = None if hints is None else hints.get(n)
        z[n], sol = session.min_value_inverse(scale[n], n, hint=hint)
        sols.append(sol)
    return z, sols


def markups_from_probabilities(model, uset, costs, partitions, p_agg,
                               session=None):
    """Markups achieving the given per-partition purchase probabilities.

    Componentwise inverse of the minimized CPGFs at p_n / (1 - sum p); the
    roundtrip p -> z -> p is exact to the inverse tolerance.
    """
    if session is None:
        session = AdversarySession(model, uset, np.asarray(costs, dtype=float),
                                   partitions=partitions)
    z, _ = _markups_with_solutions(session, partitions, p_agg)
    return z


def _reduced_eval(session, partitions, p_agg, hints=None):
    """Worst-case revenue W(p) = sum z_n p_n and its gradient.

    dW/dp_n = z_n - 1/b*_n - (1/(1 - sum p)) * sum_k p_k / b*_k with b*_n the
    sensitivity of the partition-n adversary solution at z_n.
    """
    z, sols = _markups_with_solutions(session, partitions, p_agg, hints)
    p_agg = np.asarray(p_agg, dtype=float)
    b_star = np.array([s.b_value for s in sols])
    value = float(z @ p_agg)
    shared = float(np.sum(p_agg / b_star)) / (1.0 - p_agg.sum())
    grad = z - 1.0 / b_star - shared
    return value, grad, z, sols


def reduced_objective_and_grad(model, uset, costs, partitions, p_agg,
                               session=None):
    """Public wrapper around the reduced objective; returns (W, grad)."""
    if session is None:
        session = AdversarySession(model, uset, np.asarray(costs, dtype=float),
                                   partitions=partitions)
    value, grad, _, _ = _reduced_eval(session, partitions, p_agg)
    return value, grad


def _project_interior(v, delta, total):
    """Euclidean projection onto {p >= delta, sum p <= total}.

    Water-filling on the sorted breakpoints: with the j largest coordinates
    free, the multiplier is nu_j = (sum of their v + (K - j) delta - total)/j,
    accepted when it falls in the j-th breakpoint segment.
    """
    v = np.asarray(v, dtype=float)
    x = np.maximum(v, delta)
    if x.sum() <= total:
        return x
    order = np.sort(v)[::-1]
    t = order - delta  # breakpoints, descending
    prefix = np.cumsum(order)
    K = v.size
    nu = (prefix[K - 1] - total) / K  # all-free fallback
    for j in range(1, K + 1):
        cand = (prefix[j - 1] + (K - j) * delta - total) / j
        lower = t[j] if j < K else -np.inf
        if lower <= cand < t[j - 1]:
            nu = cand
            break
    return np.maximum(v - nu, delta)


def _pga_max(f_and_grad, project, p0, grad_tol, max_iter, slope=1e-4):
    """Projected gradient ascent with Armijo backtracking plus a polish phase.

    ``f_and_grad`` returns (value, gradient, payload); the payload of the
    final iterate is returned alongside it.  Stops when the step-1 projected
    gradient norm falls below ``grad_tol``.

    The Armijo phase makes the large moves; near the optimum its sufficient-
    increase test drowns in the evaluation noise of the objective (every
    value carries the inverse-solver tolerance), so once steps stop paying
    the loop switches to projection steps driven purely by the analytic
    gradient (Barzilai-Borwein lengths, safeguarded), which is orders of
    magnitude less noisy and converges to the tolerance.
    """
    p = project(np.asarray(p0, dtype=float))
    val, grad, payload = f_and_grad(p)
    best = (val, p.copy(), grad, payload)
    it = 0
    step = 1.0
    noise = 1e-11

    # Phase 1: Armijo backtracking while the improvements are measurable.
    while it < max_iter:
        target = project(p + grad)
        residual = float(np.linalg.norm(p - target))
        if residual <= grad_tol:
            return p, val, grad, payload, it, residual
        accepted = False
        s = min(max(step * 2.0, 1e-8), 1e3)
        while s >= 1e-14:
            cand = project(p + s * grad)
            cval, cgrad, cpayload = f_and_grad(cand)
            it += 1
            if cval >= val + slope * float(grad @ (cand - p)) - noise * (
                1.0 + abs(val)
            ):
                gain = cval - val
                p, val, grad, payload = cand, cval, cgrad, cpayload
                step = s
                accepted = True
                break
            s *= 0.5
        if val > best[0]:
            best = (val, p.copy(), grad, payload)
        if not accepted or gain <= noise * (1.0 + abs(val)):
            break

    # Phase 2: fixed/BB-step projected gradient on the analytic gradient.
    val, p, grad, payload = best
    s = min(max(step, 1e-6), 1.0)
    target = project(p + grad)
    best_res = float(np.linalg.norm(p - target))
    best_iter = (p.copy(), val, grad, payload)
    res = best_res
    since_best = 0
    while it < max_iter:
        if best_res <= grad_tol:
            p, val, grad, payload = best_iter
            return p, val, grad, payload, it, best_res
        p_new = project(p + s * grad)
        val_new, grad_new, payload_new = f_and_grad(p_new)
        it += 1
        dp = p_new - p
        dg = grad_new - grad
        curv = -float(dp @ dg)
        if curv > 0:
            s = float(dp @ dp) / curv  # BB1 step for the concave objective
        s = min(max(s, 1e-9), 1e3)
        p, val, grad, payload = p_new, val_new, grad_new, payload_new
        res = float(np.linalg.norm(p - project(p + grad)))
        if res < best_res:
            best_res = res
            best_iter = (p.copy(), val, grad, payload)
            since_best = 0
        else:
            since_best += 1
            if since_best >= 50:
                s *= 0.5  # persistent non-decrease: damp the step
                p, val, grad, payload = best_iter
                p = p.copy()
                since_best = 0

    if best_res <= 10 * grad_tol:
        p, val, grad, payload = best_iter
        return p, val, grad, payload, it, best_res
    raise ConvergenceError(
        f"ascent iteration cap {max_iter} exceeded (residual {best_res:.3e})",
        best=best_iter,
    )


def _initial_probabilities(model, uset, costs, partitions):
    """Aggregated purchase probabilities of the mean-parameter solution."""
    try:
        if uset.mode == "partition":
            lam = np.tile(uset.tau, (len(partitions), 1))
        else:
            lam = uset.tau
        mean = params_at(uset, lam)
        det = det_price_partition(model, mean, costs, partitions)
        from .gev import partition_value

        g = np.array([
            partition_value(model, partitions, n, det.markup[n], mean, costs)
            for n in range(len(partitions))
        ])
        return g / (1.0 + g.sum())
    except Exception:
        return np.full(len(partitions), 0.5 / len(partitions))


def robust_price_partition(model, uset, costs, partitions, grad_tol=1e-7,
                           max_iter=50_000, start=None):
    """Robust partition-wise constant markups via the concave reduced program.

    Maximizes W over the interior of the aggregated-probability simplex by
    projected gradient ascent, then validates the stationarity system
    z_n = 1/b*_n + sum_l G_min^l(z_l)/b*_l before returning.
    """
    costs = np.asarray(costs, dtype=float)
    partitions = tuple(tuple(int(i) for i in p) for p in partitions)
    if uset.mode != "partition":
        raise ConfigurationError(
            "robust_price_partition requires a partition-mode uncertainty set"
        )
    partition_nest_map(model, partitions)
    session = AdversarySession(model, uset, costs, partitions=partitions,
                               inverse_tol=1e-12)
    N = len(partitions)

    p0 = np.asarray(start, dtype=float) if start is not None else (
        _initial_probabilities(model, uset, costs, partitions)
    )
    p0 = np.maximum(p0, 1e-6)
    if p0.sum() > 1.0 - 1e-6:
        p0 = p0 * (1.0 - 1e-6) / p0.sum()

    hints = {}

    def f_and_grad(p):
        value, grad, z, sols = _reduced_eval(session, partitions, p, hints)
        for n in range(N):
            hints[n] = z[n]
        return value, grad, (z, sols)

    def project(v):
        return _project_interior(v, INTERIOR_MARGIN, 1.0 - INTERIOR_MARGIN)

    p_star, value, grad, (z, sols), iterations, residual = _pga_max(
        f_and_grad, project, p0, grad_tol, max_iter
    )

    g_min = np.array([s.value for s in sols])
    b_star = np.array([s.b_value for s in sols])
    fp_residual = float(np.max(np.abs(
        z - 1.0 / b_star - float(np.sum(g_min / b_star))
    )))
    if fp_residual > 1e-5:
        raise NumericError(
            f"partition fixed-point residual {fp_residual:.3e} > 1e-5"
        )

    prices = costs.copy()
    a = np.empty(len(costs))
    b = np.empty(len(costs))
    for n, part in enumerate(partitions):
        idx = list(part)
        prices[idx] = costs[idx] + z[n]
        a[idx] = sols[n].params_star.a
        b[idx] = sols[n].params_star.b
    worst_params = ChoiceParams(a, b)
    return RobustSolution(
        markup=z,
        prices=prices,
        worst_params=worst_params,
        worst_case_revenue=float(value),
        diagnostics={
            "gradient_norm": residual,
            "iterations": iterations,
            "fixed_point_residual": fp_residual,
        },
        aggregate_probabilities=p_star,
    )


def worst_case_markup_revenue(model, uset, costs, partitions, markups,
                              return_config=False):
    """Exact worst-case revenue of partition-wise constant-markup prices.

    For fixed markups the adversary's value per partition ranges over
    [G_min^n, G_max^n] and the revenue ratio is minimized at a vertex of that
    box, so the 2^N corner configurations are enumerated exactly.
    """
    partitions = tuple(tuple(int(i) for i in p) for p in partitions)
    markups = np.asarray(markups, dtype=float)
    N = len(partitions)
    if markups.shape != (N,):
        raise ConfigurationError("markup vector length must match partitions")
    if N > 20:
        raise ConfigurationError(
            f"vertex-configuration enumeration refused for N={N} > 20"
        )
    session = AdversarySession(model, uset, np.asarray(costs, dtype=float),
                               partitions=partitions)
    g_min = np.empty(N)
    g_max = np.empty(N)
    for n in range(N):
        g_min[n] = session.minimize(markups[n], n).value
        g_max[n] = session.maximize(markups[n], n).value
    bits = (
        np.arange(2 ** N)[:, None] >> np.arange(N)[None, :]
    ) & 1
    g = np.where(bits == 1, g_max[None, :], g_min[None, :])
    rho = (g @ markups) / (1.0 + g.sum(axis=1))
    k = int(np.argmin(rho))
    if return_config:
        return float(rho[k]), bits[k].astype(int)
    return float(rho[k])


def sampled_worst_case(model, uset, costs, prices, n_samples, rng):
    """Monte-Carlo evaluation of fixed prices over the uncertainty set."""
    if n_samples < 1:
        raise ConfigurationError("n_samples must be >= 1")
    costs = np.asarray(costs, dtype=float)
    prices = np.asarray(prices, dtype=float)
    _, a, b = sample_scenarios(uset, n_samples, rng)
    revenues = expected_revenue_batch(model, a, b, costs, prices)
    return SampledEvaluation(
        worst=float(revenues.min()),
        average=float(revenues.mean()),
        max_value=float(revenues.max()),
        revenues=revenues,
    )
