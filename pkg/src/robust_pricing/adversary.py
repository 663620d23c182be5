"""Adversary subproblems: extremize the CPGF over the uncertainty polytope.

For constant-markup prices the worst case of the expected revenue reduces to
extremizing G(Y | z, a, b) over the parameter set, which through the affine
mixture map becomes a smooth convex problem in the weights lambda.  The
minimizer is found by projected gradient descent with Armijo backtracking;
the maximum of a convex function over the polytope sits at a vertex and is
found by enumerating them.

A session object carries warm-start state (previous minimizers, the vertex
list) across nearby calls; sessions must not be shared between threads.
"""

from dataclasses import dataclass
from itertools import product as _iproduct

import numpy as np

from .errors import ConfigurationError, ConvergenceError, NumericError
from .gev import ChoiceParams, _logsumexp
from .uncertainty import project_box_capped_sum

__all__ = [
    "AdversarySolution",
    "AdversarySession",
    "minimize_cpgf",
    "maximize_cpgf",
    "min_cpgf_inverse",
]


@dataclass
class AdversarySolution:
    """Extremizer of G over the set: weights, parameters, value, diagnostics."""

    lambda_star: np.ndarray
    params_star: ChoiceParams
    value: float
    iterations: int
    residual: float
    indices: tuple  # product indices the solution covers

    @property
    def b_value(self):
        """Common price-sensitivity value of the extremal parameters."""
        return float(self.params_star.b[0])


def _partition_log_terms(model, partitions, n, u):
    """(log G^n, log weighted grad) over one partition; u aligned to it."""
    u = np.asarray(u, dtype=float)
    if model.variant == "mnl":
        return _logsumexp(u, axis=-1), u
    from .gev import _sigma_in_partition_order, partition_nest_map

    nest = model.nests[partition_nest_map(model, partitions)[n]]
    sigma = _sigma_in_partition_order(nest, partitions[n])
    with np.errstate(divide="ignore"):
        s = nest.mu_n * (np.log(sigma) + u)
    t = _logsumexp(s, axis=-1)
    log_gn = (model.mu / nest.mu_n) * t
    logw = np.log(model.mu) + s + (model.mu / nest.mu_n - 1.0) * t[..., None]
    return log_gn, logw


class AdversarySession:
    """Warm-started adversary solver bound to (model, set, costs, partitions)."""

    def __init__(self, model, uset, costs, partitions=None, tol=1e-9,
                 max_iter=10_000, inverse_tol=1e-9):
        self.model = model
        self.uset = uset
        self.costs = np.asarray(costs, dtype=float)
        self.partitions = (
            tuple(tuple(int(i) for i in p) for p in partitions)
            if partitions is not None else uset.partitions
        )
        self.tol = tol
        self.max_iter = max_iter
        self.inverse_tol = inverse_tol
        self._warm = {}
        self._vertices = None
        self._anchor_a, self._anchor_b = uset.anchor_matrix()
        self._box = uset.weight_box()
        self._slice_cache = {}

    # -- geometry ----------------------------------------------------------

    def _check_partition_arg(self, partition):
        if partition is None and self.uset.mode != "joint":
            raise ConfigurationError(
                "joint adversary calls require a joint-mode uncertainty set"
            )
        if partition is not None:
            if self.uset.mode != "partition":
                raise ConfigurationError(
                    "per-partition adversary calls require a partition-mode set"
                )
            if self.partitions is None or not (
                0 <= partition < len(self.partitions)
            ):
                raise ConfigurationError(f"bad partition index {partition!r}")

    def _slice(self, z, partition):
        """Anchor utility matrix U (K, |I|): u(lam) = lam @ U for markup z."""
        cached = self._slice_cache.get(partition)
        if cached is None:
            if partition is None:
                idx = np.arange(self.uset.m)
            else:
                idx = np.asarray(self.partitions[partition], dtype=int)
            a_sub = self._anchor_a[:, idx]
            b_sub = self._anchor_b[:, idx]
            cached = (idx, a_sub - b_sub * self.costs[idx], b_sub)
            self._slice_cache[partition] = cached
        idx, u_zero, b_sub = cached
        return idx, u_zero - float(z) * b_sub

    def _log_terms_at(self, u, partition):
        if partition is None:
            return self.model.log_terms(u)
        return _partition_log_terms(self.model, self.partitions, partition, u)

    def vertices(self):
        """Vertices of {lo <= lam <= hi, sum lam = 1} (cached)."""
        if self._vertices is not None:
            return self._vertices
        K = self.uset.K
        if K > 12:
            raise ConfigurationError(
                f"vertex enumeration refused for K={K} > 12 anchors"
            )
        lo, hi = self.uset.weight_box()
        if K == 1:
            self._vertices = np.array([[1.0]])
            return self._vertices
        rows = []
        bit_grid = np.array(list(_iproduct((0, 1), repeat=K - 1)), dtype=float)
        for free in range(K):
            others = [k for k in range(K) if k != free]
            fixed = lo[others] + bit_grid * (hi[others] - lo[others])
            rest = 1.0 - fixed.sum(axis=1)
            ok = (rest >= lo[free] - 1e-12) & (rest <= hi[free] + 1e-12)
            if not np.any(ok):
                continue
            v = np.empty((int(ok.sum()), K))
            v[:, others] = fixed[ok]
            v[:, free] = np.clip(rest[ok], lo[free], hi[free])
            rows.append(v)
        verts = np.vstack(rows)
        self._vertices = np.unique(np.round(verts, 12), axis=0)
        return self._vertices

    # -- minimization --------------------------------------------------------

    def minimize(self, z, partition=None):
        """argmin over the set of G(Y | z) (whole line or one partition).

        Strict convexity of G in (a, b) makes the extremal parameters unique.
        The descent works on log G (same minimizer, gradients are positive
        multiples of G's), which keeps values and the projected-gradient
        residual || lam - P(lam - grad) || scale-free no matter how extreme
        the markup is; the residual must fall below the session tolerance.
        """
        self._check_partition_arg(partition)
        idx, U = self._slice(z, partition)

        def value_at(l):
            return float(np.exp(self._log_terms_at(l @ U, partition)[0]))

        if self.uset.eps == 0.0:
            lam = self.uset.tau.copy()
            return self._solution(lam, U, idx, value_at(lam), 0, 0.0)

        lo, hi = self._box
        key = ("min", partition)
        lam = self._warm.get(key)
        if lam is None:
            lam = project_box_capped_sum(self.uset.tau, lo, hi)

        def f_and_grad(l):
            log_g, logw = self._log_terms_at(l @ U, partition)
            return float(log_g), U @ np.exp(logw - log_g)

        val, grad = f_and_grad(lam)
        bb_step = 1.0
        residual = np.inf
        for it in range(self.max_iter):
            target = project_box_capped_sum(lam - grad, lo, hi)
            residual = float(np.linalg.norm(lam - target))
            if residual <= self.tol:
                break
            # Armijo backtracking from the spectral (Barzilai-Borwein) step;
            # plain unit steps crawl on ill-conditioned anchor mixtures.
            step, accepted = min(max(bb_step, 1e-10), 1e10), False
            while step >= 1e-18:
                cand = project_box_capped_sum(lam - step * grad, lo, hi)
                if not np.any(cand != lam):  # no movement is not progress
                    break
                cval, cgrad = f_and_grad(cand)
                if cval <= val + 1e-4 * float(grad @ (cand - lam)):
                    d_lam = cand - lam
                    d_grad = cgrad - grad
                    curv = float(d_lam @ d_grad)
                    if curv > 0:
                        bb_step = float(d_lam @ d_lam) / curv
                    lam, val, grad = cand, cval, cgrad
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                # Value comparisons are float-flat here; finish with pure
                # gradient-mapping steps, which only need the (analytic)
                # gradient and keep contracting past the value noise floor.
                lam, residual, polish_its = self._gradient_polish(
                    f_and_grad, lam, grad, bb_step, lo, hi
                )
                it += polish_its
                if residual > 10 * self.tol:
                    raise ConvergenceError(
                        f"adversary stalled at residual {residual:.3e}",
                        best=self._solution(lam, U, idx, value_at(lam), it,
                                            residual),
                    )
                break
        else:
            raise ConvergenceError(
                f"adversary iteration cap {self.max_iter} exceeded",
                best=self._solution(lam, U, idx, value_at(lam),
                                    self.max_iter, residual),
            )
        self._warm[key] = lam.copy()
        return self._solution(lam, U, idx, value_at(lam), it, residual)

    def _gradient_polish(self, f_and_grad, lam, grad, step, lo, hi,
                         max_steps=300):
        """Descent endgame on the gradient mapping alone (no value tests)."""
        step = min(max(step, 1e-8), 1e3)
        best_lam = lam
        best_res = float(np.linalg.norm(
            lam - project_box_capped_sum(lam - grad, lo, hi)
        ))
        since_best = 0
        for it in range(max_steps):
            if best_res <= self.tol:
                break
            new_lam = project_box_capped_sum(lam - step * grad, lo, hi)
            _, new_grad = f_and_grad(new_lam)
            d_lam = new_lam - lam
            d_grad = new_grad - grad
            curv = float(d_lam @ d_grad)
            if curv > 0:
                step = min(max(float(d_lam @ d_lam) / curv, 1e-9), 1e3)
            lam, grad = new_lam, new_grad
            res = float(np.linalg.norm(
                lam - project_box_capped_sum(lam - grad, lo, hi)
            ))
            if res < best_res:
                best_lam, best_res = lam, res
                since_best = 0
            else:
                since_best += 1
                if since_best >= 20:
                    step *= 0.5
                    lam = best_lam
                    _, grad = f_and_grad(lam)
                    since_best = 0
        return best_lam, best_res, it + 1

    def maximize(self, z, partition=None):
        """max over the set of G(Y | z): convex maximization, vertex-attained."""
        self._check_partition_arg(partition)
        idx, U = self._slice(z, partition)
        verts = self.vertices()
        log_g, _ = self._log_terms_at(verts @ U, partition)
        k = int(np.argmax(log_g))
        return self._solution(verts[k], U, idx, float(np.exp(log_g[k])),
                              0, 0.0)

    def _solution(self, lam, U, idx, value, iterations, residual):
        params = ChoiceParams(lam @ self._anchor_a[:, idx],
                              lam @ self._anchor_b[:, idx])
        if not np.isfinite(value) or value <= 0:
            raise NumericError(f"degenerate adversary value {value!r}")
        return AdversarySolution(lam.copy(), params, value, iterations,
                                 residual, tuple(int(i) for i in idx))

    # -- inverse of the minimized CPGF ---------------------------------------

    def min_value_inverse(self, alpha, partition, hint=None, tol=None,
                          max_doublings=200):
        """z such that min_G(z) == alpha, with min_G strictly decreasing.

        Brackets by doubling (from z = 0, or around ``hint``), then shrinks
        the bracket until |min_G(z) - alpha| <= tol * (1 + alpha).  Inside
        the bracket a Newton step on log min_G is tried first -- the slope is
        known exactly, d log min_G / dz = -b*(z), by the envelope theorem --
        and bisection is the fallback whenever Newton leaves the bracket.
        Returns (z, adversary solution at z).
        """
        tol = self.inverse_tol if tol is None else tol
        if not alpha > 0 or not np.isfinite(alpha):
            raise NumericError(f"inverse target must be positive, got {alpha!r}")

        def g(z):
            return self.minimize(z, partition)

        target_tol = tol * (1.0 + alpha)
        log_alpha = np.log(alpha)
        if hint is not None and np.isfinite(hint):
            z = float(hint)
            sol = g(z)
            if abs(sol.value - alpha) <= target_tol:
                return z, sol
            delta = 1e-3
            n = 0
            if sol.value > alpha:  # root lies to the right of the hint
                z_lo, z_hi = z, z + delta
                while g(z_hi).value > alpha:
                    delta *= 2.0
                    z_lo, z_hi = z_hi, z_hi + delta
                    n += 1
                    if n > max_doublings:
                        raise NumericError("inverse bracketing failed (high side)")
            else:
                z_hi, z_lo = z, z - delta
                while g(z_lo).value < alpha:
                    delta *= 2.0
                    z_hi, z_lo = z_lo, z_lo - delta
                    n += 1
                    if n > max_doublings:
                        raise NumericError("inverse bracketing failed (low side)")
        else:
            if g(0.0).value >= alpha:
                z_lo, z_hi, w = 0.0, 1.0, 1.0
                n = 0
                while g(z_hi).value > alpha:
                    z_lo, z_hi, w = z_hi, z_hi + w, 2.0 * w
                    n += 1
                    if n > max_doublings:
                        raise NumericError("inverse bracketing failed")
            else:
                z_lo, z_hi, w = -1.0, 0.0, 1.0
                n = 0
                while g(z_lo).value < alpha:
                    z_hi, z_lo, w = z_lo, z_lo - w, 2.0 * w
                    n += 1
                    if n > max_doublings:
                        raise NumericError("inverse bracketing failed")

        z = 0.5 * (z_lo + z_hi)
        for _ in range(300):
            sol = g(z)
            if abs(sol.value - alpha) <= target_tol:
                break
            if sol.value > alpha:
                z_lo = z
            else:
                z_hi = z
            if z_hi - z_lo <= 4e-16 * max(1.0, abs(z)):
                break
            z_newton = z + (np.log(sol.value) - log_alpha) / sol.b_value
            if z_lo < z_newton < z_hi:
                z = z_newton
            else:
                z = 0.5 * (z_lo + z_hi)
        if abs(sol.value - alpha) > 10 * target_tol:
            raise NumericError(
                f"inverse solve failed: |G-alpha|={abs(sol.value - alpha):.3e}"
            )
        return z, sol


def minimize_cpgf(model, uset, costs, z, partition=None, tol=1e-9,
                  max_iter=10_000):
    """One-shot minimum of G(Y | z) over the set; see AdversarySession."""
    return AdversarySession(model, uset, costs, tol=tol,
                            max_iter=max_iter).minimize(z, partition)


def maximize_cpgf(model, uset, costs, z, partition=None):
    """One-shot maximum of G(Y | z) over the set (vertex enumeration)."""
    return AdversarySession(model, uset, costs).maximize(z, partition)


def min_cpgf_inverse(model, uset, costs, partition, alpha, tol=1e-9):
    """z solving min_G(z) == alpha for one partition."""
    session = AdversarySession(model, uset, costs)
    z, _ = session.min_value_inverse(alpha, partition, tol=tol)
    return z
