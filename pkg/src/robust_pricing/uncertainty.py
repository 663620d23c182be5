"""Mixture-polytope uncertainty sets over choice parameters.

The set is the convex hull slice
    { w = sum_k lambda_k w^k :  sum lambda = 1,  lambda >= 0,
      |lambda_k - tau_k| <= eps }
built from K anchor parameter vectors (customer types), nominal proportions
tau and an uncertainty level eps in [0, 1].  In partition mode an
independent copy of the same lambda-polytope drives each product partition.

Set objects are immutable; sampling takes a caller-supplied numpy Generator.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError, DomainError
from .gev import ChoiceParams, _as_readonly

_FEAS_TOL = 1e-9


@dataclass(frozen=True)
class MixtureUncertaintySet:
    anchors: tuple
    tau: np.ndarray
    eps: float
    mode: str = "joint"
    partitions: tuple = None

    def __init__(self, anchors, tau, eps, mode="joint", partitions=None):
        anchors = tuple(anchors)
        if not anchors:
            raise ConfigurationError("need at least one anchor")
        m = anchors[0].m
        if any(w.m != m for w in anchors):
            raise ConfigurationError("anchors must share the same length")
        tau = _as_readonly(tau)
        if tau.shape != (len(anchors),):
            raise ConfigurationError("tau length must equal the anchor count")
        if np.any(tau < -1e-12) or abs(tau.sum() - 1.0) > 1e-9:
            raise ConfigurationError("tau must lie on the probability simplex")
        if not 0.0 <= eps <= 1.0:
            raise ConfigurationError("eps must be in [0, 1]")
        if mode not in ("joint", "partition"):
            raise ConfigurationError(f"unknown mode: {mode!r}")
        if mode == "joint":
            if not all(w.is_homogeneous() for w in anchors):
                raise ConfigurationError(
                    "joint mode requires homogeneous b in every anchor"
                )
            partitions = None
        else:
            if partitions is None:
                raise ConfigurationError("partition mode requires partitions")
            partitions = tuple(tuple(int(i) for i in p) for p in partitions)
            if not all(w.is_partition_homogeneous(partitions) for w in anchors):
                raise ConfigurationError(
                    "partition mode requires partition-homogeneous b anchors"
                )
        object.__setattr__(self, "anchors", anchors)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "eps", float(eps))
        object.__setattr__(self, "mode", mode)
        object.__setattr__(self, "partitions", partitions)

    @property
    def K(self):
        return len(self.anchors)

    @property
    def m(self):
        return self.anchors[0].m

    @property
    def n_partitions(self):
        return len(self.partitions) if self.partitions else 1

    def anchor_matrix(self):
        """(A, B) anchor matrices of shape (K, m)."""
        return (
            np.stack([w.a for w in self.anchors]),
            np.stack([w.b for w in self.anchors]),
        )

    def weight_box(self):
        """Per-coordinate bounds (lo, hi) of the feasible lambda box."""
        lo = np.maximum(0.0, self.tau - self.eps)
        hi = np.minimum(1.0, self.tau + self.eps)
        return lo, hi

    def with_eps(self, eps):
        return replace(self, eps=float(eps))

    def to_json(self):
        return {
            "anchors": [
                {"a": w.a.tolist(), "b": w.b.tolist()} for w in self.anchors
            ],
            "tau": self.tau.tolist(),
            "eps": self.eps,
            "mode": self.mode,
        }

    @classmethod
    def from_json(cls, obj, partitions=None):
        anchors = [ChoiceParams(w["a"], w["b"]) for w in obj["anchors"]]
        return cls(anchors, obj["tau"], obj["eps"], mode=obj["mode"],
                   partitions=partitions)


def weight_feasible(uset, lam, tol=_FEAS_TOL):
    lam = np.asarray(lam, dtype=float)
    lo, hi = uset.weight_box()
    rows = lam[None, :] if lam.ndim == 1 else lam
    return bool(
        np.all(np.abs(rows.sum(axis=-1) - 1.0) <= tol)
        and np.all(rows >= lo - tol)
        and np.all(rows <= hi + tol)
    )


def params_at(uset, lam):
    """Parameters at mixture weights.

    ``lam`` has shape (K,) in joint mode and (N, K) in partition mode (one
    independent weight vector per partition).  The anchors carry one shared
    sensitivity per (partition-)block, so b is mixed as that scalar and
    broadcast: the homogeneity pattern survives mixing exactly, not just up
    to rounding.
    """
    lam = np.asarray(lam, dtype=float)
    A, B = uset.anchor_matrix()
    if uset.mode == "joint":
        if lam.shape != (uset.K,):
            raise DomainError("joint mode expects a single weight vector")
        if not weight_feasible(uset, lam):
            raise DomainError("mixture weights are infeasible for the set")
        b_shared = float(lam @ B[:, 0])
        return ChoiceParams(lam @ A, np.full(uset.m, b_shared))
    if lam.shape != (uset.n_partitions, uset.K):
        raise DomainError("partition mode expects one weight vector per partition")
    if not weight_feasible(uset, lam):
        raise DomainError("mixture weights are infeasible for the set")
    a = np.empty(uset.m)
    b = np.empty(uset.m)
    for n, part in enumerate(uset.partitions):
        idx = list(part)
        a[idx] = lam[n] @ A[:, idx]
        b[idx] = float(lam[n] @ B[:, idx[0]])
    return ChoiceParams(a, b)


def params_batch(uset, lam):
    """Vectorized params_at: lam (S, K) or (S, N, K) -> (A, B) of shape (S, m)."""
    lam = np.asarray(lam, dtype=float)
    A, B = uset.anchor_matrix()
    if uset.mode == "joint":
        b_shared = lam @ B[:, 0]
        return lam @ A, np.broadcast_to(b_shared[:, None],
                                        (lam.shape[0], uset.m)).copy()
    S = lam.shape[0]
    a = np.empty((S, uset.m))
    b = np.empty((S, uset.m))
    for n, part in enumerate(uset.partitions):
        idx = list(part)
        a[:, idx] = lam[:, n, :] @ A[:, idx]
        b[:, idx] = (lam[:, n, :] @ B[:, idx[0]])[:, None]
    return a, b


def coordinate_bounds(uset):
    """Exact coordinatewise bounds of sum_k lambda_k w^k over the polytope.

    Returns (a_lo, a_hi, b_lo, b_hi), each of length m.  Per coordinate the
    extreme value of the linear objective over {sum lambda = 1, box} is the
    greedy fractional allocation: start every weight at its lower bound and
    push the remaining mass toward the most favorable anchors.
    """
    A, B = uset.anchor_matrix()
    lo, hi = uset.weight_box()

    def extreme(values, want_max):
        order = np.argsort(-values if want_max else values)
        lam = lo.copy()
        room = 1.0 - lam.sum()
        for k in order:
            take = min(room, hi[k] - lo[k])
            lam[k] += take
            room -= take
            if room <= 0:
                break
        return float(lam @ values)

    m = uset.m
    a_lo = np.array([extreme(A[:, i], False) for i in range(m)])
    a_hi = np.array([extreme(A[:, i], True) for i in range(m)])
    b_lo = np.array([extreme(B[:, i], False) for i in range(m)])
    b_hi = np.array([extreme(B[:, i], True) for i in range(m)])
    return a_lo, a_hi, b_lo, b_hi


def project_box_capped_sum(v, lo, hi, total=1.0):
    """Euclidean projection onto {lo <= x <= hi, sum x = total}.

    Solved through the scalar dual of the sum constraint: x(nu) =
    clip(v - nu, lo, hi) with sum x(nu) piecewise linear and non-increasing
    in nu, so the exact multiplier comes from interpolating between the two
    bracketing breakpoints.
    """
    v = np.asarray(v, dtype=float)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), v.shape)
    hi = np.broadcast_to(np.asarray(hi, dtype=float), v.shape)
    bps = np.unique(np.concatenate([v - hi, v - lo]))
    svals = np.clip(v[None, :] - bps[:, None], lo, hi).sum(axis=1)
    if total >= svals[0]:  # at or beyond sum(hi): clamp to the box top
        return np.clip(v - bps[0], lo, hi)
    if total <= svals[-1]:  # at or beyond sum(lo)
        return np.clip(v - bps[-1], lo, hi)
    j = int(np.searchsorted(-svals, -total, side="right")) - 1
    if svals[j] - svals[j + 1] <= 0:
        nu = bps[j]
    else:
        nu = bps[j] + (svals[j] - total) * (bps[j + 1] - bps[j]) / (
            svals[j] - svals[j + 1]
        )
    return np.clip(v - nu, lo, hi)


def project_weights(uset, v):
    """Euclidean projection of v onto the feasible lambda polytope."""
    v = np.asarray(v, dtype=float)
    if v.shape != (uset.K,):
        raise DomainError("expected a length-K vector")
    if not np.all(np.isfinite(v)):
        raise DomainError("projection target must be finite")
    lo, hi = uset.weight_box()
    return project_box_capped_sum(v, lo, hi, total=1.0)


def sample_weights_batch(uset, n_rows, rng):
    """n_rows approximately-uniform lambda draws, shape (n_rows, K).

    Hit-and-run chains on the (K-1)-dimensional polytope with 50*K burn-in
    steps per draw; eps >= 1 degenerates to the full simplex and is sampled
    exactly via Dirichlet(1, ..., 1).
    """
    K = uset.K
    lo, hi = uset.weight_box()
    if uset.eps == 0.0 or np.all(hi - lo <= 1e-14):
        return np.tile(uset.tau, (n_rows, 1))
    if uset.eps >= 1.0:
        return rng.dirichlet(np.ones(K), size=n_rows)

    free = hi - lo > 1e-14
    if free.sum() < 2:
        return np.tile(uset.tau, (n_rows, 1))
    lam = np.tile(uset.tau, (n_rows, 1))
    for _ in range(50 * K):
        d = rng.standard_normal((n_rows, K))
        d[:, ~free] = 0.0
        d[:, free] -= d[:, free].mean(axis=1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            t_hi = np.where(d > 0, (hi - lam) / d,
                            np.where(d < 0, (lo - lam) / d, np.inf))
            t_lo = np.where(d > 0, (lo - lam) / d,
                            np.where(d < 0, (hi - lam) / d, -np.inf))
        t_max = t_hi.min(axis=1)
        t_min = t_lo.max(axis=1)
        t = t_min + rng.random(n_rows) * (t_max - t_min)
        lam = np.clip(lam + t[:, None] * d, lo, hi)
    return lam


def sample_uniform(uset, rng):
    """One approximately-uniform draw: (lambda, ChoiceParams).

    In partition mode the returned lambda has shape (N, K) with one
    independent weight vector per partition.
    """
    if uset.mode == "joint":
        lam = sample_weights_batch(uset, 1, rng)[0]
    else:
        lam = sample_weights_batch(uset, uset.n_partitions, rng)
    return lam, params_at(uset, lam)


def sample_scenarios(uset, n, rng):
    """n parameter draws as stacked matrices (lam, A, B) for batch evaluation."""
    if uset.mode == "joint":
        lam = sample_weights_batch(uset, n, rng)
    else:
        N = uset.n_partitions
        flat = sample_weights_batch(uset, n * N, rng)
        lam = flat.reshape(n, N, uset.K)
    a, b = params_batch(uset, lam)
    return lam, a, b
