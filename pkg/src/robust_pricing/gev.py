"""GEV choice models: generating functions, choice probabilities, revenue.

A GEV model is represented by its choice-probability generating function
G(Y) evaluated on utility exponentials Y_i = exp(a_i - b_i * x_i).  Two
variants are implemented: the multinomial logit, G(Y) = sum_i Y_i, and the
nested logit,

    G(Y) = sum_n ( sum_{i in C_n} (sigma_in * Y_i)^{mu_n} )^{mu / mu_n}.

Everything is computed in the log domain so choice probabilities never
overflow for large |a| or |b|: the internal representation is
(log G, log of Y_i dG_i) obtained from shifted exponentials, which is the
degree-one homogeneity rescaling trick expressed through logsumexp.

All functions here are pure and thread-safe.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError

__all__ = [
    "ProductLine",
    "ChoiceParams",
    "Nest",
    "GevModel",
    "utilities",
    "cpgf_value",
    "cpgf_weighted_grad",
    "choice_probabilities",
    "expected_revenue",
    "expected_revenue_batch",
    "partition_value",
    "partition_nest_map",
    "gev_property_check",
    "GevPropertyReport",
]


def _as_readonly(arr, dtype=float):
    out = np.array(arr, dtype=dtype)
    out.setflags(write=False)
    return out


def _logsumexp(x, axis=-1):
    """Plain logsumexp that tolerates all -inf slices."""
    m = np.max(x, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    out = np.squeeze(m, axis=axis) + np.log(np.sum(np.exp(x - m), axis=axis))
    return out


@dataclass(frozen=True)
class ProductLine:
    """Product costs plus a disjoint partition structure over {0..m-1}.

    Parameters
    ----------
    costs : array-like, shape (m,)
        Nonnegative unit costs c_i.
    partitions : sequence of sequences of int
        N disjoint, nonempty, 0-based index sets covering all m products.
    """

    costs: np.ndarray
    partitions: tuple

    def __init__(self, costs, partitions):
        costs = _as_readonly(costs)
        if costs.ndim != 1 or costs.size == 0:
            raise ConfigurationError("costs must be a nonempty 1-d vector")
        if not np.all(np.isfinite(costs)) or np.any(costs < 0):
            raise ConfigurationError("costs must be finite and >= 0")
        m = costs.size
        parts = tuple(tuple(int(i) for i in p) for p in partitions)
        if not parts or any(len(p) == 0 for p in parts):
            raise ConfigurationError("partitions must be nonempty")
        seen = [i for p in parts for i in p]
        if sorted(seen) != list(range(m)):
            raise ConfigurationError(
                "partitions must be disjoint and cover exactly {0..m-1}"
            )
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "partitions", parts)

    @property
    def m(self):
        return self.costs.size

    @property
    def n_partitions(self):
        return len(self.partitions)


@dataclass(frozen=True)
class ChoiceParams:
    """Quality intercepts ``a`` and positive price sensitivities ``b``."""

    a: np.ndarray
    b: np.ndarray

    def __init__(self, a, b):
        a = _as_readonly(a)
        b = _as_readonly(b)
        if a.shape != b.shape or a.ndim != 1:
            raise ConfigurationError("a and b must be 1-d vectors of equal length")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ConfigurationError("choice parameters must be finite")
        if np.any(b <= 0):
            raise ConfigurationError("price sensitivities b must be > 0")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def m(self):
        return self.a.size

    def is_homogeneous(self, tol=0.0):
        return bool(np.max(self.b) - np.min(self.b) <= tol)

    def is_partition_homogeneous(self, partitions, tol=0.0):
        return all(
            np.max(self.b[list(p)]) - np.min(self.b[list(p)]) <= tol
            for p in partitions
        )

    def shared_b(self):
        """The common sensitivity value; requires homogeneous b."""
        if not self.is_homogeneous():
            raise ConfigurationError("b is not homogeneous across products")
        return float(self.b[0])

    def partition_b(self, partitions):
        """Per-partition common sensitivity values, shape (N,)."""
        if not self.is_partition_homogeneous(partitions):
            raise ConfigurationError("b is not homogeneous within every partition")
        return np.array([self.b[p[0]] for p in partitions])


@dataclass(frozen=True)
class Nest:
    items: tuple
    mu_n: float
    sigma: tuple

    def __init__(self, items, mu_n, sigma=None):
        items = tuple(int(i) for i in items)
        if not items:
            raise ConfigurationError("a nest must contain at least one product")
        if sigma is None:
            sigma = (1.0,) * len(items)
        sigma = tuple(float(s) for s in sigma)
        if len(sigma) != len(items):
            raise ConfigurationError("sigma must match the nest's item count")
        if any(s < 0 for s in sigma) or all(s == 0 for s in sigma):
            raise ConfigurationError("sigma must be >= 0 with at least one positive")
        if not mu_n > 0:
            raise ConfigurationError("mu_n must be > 0")
        object.__setattr__(self, "items", items)
        object.__setattr__(self, "mu_n", float(mu_n))
        object.__setattr__(self, "sigma", sigma)


@dataclass(frozen=True)
class GevModel:
    """An MNL or nested-logit generating function.

    ``mu`` is the outer scale; degree-one homogeneity (and hence probability
    normalization) requires mu == 1, which is the default.  Construction
    enforces the RUM consistency condition mu_n >= mu for every nest.
    """

    variant: str
    mu: float = 1.0
    nests: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.variant not in ("mnl", "nested"):
            raise ConfigurationError(f"unknown GEV variant: {self.variant!r}")
        if self.variant == "nested":
            if not self.mu > 0:
                raise ConfigurationError("mu must be > 0")
            if not self.nests:
                raise ConfigurationError("nested model needs at least one nest")
            items = [i for n in self.nests for i in n.items]
            if len(items) != len(set(items)):
                raise ConfigurationError("nests must be disjoint")
            for n in self.nests:
                if n.mu_n < self.mu:
                    raise ConfigurationError(
                        f"RUM consistency requires mu_n >= mu; got "
                        f"mu_n={n.mu_n} < mu={self.mu}"
                    )

    @classmethod
    def mnl(cls):
        return cls(variant="mnl")

    @classmethod
    def nested_logit(cls, nests, mu=1.0):
        return cls(variant="nested", mu=float(mu), nests=tuple(nests))

    @property
    def degree(self):
        """Homogeneity degree of G: mu for nested, 1 for MNL."""
        return 1.0 if self.variant == "mnl" else self.mu

    # -- log-domain core ---------------------------------------------------

    def log_terms(self, u):
        """(log G, log(Y_i dG_i)) at utilities u = log Y; u has shape (..., m)."""
        u = np.asarray(u, dtype=float)
        if self.variant == "mnl":
            return _logsumexp(u, axis=-1), u
        logw = np.full_like(u, -np.inf)
        log_gn = []
        with np.errstate(divide="ignore"):
            log_mu = np.log(self.mu)
            for nest in self.nests:
                idx = list(nest.items)
                lsig = np.log(np.asarray(nest.sigma))
                s = nest.mu_n * (lsig + u[..., idx])
                t = _logsumexp(s, axis=-1)  # log sum (sigma Y)^mu_n
                log_gn.append((self.mu / nest.mu_n) * t)
                logw[..., idx] = (
                    log_mu + s + (self.mu / nest.mu_n - 1.0) * t[..., None]
                )
        log_g = _logsumexp(np.stack(log_gn, axis=-1), axis=-1)
        return log_g, logw

    def to_json(self):
        if self.variant == "mnl":
            return {"variant": "mnl"}
        return {
            "variant": "nested",
            "mu": self.mu,
            "nests": [
                {"items": list(n.items), "mu_n": n.mu_n, "sigma": list(n.sigma)}
                for n in self.nests
            ],
        }

    @classmethod
    def from_json(cls, obj):
        if obj["variant"] == "mnl":
            return cls.mnl()
        if obj["variant"] == "nested":
            nests = [
                Nest(n["items"], n["mu_n"], n.get("sigma"))
                for n in obj["nests"]
            ]
            return cls.nested_logit(nests, mu=obj.get("mu", 1.0))
        raise ConfigurationError(f"unknown GEV variant: {obj['variant']!r}")


def _check_positive_finite(Y):
    Y = np.asarray(Y, dtype=float)
    if not np.all(np.isfinite(Y)) or np.any(Y <= 0):
        raise DomainError("Y must be strictly positive and finite")
    return Y


def utilities(params, prices):
    """Y_i = exp(a_i - b_i x_i)."""
    prices = np.asarray(prices, dtype=float)
    if not np.all(np.isfinite(prices)):
        raise DomainError("prices must be finite")
    return np.exp(params.a - params.b * prices)


def cpgf_value(model, Y):
    """G(Y) for strictly positive Y."""
    Y = _check_positive_finite(Y)
    if getattr(model, "variant", None) == "mnl":
        return float(Y.sum())
    log_g, _ = model.log_terms(np.log(Y))
    return float(np.exp(log_g))


def cpgf_weighted_grad(model, Y):
    """The vector Y_i * dG_i(Y); sums to G(Y) for degree-one models."""
    Y = _check_positive_finite(Y)
    if getattr(model, "variant", None) == "mnl":
        return Y.copy()
    _, logw = model.log_terms(np.log(Y))
    return np.exp(logw)


def choice_probabilities(model, params, prices):
    """Purchase probabilities with the non-purchase option at index 0.

    Returns a vector of length m+1: entry 0 is P_0 = 1 / (1 + G) and entry
    i >= 1 is P_i = Y_i dG_i / (1 + G).  Computed in the log domain, so large
    utilities rescale instead of overflowing.
    """
    prices = np.asarray(prices, dtype=float)
    if prices.shape != (params.m,):
        raise ConfigurationError("prices length must match params")
    if not np.all(np.isfinite(prices)):
        raise DomainError("prices must be finite")
    u = params.a - params.b * prices
    log_g, logw = model.log_terms(u)
    log_denom = np.logaddexp(0.0, log_g)
    out = np.empty(params.m + 1)
    out[0] = np.exp(-log_denom)
    out[1:] = np.exp(logw - log_denom)
    return out


def expected_revenue(model, params, costs, prices):
    """Phi(x, a, b) = sum_i (x_i - c_i) P_i."""
    costs = np.asarray(costs, dtype=float)
    prices = np.asarray(prices, dtype=float)
    if costs.shape != prices.shape or costs.shape != (params.m,):
        raise ConfigurationError("costs/prices length mismatch")
    probs = choice_probabilities(model, params, prices)
    return float(np.dot(prices - costs, probs[1:]))


def expected_revenue_batch(model, a, b, costs, prices):
    """Vectorized Phi over scenario rows of parameters.

    ``a`` and ``b`` have shape (S, m); returns shape (S,).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    prices = np.asarray(prices, dtype=float)
    costs = np.asarray(costs, dtype=float)
    u = a - b * prices[None, :]
    log_g, logw = model.log_terms(u)
    log_denom = np.logaddexp(0.0, log_g)
    probs = np.exp(logw - log_denom[..., None])
    return probs @ (prices - costs)


def partition_nest_map(model, partitions):
    """Map partition index -> nest index, validating separability.

    The MNL is separable over any partition (identity map is returned); a
    nested model is separable only when its nests coincide with the declared
    partitions as index sets.
    """
    if model.variant == "mnl":
        return list(range(len(partitions)))
    mapping = []
    nest_sets = [frozenset(n.items) for n in model.nests]
    for p in partitions:
        try:
            mapping.append(nest_sets.index(frozenset(p)))
        except ValueError:
            raise ConfigurationError(
                "nested model is not separable over the declared partitions: "
                f"no nest matches partition {tuple(p)}"
            ) from None
    return mapping


def _sigma_in_partition_order(nest, part):
    """Nest inclusion weights realigned to the partition's product order."""
    pos = {i: k for k, i in enumerate(part)}
    out = np.empty(len(part))
    for j, item in enumerate(nest.items):
        out[pos[item]] = nest.sigma[j]
    return out


def log_partition_value(model, partitions, n, u_sub):
    """log G^n at sub-utilities for partition n (u_sub aligned with partitions[n])."""
    if model.variant == "mnl":
        return _logsumexp(np.asarray(u_sub, dtype=float), axis=-1)
    nest = model.nests[partition_nest_map(model, partitions)[n]]
    sigma = _sigma_in_partition_order(nest, partitions[n])
    u = np.asarray(u_sub, dtype=float)
    with np.errstate(divide="ignore"):
        s = nest.mu_n * (np.log(sigma) + u)
    return (model.mu / nest.mu_n) * _logsumexp(s, axis=-1)


def partition_value(model, partitions, n, z_n, params, costs):
    """G^n(Y^n | z_n) with Y_i = exp(a_i - b_i (z_n + c_i)) for i in partition n."""
    costs = np.asarray(costs, dtype=float)
    idx = list(partitions[n])
    u = params.a[idx] - params.b[idx] * (float(z_n) + costs[idx])
    return float(np.exp(log_partition_value(model, partitions, n, u)))


@dataclass
class GevPropertyReport:
    nonnegative: bool
    homogeneity: bool
    euler: bool
    mixed_partials: bool
    details: dict

    @property
    def all_pass(self):
        return (
            self.nonnegative and self.homogeneity
            and self.euler and self.mixed_partials
        )


def _value_grad_generic(model, Y):
    """(G, weighted grad) that also works for duck-typed test models."""
    if hasattr(model, "log_terms"):
        log_g, logw = model.log_terms(np.log(Y))
        return float(np.exp(log_g)), np.exp(logw)
    return float(model.value(Y)), np.asarray(model.weighted_grad(Y), dtype=float)


def _value_generic(model, Y):
    return _value_grad_generic(model, Y)[0]


def gev_property_check(model, Y, tol=1e-10, mixed_step=1e-4, mixed_tol=1e-4,
                       rng=None):
    """Numerically check the defining CPGF properties at the point Y.

    Checks nonnegativity, degree-one homogeneity on random scalings, the
    Euler identity sum_i Y_i dG_i = G, and sum_j Y_j dG_ij = 0 via
    second-order central differences of G.  Returns a pass/fail report; it
    never raises on a failed property.
    """
    Y = _check_positive_finite(Y)
    rng = np.random.default_rng(0) if rng is None else rng
    g, w = _value_grad_generic(model, Y)
    details = {"G": g}

    nonneg = g >= 0 and np.isfinite(g)

    hom_err = 0.0
    for lam in rng.uniform(0.1, 10.0, size=8):
        g_scaled = _value_generic(model, lam * Y)
        hom_err = max(hom_err, abs(g_scaled - lam * g) / (lam * (1.0 + abs(g))))
    homogeneity = hom_err <= tol
    details["homogeneity_err"] = hom_err

    euler_err = abs(np.sum(w) - g) / (1.0 + abs(g))
    euler = euler_err <= max(tol, 1e-9)
    details["euler_err"] = euler_err

    # (vi): mixed partials dG_ij from pure second differences of G.
    m = Y.size
    h = mixed_step * Y
    hess = np.empty((m, m))
    for i in range(m):
        for j in range(i, m):
            if i == j:
                yp = Y.copy(); yp[i] += h[i]
                ym = Y.copy(); ym[i] -= h[i]
                hess[i, i] = (
                    _value_generic(model, yp) - 2.0 * g + _value_generic(model, ym)
                ) / h[i] ** 2
            else:
                ypp = Y.copy(); ypp[i] += h[i]; ypp[j] += h[j]
                ypm = Y.copy(); ypm[i] += h[i]; ypm[j] -= h[j]
                ymp = Y.copy(); ymp[i] -= h[i]; ymp[j] += h[j]
                ymm = Y.copy(); ymm[i] -= h[i]; ymm[j] -= h[j]
                hess[i, j] = hess[j, i] = (
                    _value_generic(model, ypp) - _value_generic(model, ypm)
                    - _value_generic(model, ymp) + _value_generic(model, ymm)
                ) / (4.0 * h[i] * h[j])
    row_sums = hess @ Y
    mixed_err = float(np.max(np.abs(row_sums)))
    mixed = mixed_err <= mixed_tol * (1.0 + abs(g))
    details["mixed_partial_err"] = mixed_err

    return GevPropertyReport(nonneg, homogeneity, euler, mixed, details)
