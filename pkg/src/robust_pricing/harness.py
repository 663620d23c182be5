"""Instance generation, experiment orchestration, metrics and file output.

Reproduces the comparison protocol: for each uncertainty level the robust
solver (RO) is run against the deterministic (DET) and sampling-based (SA10,
SA50) baselines, every method's prices are scored on one shared scenario
sample drawn uniformly from the set, and the worst/average/max revenues,
revenue histograms and percentile ranks of the RO worst case are reported.

Everything is deterministic given (instance seed, run seed): per-cell RNG
streams are derived with SeedSequence.spawn, so results are independent of
the thread count chosen through ROBUST_PRICING_THREADS.

Instance generation draws from fixed documented distributions: costs ~
U[0.5, 2], anchor intercepts ~ U[0, 2], per-partition anchor sensitivities
~ U[0.5, 2], nest scales mu_n ~ U[1, 2] (mu = 1), proportions tau ~
Dirichlet(1, ..., 1).  These put typical revenues in the single-digit
range.
"""

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .baselines import det_baseline, sampling_baseline
from .errors import ConfigurationError, DomainError, PricingError
from .gev import ChoiceParams, GevModel, Nest, ProductLine, expected_revenue_batch
from .penalty import PenaltySpec, penalty_profit_batch, robust_penalty_solve
from .pricing_robust import robust_price_homogeneous, robust_price_partition
from .uncertainty import MixtureUncertaintySet, sample_scenarios

__all__ = [
    "Instance",
    "GenerationRanges",
    "generate_instance",
    "instance_to_json",
    "instance_from_json",
    "MethodRow",
    "EvaluationReport",
    "run_comparison",
    "run_penalty_comparison",
    "percentile_rank",
    "comparison_csv",
    "penalty_comparison_csv",
    "histograms_json",
    "solutions_json",
    "CSV_HEADER",
    "PENALTY_CSV_HEADER",
]

CSV_HEADER = "eps,method,average,worst,max,percentile_rank_vs_ro_worst"
PENALTY_CSV_HEADER = (
    "lambda,eps,method,average,worst,max,violation,percentile_rank_vs_ro_worst"
)


@dataclass(frozen=True)
class GenerationRanges:
    cost: tuple = (0.5, 2.0)
    a: tuple = (0.0, 2.0)
    b: tuple = (0.5, 2.0)
    mu_n: tuple = (1.0, 2.0)


@dataclass(frozen=True)
class Instance:
    products: ProductLine
    model: GevModel
    uncertainty: MixtureUncertaintySet
    penalty: object  # PenaltySpec or None
    seed: int

    def __post_init__(self):
        m = self.products.m
        if self.uncertainty.m != m:
            raise ConfigurationError("uncertainty set length does not match m")
        if self.uncertainty.mode == "partition":
            if self.uncertainty.partitions != self.products.partitions:
                raise ConfigurationError(
                    "uncertainty partitions must match the product line"
                )
        if self.model.variant == "nested":
            covered = sorted(i for nest in self.model.nests for i in nest.items)
            if covered != list(range(m)):
                raise ConfigurationError("model nests must cover all products")
        if self.penalty is not None and self.penalty.alpha.shape[1] != m:
            raise ConfigurationError("penalty coefficients length mismatch")

    @property
    def solver_mode(self):
        return "homogeneous" if self.uncertainty.mode == "joint" else "partition"


def generate_instance(seed, m=50, k=5, n_partitions=5, eps=0.1,
                      psp="partition", variant="nested", ranges=None):
    """Random instance with the experiment-protocol shape.

    ``psp`` controls the sensitivity pattern of the anchors: "homogeneous"
    gives every anchor one shared b (joint-mode set), "partition" one b per
    partition (partition-mode set).  A single partition always degenerates
    to the homogeneous mode.  Draw order is fixed, so equal seeds give
    byte-identical instance JSON.
    """
    ranges = ranges or GenerationRanges()
    if psp not in ("homogeneous", "partition"):
        raise ConfigurationError(f"unknown psp mode: {psp!r}")
    if n_partitions < 1 or m < n_partitions:
        raise ConfigurationError("need 1 <= n_partitions <= m")
    if n_partitions > 1 and m % n_partitions != 0:
        raise ConfigurationError(
            "m must split into equal partitions when n_partitions > 1"
        )
    size = m // n_partitions
    partitions = tuple(
        tuple(range(n * size, (n + 1) * size)) for n in range(n_partitions)
    )
    if n_partitions == 1:
        psp = "homogeneous"

    rng = np.random.default_rng(seed)
    costs = rng.uniform(*ranges.cost, size=m)
    anchors = []
    for _ in range(k):
        a = rng.uniform(*ranges.a, size=m)
        if psp == "homogeneous":
            b = np.full(m, rng.uniform(*ranges.b))
        else:
            b = np.empty(m)
            for part in partitions:
                b[list(part)] = rng.uniform(*ranges.b)
        anchors.append(ChoiceParams(a, b))
    if variant == "nested":
        nests = [
            Nest(part, mu_n=float(rng.uniform(*ranges.mu_n)))
            for part in partitions
        ]
        model = GevModel.nested_logit(nests, mu=1.0)
    elif variant == "mnl":
        model = GevModel.mnl()
    else:
        raise ConfigurationError(f"unknown variant: {variant!r}")
    tau = rng.dirichlet(np.ones(k))

    mode = "joint" if psp == "homogeneous" else "partition"
    uset = MixtureUncertaintySet(
        anchors, tau, eps, mode=mode,
        partitions=partitions if mode == "partition" else None,
    )
    return Instance(ProductLine(costs, partitions), model, uset, None, int(seed))


def instance_to_json(instance):
    return {
        "seed": instance.seed,
        "costs": instance.products.costs.tolist(),
        "partitions": [list(p) for p in instance.products.partitions],
        "model": instance.model.to_json(),
        "uncertainty": instance.uncertainty.to_json(),
        "penalty": instance.penalty.to_json() if instance.penalty else None,
    }


def instance_from_json(obj):
    products = ProductLine(obj["costs"], obj["partitions"])
    model = GevModel.from_json(obj["model"])
    mode = obj["uncertainty"]["mode"]
    uset = MixtureUncertaintySet.from_json(
        obj["uncertainty"],
        partitions=products.partitions if mode == "partition" else None,
    )
    penalty = PenaltySpec.from_json(obj["penalty"]) if obj.get("penalty") else None
    return Instance(products, model, uset, penalty, int(obj.get("seed", 0)))


@dataclass
class MethodRow:
    label: str
    average: float
    worst: float
    max_value: float
    hist_edges: list
    hist_counts: list
    markup: list
    prices: list
    error: str = None


@dataclass
class EvaluationReport:
    eps: float
    rows: dict  # label -> MethodRow
    percentile_ranks: dict  # baseline label -> fraction below RO worst
    lam: float = None
    ro_violation: float = None


def percentile_rank(revenues, threshold):
    """Fraction of revenues strictly below the threshold."""
    revenues = np.asarray(revenues, dtype=float)
    if revenues.size == 0:
        raise DomainError("percentile_rank of an empty list")
    return float(np.mean(revenues < threshold))


def _row_from_scores(label, scores, prices, markup):
    counts, edges = np.histogram(scores, bins=40)
    markup = [float(markup)] if np.ndim(markup) == 0 else [
        float(v) for v in markup
    ]
    worst = float(scores.min())
    max_value = float(scores.max())
    return MethodRow(
        label=label,
        # clamp away the last-ulp rounding of the sample mean
        average=float(min(max(scores.mean(), worst), max_value)),
        worst=worst,
        max_value=max_value,
        hist_edges=[float(e) for e in edges],
        hist_counts=[int(c) for c in counts],
        markup=markup,
        prices=[float(p) for p in prices],
    )


def _failed_row(label, err):
    return MethodRow(label, float("nan"), float("nan"), float("nan"),
                     [], [], [], [], error=str(err))


def _n_threads():
    raw = os.environ.get("ROBUST_PRICING_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _map_cells(worker, cells):
    threads = _n_threads()
    if threads == 1 or len(cells) <= 1:
        return [worker(c) for c in cells]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, cells))


def _solve_ro(instance, uset):
    if instance.solver_mode == "homogeneous":
        return robust_price_homogeneous(instance.model, uset,
                                        instance.products.costs)
    return robust_price_partition(instance.model, uset,
                                  instance.products.costs,
                                  instance.products.partitions)


def run_comparison(instance, eps_grid, n_eval, seed, s1_values=(10, 50)):
    """Solve RO/DET/SA per uncertainty level and score on shared samples."""
    eps_grid = [float(e) for e in eps_grid]
    root = np.random.SeedSequence([int(seed), int(instance.seed) & 0x7FFFFFFF])
    cell_seeds = root.spawn(len(eps_grid))
    costs = instance.products.costs
    partitions = instance.products.partitions
    model = instance.model

    def worker(cell):
        idx, eps = cell
        uset = instance.uncertainty.with_eps(eps)
        sa_ss, eval_ss = cell_seeds[idx].spawn(2)

        solutions = {}
        errors = {}
        try:
            ro = _solve_ro(instance, uset)
            solutions["RO"] = (ro.prices, ro.markup)
        except PricingError as exc:
            errors["RO"] = exc
        try:
            det = det_baseline(model, uset, costs, partitions)
            solutions["DET"] = (det.prices, det.markup)
        except PricingError as exc:
            errors["DET"] = exc
        for s1 in s1_values:
            label = f"SA{s1}"
            try:
                sa = sampling_baseline(model, uset, costs, partitions,
                                       s1, n_eval, sa_ss)
                solutions[label] = (sa.prices, sa.markup)
            except PricingError as exc:
                errors[label] = exc

        _, a_eval, b_eval = sample_scenarios(
            uset, n_eval, np.random.default_rng(eval_ss)
        )
        rows = {}
        scores_by_label = {}
        for label, (prices, markup) in solutions.items():
            scores = expected_revenue_batch(model, a_eval, b_eval, costs,
                                            prices)
            scores_by_label[label] = scores
            rows[label] = _row_from_scores(label, scores, prices, markup)
        for label, exc in errors.items():
            rows[label] = _failed_row(label, exc)

        ranks = {}
        if "RO" in solutions:
            ro_worst = rows["RO"].worst
            for label, scores in scores_by_label.items():
                ranks[label] = percentile_rank(scores, ro_worst)
        return EvaluationReport(eps=eps, rows=rows, percentile_ranks=ranks)

    return _map_cells(worker, list(enumerate(eps_grid)))


def run_penalty_comparison(instance, lambda_grid=(0.2, 0.4, 0.6, 0.8),
                           eps_grid=(0.1,), n_eval=1000, seed=0):
    """Penalty-mode comparison scored by penalized profit per scenario."""
    if instance.penalty is None:
        raise ConfigurationError("instance carries no penalty specification")
    lambda_grid = [float(v) for v in lambda_grid]
    eps_grid = [float(e) for e in eps_grid]
    root = np.random.SeedSequence([int(seed), int(instance.seed) & 0x7FFFFFFF])
    cells = [(i, lam, j, eps)
             for i, lam in enumerate(lambda_grid)
             for j, eps in enumerate(eps_grid)]
    cell_seeds = root.spawn(len(cells))
    costs = instance.products.costs
    partitions = instance.products.partitions
    model = instance.model

    def worker(args):
        cell_idx, (_, lam, _, eps) = args
        uset = instance.uncertainty.with_eps(eps)
        spec = instance.penalty.with_lam(lam)
        sa_ss, eval_ss = cell_seeds[cell_idx].spawn(2)

        solutions = {}
        errors = {}
        ro_violation = None
        try:
            ro = robust_penalty_solve(model, uset, costs, partitions, spec)
            solutions["RO"] = (ro.prices, ro.markup)
            ro_violation = ro.diagnostics["violation"]
        except PricingError as exc:
            errors["RO"] = exc
        try:
            det = det_baseline(model, uset, costs, partitions)
            solutions["DET"] = (det.prices, det.markup)
        except PricingError as exc:
            errors["DET"] = exc
        for s1 in (10, 50):
            label = f"SA{s1}"
            try:
                sa = sampling_baseline(model, uset, costs, partitions, s1,
                                       n_eval, sa_ss, penalty_spec=spec)
                solutions[label] = (sa.prices, sa.markup)
            except PricingError as exc:
                errors[label] = exc

        _, a_eval, b_eval = sample_scenarios(
            uset, n_eval, np.random.default_rng(eval_ss)
        )
        rows = {}
        scores_by_label = {}
        for label, (prices, markup) in solutions.items():
            scores = penalty_profit_batch(model, a_eval, b_eval, costs,
                                          prices, spec)
            scores_by_label[label] = scores
            rows[label] = _row_from_scores(label, scores, prices, markup)
        for label, exc in errors.items():
            rows[label] = _failed_row(label, exc)

        ranks = {}
        if "RO" in solutions:
            ro_worst = rows["RO"].worst
            for label, scores in scores_by_label.items():
                ranks[label] = percentile_rank(scores, ro_worst)
        return EvaluationReport(eps=eps, rows=rows, percentile_ranks=ranks,
                                lam=lam, ro_violation=ro_violation)

    return _map_cells(worker, list(enumerate(cells)))


def _fmt(x):
    return f"{x:.6f}"


def _row_order(rep):
    """DET, SA columns by ascending sample count, then RO."""
    sa = sorted(
        (label for label in rep.rows if label.startswith("SA")),
        key=lambda s: int(s[2:]),
    )
    order = ["DET"] + sa + ["RO"]
    return [label for label in order if label in rep.rows]


def comparison_csv(reports):
    lines = [CSV_HEADER]
    for rep in reports:
        for label in _row_order(rep):
            row = rep.rows.get(label)
            if row is None:
                continue
            rank = rep.percentile_ranks.get(label, float("nan"))
            lines.append(",".join([
                _fmt(rep.eps), label, _fmt(row.average), _fmt(row.worst),
                _fmt(row.max_value), _fmt(rank),
            ]))
    return "\n".join(lines) + "\n"


def penalty_comparison_csv(reports):
    lines = [PENALTY_CSV_HEADER]
    for rep in reports:
        for label in _row_order(rep):
            row = rep.rows.get(label)
            if row is None:
                continue
            rank = rep.percentile_ranks.get(label, float("nan"))
            violation = (
                _fmt(rep.ro_violation)
                if label == "RO" and rep.ro_violation is not None else ""
            )
            lines.append(",".join([
                _fmt(rep.lam), _fmt(rep.eps), label, _fmt(row.average),
                _fmt(row.worst), _fmt(row.max_value), violation, _fmt(rank),
            ]))
    return "\n".join(lines) + "\n"


def histograms_json(reports):
    entries = []
    for rep in reports:
        for label in _row_order(rep):
            row = rep.rows.get(label)
            if row is None or row.error is not None:
                continue
            entry = {
                "eps": rep.eps,
                "method": label,
                "bin_edges": row.hist_edges,
                "counts": row.hist_counts,
            }
            if rep.lam is not None:
                entry["lambda"] = rep.lam
            entries.append(entry)
    return json.dumps(entries, indent=2, sort_keys=True) + "\n"


def solutions_json(reports):
    entries = []
    for rep in reports:
        for label in _row_order(rep):
            row = rep.rows.get(label)
            if row is None:
                continue
            entry = {
                "eps": rep.eps,
                "method": label,
                "markup": row.markup,
                "prices": row.prices,
                "error": row.error,
            }
            if rep.lam is not None:
                entry["lambda"] = rep.lam
            entries.append(entry)
    return json.dumps(entries, indent=2, sort_keys=True) + "\n"
