"""DET and SA comparison strategies.

DET prices at the nominal mixture (weighted-average parameters).  SA draws
candidate parameter vectors from the set, prices deterministically at each,
and keeps the candidate with the best sampled worst case.  Candidate draws
are prefix-nested in s1 under a fixed seed (the first 10 of an s1=50 run are
exactly the s1=10 candidates) and all candidates share one evaluation sample
(common random numbers).
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .gev import expected_revenue_batch
from .penalty import penalty_profit_batch
from .pricing_det import det_price_homogeneous, det_price_partition
from .uncertainty import params_at, sample_scenarios, sample_uniform

__all__ = ["BaselineSolution", "det_baseline", "sampling_baseline"]


@dataclass
class BaselineSolution:
    label: str
    prices: np.ndarray
    markup: object
    provenance: dict


def _det_solve(model, uset, costs, partitions, params):
    if uset.mode == "joint":
        return det_price_homogeneous(model, params, costs)
    return det_price_partition(model, params, costs, partitions)


def det_baseline(model, uset, costs, partitions):
    """Deterministic pricing at the nominal proportions tau."""
    if uset.mode == "joint":
        nominal = params_at(uset, uset.tau)
    else:
        nominal = params_at(uset, np.tile(uset.tau, (uset.n_partitions, 1)))
    det = _det_solve(model, uset, costs, partitions, nominal)
    return BaselineSolution("DET", det.prices, det.markup, {})


def sampling_baseline(model, uset, costs, partitions, s1, s2, seed,
                      penalty_spec=None):
    """Best-sampled-worst-case pricing from s1 candidate parameter draws.

    Candidates and the shared s2-sample evaluation set come from two
    independent streams derived from ``seed``, so runs with the same seed
    and larger s1 extend the candidate list without reshuffling anything.
    """
    if s1 < 1 or s2 < 1:
        raise ConfigurationError("s1 and s2 must be >= 1")
    costs = np.asarray(costs, dtype=float)
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    cand_ss, eval_ss = seed.spawn(2)
    cand_rng = np.random.default_rng(cand_ss)

    candidates = []
    for _ in range(s1):
        _, params = sample_uniform(uset, cand_rng)
        det = _det_solve(model, uset, costs, partitions, params)
        candidates.append((det, params))

    _, a_eval, b_eval = sample_scenarios(
        uset, s2, np.random.default_rng(eval_ss)
    )
    best_idx, best_worst = -1, -np.inf
    for i, (det, _) in enumerate(candidates):
        if penalty_spec is not None:
            scores = penalty_profit_batch(model, a_eval, b_eval, costs,
                                          det.prices, penalty_spec)
        else:
            scores = expected_revenue_batch(model, a_eval, b_eval, costs,
                                            det.prices)
        worst = float(scores.min())
        if worst > best_worst:
            best_idx, best_worst = i, worst

    det, params = candidates[best_idx]
    label = f"SA{s1}"
    return BaselineSolution(
        label, det.prices, det.markup,
        {
            "selected_index": best_idx,
            "selected_a": params.a.tolist(),
            "selected_b": params.b.tolist(),
            "sampled_worst": best_worst,
            "candidates": s1,
        },
    )
