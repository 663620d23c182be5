"""Acceptance suite: one test per exit criterion, at the stated tolerances.

Run with `pytest tests/test_acceptance.py -v -s` to see one printed
pass/fail line per criterion alongside the pytest verdicts.
"""

import json
import time

import numpy as np

from robust_pricing import (
    AdversarySession,
    ChoiceParams,
    GevModel,
    MixtureUncertaintySet,
    PenaltySpec,
    choice_probabilities,
    cpgf_value,
    cpgf_weighted_grad,
    det_price_homogeneous,
    det_price_partition,
    expected_revenue,
    generate_instance,
    instance_to_json,
    lambda_sweep_convergence,
    lambert_w0,
    params_at,
    robust_penalty_solve,
    robust_price_homogeneous,
    robust_price_partition,
    run_comparison,
)
from robust_pricing.harness import comparison_csv, histograms_json, solutions_json
from robust_pricing.pricing_robust import _reduced_eval
from robust_pricing.uncertainty import sample_scenarios

from conftest import random_nested_model


def _report(criterion, ok, detail=""):
    print(f"\n[criterion {criterion}] {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, f"criterion {criterion}: {detail}"


def test_criterion_1_gev_property_suite():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    n_cases = 1000
    for case in range(n_cases):
        m = int(rng.integers(2, 6))
        model = GevModel.mnl() if case % 2 == 0 else random_nested_model(rng, m)
        Y = rng.uniform(0.2, 4.0, size=m)
        g = cpgf_value(model, Y)
        w = cpgf_weighted_grad(model, Y)

        lam = float(rng.uniform(0.1, 10.0))
        assert abs(cpgf_value(model, lam * Y) - lam * g) <= 1e-10 * lam * (1 + g)
        assert abs(w.sum() - g) <= 1e-9 * (1.0 + g)

        params = ChoiceParams(rng.normal(size=m), rng.uniform(0.3, 2.5, m))
        probs = choice_probabilities(model, params, rng.normal(size=m))
        assert abs(probs.sum() - 1.0) <= 1e-12

        i = int(rng.integers(m))
        h = 1e-6 * Y[i]
        yp = Y.copy(); yp[i] += h
        ym = Y.copy(); ym[i] -= h
        fd = Y[i] * (cpgf_value(model, yp) - cpgf_value(model, ym)) / (2 * h)
        assert abs(w[i] - fd) <= 1e-5 * (1.0 + abs(fd))
    elapsed = time.perf_counter() - t0
    _report(1, elapsed < 5.0,
            f"{n_cases} random GEV cases checked in {elapsed:.2f}s (< 5s)")


def test_criterion_2_lambert_w_identity():
    t0 = time.perf_counter()
    xs = np.logspace(-12, 6, 500)
    w = lambert_w0(xs)
    err = np.max(np.abs(w * np.exp(w) - xs) / (1.0 + np.abs(xs)))
    elapsed = time.perf_counter() - t0
    _report(2, err <= 1e-12 and elapsed < 0.1,
            f"max identity error {err:.2e} in {elapsed * 1e3:.1f}ms (< 100ms)")


def test_criterion_3_deterministic_closed_form():
    mnl = GevModel.mnl()
    sol = det_price_homogeneous(mnl, ChoiceParams([0.0], [1.0]), np.zeros(1))
    identity_err = abs(sol.revenue * np.exp(sol.revenue) - np.exp(-1.0))
    markup_err = abs(sol.markup - (1.0 + sol.revenue))
    assert identity_err <= 1e-10
    assert markup_err <= 1e-12

    params = ChoiceParams([0.0, 0.0], [1.0, 2.0])
    part = det_price_partition(mnl, params, np.zeros(2), ((0,), (1,)))
    zs = np.arange(0.0, 4.0 + 1e-12, 1e-3)
    g1 = np.exp(-zs)
    g2 = np.exp(-2.0 * zs)
    rho = (zs[:, None] * g1[:, None] + zs[None, :] * g2[None, :]) / (
        1.0 + g1[:, None] + g2[None, :]
    )
    grid_best = float(rho.max())
    grid_err = abs(part.revenue - grid_best)
    _report(3, grid_err <= 1e-3,
            f"R identity err {identity_err:.1e}, grid-oracle gap {grid_err:.1e}")


def test_criterion_4_robust_homogeneous(homog_set, homog_costs):
    mnl = GevModel.mnl()
    sol = robust_price_homogeneous(mnl, homog_set, homog_costs)
    assert sol.diagnostics["fixed_point_residual"] <= 1e-8
    z_lo, z_hi = sol.diagnostics["bracket"]
    assert z_lo - 1e-12 <= sol.markup <= z_hi + 1e-12

    uset0 = homog_set.with_eps(0.0)
    det = det_price_homogeneous(mnl, params_at(uset0, uset0.tau), homog_costs)
    assert abs(robust_price_homogeneous(mnl, uset0, homog_costs).markup
               - det.markup) <= 1e-8

    anchors = [ChoiceParams([a], [b]) for a in (0.0, 2.0) for b in (1.0, 2.0)]
    box = MixtureUncertaintySet(anchors, [0.25] * 4, 1.0, mode="joint")
    box_sol = robust_price_homogeneous(mnl, box, np.array([0.5]))
    box_det = det_price_homogeneous(mnl, ChoiceParams([0.0], [2.0]),
                                    np.array([0.5]))
    assert abs(box_sol.markup - box_det.markup) <= 1e-7

    # nested grid oracle: min over lambda of max over z of Phi
    lo, hi = homog_set.weight_box()
    lam1 = np.linspace(lo[0], hi[0], 4001)
    A = np.stack([w.a for w in homog_set.anchors])
    B = np.stack([w.b for w in homog_set.anchors])
    lam = np.stack([lam1, 1 - lam1], axis=1)
    a = lam @ A
    b = (lam @ B)[:, 0]
    gamma = np.exp(a - b[:, None] * homog_costs[None, :]).sum(axis=1)
    zs = np.linspace(0.0, z_hi + 0.5, 4401)
    inner = np.empty(len(lam1))
    for start in range(0, len(lam1), 400):
        sl = slice(start, start + 400)
        g = gamma[sl, None] * np.exp(-b[sl, None] * zs[None, :])
        inner[sl] = (zs[None, :] * g / (1.0 + g)).max(axis=1)
    minimax_gap = abs(sol.worst_case_revenue - inner.min())
    assert minimax_gap <= 1e-3

    inst = generate_instance(7, m=50, k=5, n_partitions=5, eps=0.2,
                             psp="homogeneous")
    t0 = time.perf_counter()
    robust_price_homogeneous(inst.model, inst.uncertainty,
                             inst.products.costs)
    elapsed = time.perf_counter() - t0
    _report(4, elapsed < 2.0,
            f"|f(z*)|={sol.diagnostics['fixed_point_residual']:.1e}, "
            f"minimax gap {minimax_gap:.1e}, m=50 solve {elapsed:.2f}s (< 2s)")


def test_criterion_5_reduced_program(partition_set, partition_parts):
    mnl = GevModel.mnl()
    costs = np.array([0.2, 0.4])
    rng = np.random.default_rng(102)
    session = AdversarySession(mnl, partition_set, costs,
                               partitions=partition_parts, inverse_tol=1e-13)

    # Prop-6 gradient vs central finite differences, 50 interior points
    h = 1e-5
    for _ in range(50):
        p = rng.uniform(0.05, 0.4, size=2)
        if p.sum() >= 0.9:
            p *= 0.85 / p.sum()
        _, grad, _, _ = _reduced_eval(session, partition_parts, p)
        for n in range(2):
            pp = p.copy(); pp[n] += h
            pm = p.copy(); pm[n] -= h
            wp, _, _, _ = _reduced_eval(session, partition_parts, pp)
            wm, _, _, _ = _reduced_eval(session, partition_parts, pm)
            fd = (wp - wm) / (2 * h)
            assert abs(grad[n] - fd) <= 1e-5 * (1.0 + abs(fd))

    # midpoint concavity on 200 pairs
    for _ in range(200):
        p1 = rng.uniform(0.03, 0.45, size=2)
        p2 = rng.uniform(0.03, 0.45, size=2)
        for p in (p1, p2):
            if p.sum() >= 0.92:
                p *= 0.85 / p.sum()
        w1, _, _, _ = _reduced_eval(session, partition_parts, p1)
        w2, _, _, _ = _reduced_eval(session, partition_parts, p2)
        wm, _, _, _ = _reduced_eval(session, partition_parts, 0.5 * (p1 + p2))
        assert wm >= 0.5 * (w1 + w2) - 1e-9

    # multistart uniqueness and the stationarity residual
    sols = []
    for _ in range(5):
        p0 = rng.uniform(0.05, 0.4, size=2)
        if p0.sum() >= 0.9:
            p0 *= 0.8 / p0.sum()
        sols.append(robust_price_partition(mnl, partition_set, costs,
                                           partition_parts, start=p0))
    spread = max(
        float(np.max(np.abs(s.aggregate_probabilities
                            - sols[0].aggregate_probabilities)))
        for s in sols[1:]
    )
    assert spread <= 1e-5
    assert all(s.diagnostics["fixed_point_residual"] <= 1e-5 for s in sols)

    # vertex-configuration grid oracle on the N=2 instance
    sol = sols[0]
    A = np.stack([w.a for w in partition_set.anchors])
    B = np.stack([w.b for w in partition_set.anchors])
    lo, hi = partition_set.weight_box()
    zs = np.arange(0.0, 4.0 + 1e-12, 2e-3)

    def env(n, kind):
        vals = []
        for l1 in (lo[0], hi[0]):
            lam = np.array([l1, 1 - l1])
            vals.append(np.exp(float(lam @ A[:, n])
                               - float(lam @ B[:, n]) * (zs + costs[n])))
        vals = np.stack(vals)
        return vals.min(axis=0) if kind == "min" else vals.max(axis=0)

    oracle = np.inf
    for u0 in ("min", "max"):
        for u1 in ("min", "max"):
            t0_, t1_ = env(0, u0), env(1, u1)
            psi = (zs[:, None] * t0_[:, None] + zs[None, :] * t1_[None, :]) / (
                1.0 + t0_[:, None] + t1_[None, :]
            )
            oracle = min(oracle, float(psi.max()))
    oracle_gap = abs(sol.worst_case_revenue - oracle)
    assert oracle_gap <= 1e-3

    inst = generate_instance(11, m=50, k=5, n_partitions=5, eps=0.2,
                             psp="partition")
    t0 = time.perf_counter()
    big = robust_price_partition(inst.model, inst.uncertainty,
                                 inst.products.costs,
                                 inst.products.partitions)
    elapsed = time.perf_counter() - t0
    assert big.diagnostics["fixed_point_residual"] <= 1e-5
    _report(5, elapsed < 30.0,
            f"grad-FD and concavity ok, multistart spread {spread:.1e}, "
            f"oracle gap {oracle_gap:.1e}, m=50/N=5 solve {elapsed:.2f}s (< 30s)")


def test_criterion_6_saddle_inequalities(homog_set, homog_costs,
                                         partition_set, partition_parts):
    mnl = GevModel.mnl()
    rng = np.random.default_rng(103)
    worst_violation = 0.0

    sol = robust_price_homogeneous(mnl, homog_set, homog_costs)
    _, a, b = sample_scenarios(homog_set, 100, rng)
    for s in range(100):
        phi = expected_revenue(mnl, ChoiceParams(a[s], b[s]), homog_costs,
                               sol.prices)
        worst_violation = max(worst_violation, sol.worst_case_revenue - phi)
    for _ in range(100):
        z = sol.markup + rng.uniform(-0.5, 0.5)
        phi = expected_revenue(mnl, sol.worst_params, homog_costs,
                               homog_costs + z)
        worst_violation = max(worst_violation, phi - sol.worst_case_revenue)

    costs = np.array([0.2, 0.4])
    psol = robust_price_partition(mnl, partition_set, costs, partition_parts)
    _, a, b = sample_scenarios(partition_set, 100, rng)
    for s in range(100):
        phi = expected_revenue(mnl, ChoiceParams(a[s], b[s]), costs,
                               psol.prices)
        worst_violation = max(worst_violation, psol.worst_case_revenue - phi)
    for _ in range(100):
        z = psol.markup + rng.uniform(-0.5, 0.5, size=2)
        prices = costs.copy()
        for n, part in enumerate(partition_parts):
            prices[list(part)] = costs[list(part)] + z[n]
        phi = expected_revenue(mnl, psol.worst_params, costs, prices)
        worst_violation = max(worst_violation, phi - psol.worst_case_revenue)

    _report(6, worst_violation <= 1e-6,
            f"max saddle violation {worst_violation:.2e} (<= 1e-6)")


def test_criterion_7_penalty_module(partition_set, partition_parts):
    mnl = GevModel.mnl()
    costs = np.array([0.2, 0.4])
    rng = np.random.default_rng(104)
    unc = robust_price_partition(mnl, partition_set, costs, partition_parts)
    r_val = 0.8 * float(unc.aggregate_probabilities.sum())
    spec = PenaltySpec([[1.0, 1.0]], [r_val], [0.0])

    pen0 = robust_penalty_solve(mnl, partition_set, costs, partition_parts,
                                spec)
    lam0_gap = float(np.max(np.abs(pen0.markup - unc.markup)))
    assert lam0_gap <= 1e-5

    # H concavity midpoint test
    d = spec.partition_coeffs(partition_parts)
    session = AdversarySession(mnl, partition_set, costs,
                               partitions=partition_parts, inverse_tol=1e-13)

    def h_of(p, lam_w):
        w, _, _, _ = _reduced_eval(session, partition_parts, p)
        return w - lam_w * float(np.maximum(0.0, d[0] @ p - r_val))

    for _ in range(200):
        p1 = rng.uniform(0.03, 0.45, size=2)
        p2 = rng.uniform(0.03, 0.45, size=2)
        for p in (p1, p2):
            if p.sum() >= 0.92:
                p *= 0.85 / p.sum()
        assert h_of(0.5 * (p1 + p2), 0.7) >= (
            0.5 * (h_of(p1, 0.7) + h_of(p2, 0.7)) - 1e-9
        )

    # increasing lambda grid: violations non-increasing; theorem threshold
    report = lambda_sweep_convergence(mnl, partition_set, costs,
                                      partition_parts, spec,
                                      [0.2, 0.4, 0.6, 0.8], epsilon=1e-3)
    viols = [row[2] for row in report.rows]
    assert all(v2 <= v1 + 1e-9 for v1, v2 in zip(viols, viols[1:]))
    thresh = lambda_sweep_convergence(mnl, partition_set, costs,
                                      partition_parts, spec,
                                      [report.lambda_threshold], epsilon=1e-3)
    assert thresh.rows[0][2] <= 1e-3

    # grid-oracle match of the penalized objective
    lam_w = 0.5
    pen = robust_penalty_solve(mnl, partition_set, costs, partition_parts,
                               spec.with_lam(lam_w))
    A = np.stack([w.a for w in partition_set.anchors])
    B = np.stack([w.b for w in partition_set.anchors])
    lo, hi = partition_set.weight_box()
    step = 1e-3
    p1 = np.arange(step, 1.0, step)
    P1, P2 = np.meshgrid(p1, p1, indexing="ij")
    mask = P1 + P2 < 1.0 - 1e-9
    P1, P2 = P1[mask], P2[mask]
    scale = 1.0 - P1 - P2

    def z_of(n, alpha):
        vals = []
        for l1 in (lo[0], hi[0]):
            lam = np.array([l1, 1 - l1])
            aa = float(lam @ A[:, n]); bb = float(lam @ B[:, n])
            vals.append((aa - bb * costs[n] - np.log(alpha)) / bb)
        return np.minimum(*vals)

    h_grid = (z_of(0, P1 / scale) * P1 + z_of(1, P2 / scale) * P2
              - lam_w * np.maximum(0.0, P1 + P2 - r_val))
    grid_gap = abs(pen.worst_case_revenue - float(h_grid.max()))
    assert grid_gap <= 1e-3

    _report(7, True,
            f"lam0 gap {lam0_gap:.1e}, threshold violation "
            f"{thresh.rows[0][2]:.1e}, grid gap {grid_gap:.1e}")


def test_criterion_8_protocol_reproduction():
    t0 = time.perf_counter()
    inst = generate_instance(29, m=50, k=5, n_partitions=5, eps=0.1,
                             psp="homogeneous")
    eps_grid = [round(0.02 * k, 2) for k in range(1, 21)]
    reports = run_comparison(inst, eps_grid, n_eval=1000, seed=0,
                             s1_values=(10, 50))
    elapsed = time.perf_counter() - t0
    assert len(reports) == 20
    hits = 0
    for rep in reports:
        ro, det = rep.rows["RO"], rep.rows["DET"]
        assert ro.error is None and det.error is None
        if ro.worst >= det.worst - 1e-12 and ro.average <= det.average + 1e-12:
            hits += 1
    _report(8, hits >= 18 and elapsed < 600.0,
            f"signature rows {hits}/20 (>= 18), end-to-end {elapsed:.1f}s "
            f"(< 600s)")


def test_criterion_9_determinism(tmp_path):
    inst = generate_instance(31, m=4, k=2, n_partitions=2, eps=0.2)
    outputs = []
    for run in range(2):
        reports = run_comparison(inst, [0.05, 0.15], n_eval=150, seed=12)
        outputs.append((
            comparison_csv(reports),
            histograms_json(reports),
            solutions_json(reports),
            json.dumps(instance_to_json(inst), sort_keys=True),
        ))
    ok = outputs[0] == outputs[1]
    _report(9, ok, "two identically-seeded runs produced identical bytes")
