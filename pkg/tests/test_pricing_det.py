import numpy as np
import pytest

from robust_pricing import (
    ChoiceParams,
    ConfigurationError,
    GevModel,
    Nest,
    det_price_homogeneous,
    det_price_partition,
    expected_revenue,
)

# Frozen via Newton on w*exp(w) = x (checked against the defining identity).
W_E_INV = 0.2784645427610738      # W(e^-1)
W_2E_INV = 0.46305551336554886    # W(2/e)


def fd_grad_inf_norm(model, params, costs, prices):
    worst = 0.0
    for i in range(len(prices)):
        h = 1e-6 * (1.0 + abs(prices[i]))
        xp = prices.copy(); xp[i] += h
        xm = prices.copy(); xm[i] -= h
        g = (expected_revenue(model, params, costs, xp)
             - expected_revenue(model, params, costs, xm)) / (2 * h)
        worst = max(worst, abs(g))
    return worst


class TestHomogeneous:
    def test_single_product_closed_form(self):
        mnl = GevModel.mnl()
        sol = det_price_homogeneous(mnl, ChoiceParams([0.0], [1.0]), np.zeros(1))
        # R* solves R e^R = e^-1, markup = 1 + R*
        assert abs(sol.revenue * np.exp(sol.revenue) - np.exp(-1.0)) <= 1e-10
        assert abs(sol.revenue - W_E_INV) <= 1e-12
        assert abs(sol.markup - (1.0 + W_E_INV)) <= 1e-12

    def test_two_products_gamma_two(self):
        mnl = GevModel.mnl()
        sol = det_price_homogeneous(mnl, ChoiceParams([0.0, 0.0], [1.0, 1.0]),
                                    np.zeros(2))
        assert abs(sol.revenue - W_2E_INV) <= 1e-12
        assert abs(sol.markup - (1.0 + W_2E_INV)) <= 1e-12

    def test_intercept_shift_raises_markup(self):
        mnl = GevModel.mnl()
        params = ChoiceParams([0.2, -0.3], [1.3, 1.3])
        costs = np.array([0.5, 0.8])
        base = det_price_homogeneous(mnl, params, costs)
        shifted = det_price_homogeneous(
            mnl, ChoiceParams(params.a + 0.7, params.b), costs
        )
        assert shifted.markup > base.markup
        # gamma scales by e^delta under a uniform intercept shift
        g_base = np.exp(params.a - params.b * costs).sum()
        assert abs(shifted.revenue * 1.3
                   - np.real(_lambert_oracle(np.e ** 0.7 * g_base / np.e))) <= 1e-9

    def test_heterogeneous_b_rejected(self):
        mnl = GevModel.mnl()
        with pytest.raises(ConfigurationError):
            det_price_homogeneous(mnl, ChoiceParams([0.0, 0.0], [1.0, 2.0]),
                                  np.zeros(2))

    def test_local_optimality_and_consistency(self):
        rng = np.random.default_rng(20)
        model = GevModel.nested_logit([Nest((0, 1), 1.7), Nest((2,), 1.2)])
        for _ in range(10):
            params = ChoiceParams(rng.normal(size=3),
                                  np.full(3, rng.uniform(0.5, 2.0)))
            costs = rng.uniform(0.2, 1.5, size=3)
            sol = det_price_homogeneous(model, params, costs)
            phi = expected_revenue(model, params, costs, sol.prices)
            assert abs(phi - sol.revenue) <= 1e-10 * (1 + sol.revenue)
            assert fd_grad_inf_norm(model, params, costs, sol.prices) <= (
                1e-5 * (1 + sol.revenue)
            )


def _lambert_oracle(x, iters=60):
    """Newton iteration on w e^w = x, independent of the library routine."""
    w = np.log1p(x)
    for _ in range(iters):
        ew = np.exp(w)
        w -= (w * ew - x) / (ew * (1 + w))
    return w


class TestPartition:
    def test_single_partition_matches_homogeneous(self):
        mnl = GevModel.mnl()
        params = ChoiceParams([0.4, -0.2], [1.3, 1.3])
        costs = np.array([0.6, 0.9])
        part = det_price_partition(mnl, params, costs, ((0, 1),))
        homog = det_price_homogeneous(mnl, params, costs)
        assert abs(part.markup[0] - homog.markup) <= 1e-9
        assert abs(part.revenue - homog.revenue) <= 1e-9

    def test_equal_b_partitions_match_homogeneous(self):
        mnl = GevModel.mnl()
        params = ChoiceParams([0.4, -0.2, 0.1], [1.3, 1.3, 1.3])
        costs = np.array([0.6, 0.9, 0.3])
        part = det_price_partition(mnl, params, costs, ((0, 1), (2,)))
        homog = det_price_homogeneous(mnl, params, costs)
        assert np.max(np.abs(part.markup - homog.markup)) <= 1e-9

    def test_grid_oracle_two_partitions(self):
        # MNL, a=0, c=0, b=(1,2): maximize rho over a 2-D markup grid
        mnl = GevModel.mnl()
        params = ChoiceParams([0.0, 0.0], [1.0, 2.0])
        costs = np.zeros(2)
        sol = det_price_partition(mnl, params, costs, ((0,), (1,)))

        zs = np.arange(0.0, 4.0 + 1e-12, 1e-3)
        g1 = np.exp(-1.0 * zs)          # partition 1: e^{-b1 z}
        g2 = np.exp(-2.0 * zs)          # partition 2
        num = zs[:, None] * g1[:, None] + zs[None, :] * g2[None, :]
        rho = num / (1.0 + g1[:, None] + g2[None, :])
        k = np.unravel_index(np.argmax(rho), rho.shape)
        grid_best = rho[k]
        assert sol.revenue >= grid_best - 1e-12
        assert abs(sol.revenue - grid_best) <= 1e-3
        assert abs(sol.markup[0] - zs[k[0]]) <= 5e-3
        assert abs(sol.markup[1] - zs[k[1]]) <= 5e-3

    def test_markup_identity(self):
        mnl = GevModel.mnl()
        rng = np.random.default_rng(21)
        params = ChoiceParams(rng.normal(size=4), [1.0, 1.0, 2.5, 2.5])
        costs = rng.uniform(0.2, 1.0, size=4)
        sol = det_price_partition(mnl, params, costs, ((0, 1), (2, 3)))
        # z_n - 1/b_n is one shared constant R across partitions
        consts = sol.markup - 1.0 / np.array([1.0, 2.5])
        assert abs(consts[0] - consts[1]) <= 1e-12
        assert abs(consts[0] - sol.revenue) <= 1e-9

    def test_nested_logit_partitions(self):
        model = GevModel.nested_logit([Nest((0, 1), 1.8), Nest((2, 3), 1.3)])
        rng = np.random.default_rng(22)
        params = ChoiceParams(rng.normal(size=4), [0.8, 0.8, 1.7, 1.7])
        costs = rng.uniform(0.2, 1.2, size=4)
        sol = det_price_partition(model, params, costs, ((0, 1), (2, 3)))
        assert fd_grad_inf_norm(model, params, costs, sol.prices) <= (
            1e-5 * (1 + sol.revenue)
        )
        phi = expected_revenue(model, params, costs, sol.prices)
        assert abs(phi - sol.revenue) <= 1e-10 * (1 + sol.revenue)

    def test_partition_heterogeneous_b_rejected(self):
        mnl = GevModel.mnl()
        with pytest.raises(ConfigurationError):
            det_price_partition(mnl, ChoiceParams([0.0, 0.0], [1.0, 2.0]),
                                np.zeros(2), ((0, 1),))
