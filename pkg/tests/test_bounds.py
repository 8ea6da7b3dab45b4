import math

import numpy as np
import pytest

from rmabplan.bounds import (
    api_worst_case_bound,
    approx_plus_horizon_bound,
    hoeffding_sample_bound,
    hoeffding_sample_bound_reciprocal,
    hoeffding_tail,
    improved_greedy_bound,
    mean_deviation_tail,
    min_horizon_for_eps,
    reward_error_bound,
    rolling_horizon_bound,
)
from rmabplan.errors import ContractViolation
from rmabplan.mdp import finite_horizon_value, make_tabular_generative
from rmabplan.rollout import RolloutConfig, mc_policy_value

from conftest import random_mdp


class TestApiWorstCase:
    def test_zero_errors(self):
        assert api_worst_case_bound(0.0, 0.0, 0.9) == 0.0

    def test_closed_form(self):
        # (0.1 + 2 * 0.5 * 0.05) / (1 - 0.25)
        assert api_worst_case_bound(0.1, 0.05, 0.5) == pytest.approx(0.15 / 0.75)

    def test_linear_in_delta(self):
        assert api_worst_case_bound(0.2, 0.0, 0.7) == pytest.approx(
            2 * api_worst_case_bound(0.1, 0.0, 0.7)
        )

    def test_beta_out_of_range(self):
        with pytest.raises(ContractViolation):
            api_worst_case_bound(0.1, 0.1, 1.0)


class TestImprovedGreedy:
    def test_zero(self):
        assert improved_greedy_bound(0.0, 0.5) == 0.0

    def test_closed_form(self):
        assert improved_greedy_bound(0.1, 0.5) == pytest.approx(0.2)

    def test_monotone_in_beta(self):
        grid = np.linspace(0.05, 0.95, 19)
        vals = [improved_greedy_bound(0.1, b) for b in grid]
        assert all(v2 >= v1 for v1, v2 in zip(vals, vals[1:]))


class TestRewardError:
    def test_alpha_zero_reduces(self):
        assert reward_error_bound(0.1, 0.0, 0.5) == improved_greedy_bound(0.1, 0.5)

    def test_closed_form(self):
        assert reward_error_bound(0.1, 0.05, 0.5) == pytest.approx(0.4)

    def test_zero(self):
        assert reward_error_bound(0.0, 0.0, 0.33) == 0.0


class TestRollingHorizon:
    def test_closed_form(self):
        assert rolling_horizon_bound(1.0, 0.5, 6) == pytest.approx(0.03125)

    def test_geometric_decay_limit(self):
        assert rolling_horizon_bound(1.0, 0.5, 1000) < 1e-12

    def test_zero_reward(self):
        assert rolling_horizon_bound(0.0, 0.9, 3) == 0.0


class TestApproxPlusHorizon:
    def test_eps_zero_reduces(self):
        assert approx_plus_horizon_bound(1.0, 0.5, 6, 0.0) == rolling_horizon_bound(1.0, 0.5, 6)

    def test_closed_form(self):
        assert approx_plus_horizon_bound(1.0, 0.5, 6, 0.1) == pytest.approx(0.23125)

    def test_additive(self):
        total = approx_plus_horizon_bound(2.0, 0.7, 4, 0.3)
        assert total == pytest.approx(
            rolling_horizon_bound(2.0, 0.7, 4) + improved_greedy_bound(0.3, 0.7)
        )

    def test_nonincreasing_in_tau_with_limit(self):
        vals = [approx_plus_horizon_bound(1.0, 0.6, tau, 0.05) for tau in range(1, 60)]
        assert all(v2 <= v1 for v1, v2 in zip(vals, vals[1:]))
        assert vals[-1] == pytest.approx(improved_greedy_bound(0.05, 0.6), abs=1e-9)


class TestMinHorizon:
    def test_known_value(self):
        # 1 + log_0.5(0.1 * 0.5 / 1) = 5.32..., smallest integer above is 6
        assert min_horizon_for_eps(0.1, 0.5, 1.0) == 6

    def test_returned_horizon_meets_eps(self):
        for eps in (0.1, 0.01):
            for beta in (0.5, 0.9):
                tau = min_horizon_for_eps(eps, beta, 1.0)
                assert rolling_horizon_bound(1.0, beta, tau) < eps
                # tau - 1 fails the formula's own margin test
                threshold = 1.0 + math.log(eps * (1 - beta)) / math.log(beta)
                assert tau - 1 <= threshold

    def test_trivial_when_eps_dominates(self):
        assert min_horizon_for_eps(10.0, 0.5, 1.0) == 1
        assert min_horizon_for_eps(2.0, 0.5, 1.0) == 1  # eps = r_max/(1-beta)


class TestHoeffdingSampleBound:
    def test_large_eps_single_sample(self):
        spread = (2 * 1.0 - 0.0) * (1 - 0.9**5) / 0.1
        assert hoeffding_sample_bound(2 * spread, 0.05, 0.9, 5, 0.0, 1.0) == 1

    def test_long_horizon_value(self):
        # 4 * ln(40) / (2 * 0.01 * 0.01) with the horizon factor ~ 1
        assert hoeffding_sample_bound(0.1, 0.05, 0.9, 10**6, 0.0, 1.0) == 73778

    def test_tail_at_returned_count_is_below_delta(self):
        for eps, delta, beta, tau in [(0.1, 0.05, 0.9, 20), (0.3, 0.1, 0.5, 8)]:
            n = hoeffding_sample_bound(eps, delta, beta, tau, 0.0, 1.0)
            assert mean_deviation_tail(n, eps, beta, tau, 0.0, 1.0) <= delta + 1e-12
            assert mean_deviation_tail(max(1, n // 2), eps, beta, tau, 0.0, 1.0) > delta

    def test_reciprocal_variant_shrinks_with_eps(self):
        lo = hoeffding_sample_bound_reciprocal(0.1, 0.05, 0.9, 20, 0.0, 1.0)
        hi = hoeffding_sample_bound_reciprocal(0.2, 0.05, 0.9, 20, 0.0, 1.0)
        assert hi > lo  # grows with eps, hence unusable as a conservative count

    def test_bad_inputs(self):
        with pytest.raises(ContractViolation):
            hoeffding_sample_bound(0.0, 0.05, 0.9, 5, 0.0, 1.0)
        with pytest.raises(ContractViolation):
            hoeffding_sample_bound(0.1, 0.0, 0.9, 5, 0.0, 1.0)
        with pytest.raises(ContractViolation):
            hoeffding_sample_bound(0.1, 0.05, 0.9, 5, 2.0, 1.0)


class TestHoeffdingTail:
    def test_eps_zero_is_vacuous(self):
        assert hoeffding_tail(3, 0.0, [(0, 1)] * 3) == 2.0

    def test_single_unit_range(self):
        assert hoeffding_tail(1, 1.0, [(0, 1)]) == pytest.approx(2 * math.exp(-2))

    def test_doubling_ranges_quarters_exponent(self):
        base = hoeffding_tail(4, 1.0, [(0, 1)] * 4)
        wide = hoeffding_tail(4, 1.0, [(0, 2)] * 4)
        assert math.log(wide / 2) == pytest.approx(math.log(base / 2) / 4)

    def test_single_range_replicated(self):
        assert hoeffding_tail(5, 0.7, [(0, 1)]) == hoeffding_tail(5, 0.7, [(0, 1)] * 5)


class TestNonnegativityAndContinuity:
    def test_grid_nonnegative(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            beta = float(rng.uniform(0.05, 0.95))
            eps = float(rng.uniform(0, 2))
            delta = float(rng.uniform(0, 2))
            alpha = float(rng.uniform(0, 1))
            tau = int(rng.integers(1, 30))
            r = float(rng.uniform(0, 3))
            assert api_worst_case_bound(delta, eps, beta) >= 0
            assert improved_greedy_bound(eps, beta) >= 0
            assert reward_error_bound(eps, alpha, beta) >= 0
            assert rolling_horizon_bound(r, beta, tau) >= 0
            assert approx_plus_horizon_bound(r, beta, tau, eps) >= 0

    def test_continuity_small_perturbation(self):
        h = 1e-9
        assert api_worst_case_bound(0.1 + h, 0.05, 0.5) == pytest.approx(
            api_worst_case_bound(0.1, 0.05, 0.5), abs=1e-7
        )
        assert improved_greedy_bound(0.1 + h, 0.5) == pytest.approx(
            improved_greedy_bound(0.1, 0.5), abs=1e-7
        )
        assert rolling_horizon_bound(1.0 + h, 0.5, 5) == pytest.approx(
            rolling_horizon_bound(1.0, 0.5, 5), abs=1e-7
        )


class TestEmpiricalValidity:
    def test_coverage_of_sample_bound(self, rng):
        """The sample count really does control the batch-mean deviation."""
        m = random_mdp(rng, 4, 2, 0.6, r_low=0.0, r_high=1.0)
        g = make_tabular_generative(m)
        policy = rng.integers(0, 2, size=4)
        eps, delta, tau = 0.25, 0.1, 8
        n = hoeffding_sample_bound(eps, delta, m.discount, tau, m.r_min, m.r_max)
        truth = finite_horizon_value(m, policy, tau)[0]
        misses = 0
        batches = 200
        for b in range(batches):
            est = mc_policy_value(g, policy, 0, RolloutConfig(n, tau, 9000 + b)).value
            if abs(est - truth) > eps:
                misses += 1
        assert misses / batches <= delta + 0.03
