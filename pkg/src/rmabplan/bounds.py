"""Closed-form suboptimality bounds and sample-complexity calculators.

Pure functions of their scalar arguments; used both as library utilities and
as oracle inputs by the test suite.
"""

from __future__ import annotations

import math

from .errors import ContractViolation


def _check_beta(beta: float) -> float:
    if not 0.0 < beta < 1.0:
        raise ContractViolation(f"discount must lie in (0, 1), got {beta}")
    return float(beta)


def api_worst_case_bound(delta: float, epsilon: float, beta: float) -> float:
    """Worst-case asymptotic gap of approximate policy iteration.

    delta bounds the improvement-step error, epsilon the evaluation error:
    (delta + 2*beta*epsilon) / (1 - beta**2).
    """
    _check_beta(beta)
    if delta < 0 or epsilon < 0:
        raise ContractViolation("error levels must be nonnegative")
    return (delta + 2.0 * beta * epsilon) / (1.0 - beta * beta)


def improved_greedy_bound(epsilon: float, beta: float) -> float:
    """Gap of the greedy policy for an epsilon-accurate value function: 2*beta*epsilon/(1-beta)."""
    _check_beta(beta)
    if epsilon < 0:
        raise ContractViolation("epsilon must be nonnegative")
    return 2.0 * beta * epsilon / (1.0 - beta)


def reward_error_bound(epsilon: float, alpha: float, beta: float) -> float:
    """Greedy-policy gap when rewards are only known within alpha: (2*beta*epsilon + 2*alpha)/(1-beta)."""
    _check_beta(beta)
    if epsilon < 0 or alpha < 0:
        raise ContractViolation("error levels must be nonnegative")
    return (2.0 * beta * epsilon + 2.0 * alpha) / (1.0 - beta)


def rolling_horizon_bound(r_max: float, beta: float, tau: int) -> float:
    """Truncation gap of a tau-step horizon: beta**tau * r_max / (1 - beta)."""
    _check_beta(beta)
    if tau < 1:
        raise ContractViolation(f"tau must be >= 1, got {tau}")
    return beta**tau * r_max / (1.0 - beta)


def approx_plus_horizon_bound(r_max: float, beta: float, tau: int, epsilon: float) -> float:
    """Combined truncation-plus-approximation gap.

    beta**tau * r_max/(1-beta) + 2*beta*epsilon/(1-beta); the second term uses
    the 1-beta denominator that the underlying derivation supports.
    """
    return rolling_horizon_bound(r_max, beta, tau) + improved_greedy_bound(epsilon, beta)


def min_horizon_for_eps(epsilon: float, beta: float, r_max: float) -> int:
    """Smallest horizon tau with tau > 1 + log_beta(epsilon*(1-beta)/r_max).

    At the returned tau the truncation gap beta**tau * r_max/(1-beta) is below
    epsilon (with one step of margin).  If a single step already suffices the
    answer is 1.
    """
    _check_beta(beta)
    if epsilon <= 0:
        raise ContractViolation(f"epsilon must be positive, got {epsilon}")
    if r_max <= 0:
        return 1
    if epsilon >= r_max / (1.0 - beta):
        return 1
    threshold = 1.0 + math.log(epsilon * (1.0 - beta) / r_max) / math.log(beta)
    return max(1, int(math.floor(threshold)) + 1)


def hoeffding_sample_bound(
    epsilon: float, delta: float, beta: float, tau: int, r_min: float, r_max: float
) -> int:
    """Trajectories needed so a batch mean of tau-step returns is epsilon-accurate
    with probability at least 1 - delta.

    Returns decay geometrically, so each lies in an interval of width
    (2*r_max - r_min) * (1 - beta**tau) / (1 - beta); solving the two-sided
    Hoeffding tail for the sample count gives

        L = (2*r_max - r_min)**2 * (1-beta**tau)**2 * ln(2/delta)
            / (2 * epsilon**2 * (1-beta)**2)

    rounded up (sample counts must be conservative).
    """
    _check_beta(beta)
    if epsilon <= 0 or delta <= 0:
        raise ContractViolation("epsilon and delta must be positive")
    if tau < 1:
        raise ContractViolation(f"tau must be >= 1, got {tau}")
    if r_min > r_max:
        raise ContractViolation(f"r_min {r_min} exceeds r_max {r_max}")
    spread = (2.0 * r_max - r_min) * (1.0 - beta**tau) / (1.0 - beta)
    raw = spread**2 * math.log(2.0 / delta) / (2.0 * epsilon**2)
    return max(1, math.ceil(raw))


def hoeffding_sample_bound_reciprocal(
    epsilon: float, delta: float, beta: float, tau: int, r_min: float, r_max: float
) -> float:
    """Reciprocal-form variant of the sample count, kept as a diagnostic.

    Evaluates 2*eps**2*(1-beta**2) / ((2*r_max-r_min)**2 * (1-beta**tau) * ln(2/delta)).
    It shrinks as epsilon grows, so it cannot serve as a conservative sample
    count; hoeffding_sample_bound is the normative one.
    """
    _check_beta(beta)
    if epsilon <= 0 or delta <= 0:
        raise ContractViolation("epsilon and delta must be positive")
    if tau < 1:
        raise ContractViolation(f"tau must be >= 1, got {tau}")
    denom = (2.0 * r_max - r_min) ** 2 * (1.0 - beta**tau) * math.log(2.0 / delta)
    return 2.0 * epsilon**2 * (1.0 - beta * beta) / denom


def hoeffding_tail(n: int, epsilon: float, ranges) -> float:
    """Two-sided tail bound 2*exp(-2*eps^2 / sum (b_i - a_i)^2) for a sum of
    n independent variables, the i-th confined to [a_i, b_i].

    Pass a single (a, b) pair to have it replicated n times.
    """
    if n < 1:
        raise ContractViolation(f"n must be >= 1, got {n}")
    if epsilon < 0:
        raise ContractViolation("epsilon must be nonnegative")
    ranges = list(ranges)
    if len(ranges) == 2 and not isinstance(ranges[0], (tuple, list)):
        ranges = [tuple(ranges)]
    if len(ranges) == 1 and n > 1:
        ranges = ranges * n
    if len(ranges) != n:
        raise ContractViolation(f"got {len(ranges)} ranges for n={n}")
    total = 0.0
    for a, b in ranges:
        if b < a:
            raise ContractViolation(f"empty range ({a}, {b})")
        total += (b - a) ** 2
    if total == 0.0:
        return 0.0 if epsilon > 0 else 2.0
    return 2.0 * math.exp(-2.0 * epsilon**2 / total)


def mean_deviation_tail(
    num_samples: int, epsilon: float, beta: float, tau: int, r_min: float, r_max: float
) -> float:
    """Tail probability that a batch mean of tau-step returns misses by > epsilon.

    Direct substitution form 2*exp(-2*eps^2*(1-beta)^2*L / ((2*r_max-r_min)^2*(1-beta^tau)^2));
    plugging in L = hoeffding_sample_bound(...) yields at most delta.
    """
    _check_beta(beta)
    if num_samples < 1:
        raise ContractViolation("num_samples must be >= 1")
    spread = (2.0 * r_max - r_min) * (1.0 - beta**tau) / (1.0 - beta)
    if spread == 0.0:
        return 0.0 if epsilon > 0 else 2.0
    return 2.0 * math.exp(-2.0 * epsilon**2 * num_samples / spread**2)
