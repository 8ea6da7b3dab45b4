"""Planning toolkit for discounted MDPs and restless multi-armed bandits.

Exact dynamic-programming solvers, Monte Carlo rollout and parallel rollout
policies, Whittle index computation (exact, Monte Carlo, and two-timescale),
budget-greedy allocation, and closed-form verification bounds, all at desk
scale with reproducible randomness.
"""

__version__ = "0.1.0"
