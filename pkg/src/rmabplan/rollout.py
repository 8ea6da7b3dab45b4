"""Monte Carlo rollout planning over a generative model.

A rollout decision at state x estimates, for every candidate action a, the
value of taking a now and following a base policy for a fixed horizon:

    q(x, a) = r(x, a) + beta * mean over L trajectories of the horizon-length
              discounted return, each trajectory starting from a next state
              sampled under a and then following the base policy.

Trajectory l of a (state, action) batch owns randomness derived from
(seed, state, action, l), so estimates are reproducible and independent of
how trajectories are partitioned across workers.  For tabular models the
batch derives one stream per (seed, state, action) and trajectory l consumes
row l of its (L, horizon+1) draw matrix, which keeps large batches cheap;
other generative models get one derived stream per trajectory.  Aggregation
is a mean in trajectory-index order, keeping results bit-stable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation
from .mdp import GenerativeModel, TabularGenerative
from .streams import substream


@dataclass(frozen=True)
class RolloutConfig:
    """Trajectory batching parameters: L trajectories of depth `horizon` per estimate."""

    num_trajectories: int
    horizon: int
    seed: int

    def __post_init__(self):
        if self.num_trajectories < 1:
            raise ContractViolation(f"num_trajectories must be >= 1, got {self.num_trajectories}")
        if self.horizon < 1:
            raise ContractViolation(f"horizon must be >= 1, got {self.horizon}")


@dataclass(frozen=True)
class TrajectoryReturn:
    """Discounted return of one simulated trajectory."""

    value: float
    trajectory_index: int
    state: int
    action: int


@dataclass(frozen=True)
class QEstimate:
    """Monte Carlo action-value estimate with sampling diagnostics."""

    value: float
    sample_count: int
    sample_std_dev: float


def policy_action(p, state: int) -> int:
    """Action of a policy at a state; accepts callables and index arrays."""
    if callable(p):
        return int(p(state))
    return int(p[state])


def policy_as_array(p, num_states: int) -> np.ndarray:
    if not callable(p):
        arr = np.asarray(p, dtype=np.int64)
        if arr.shape != (num_states,):
            raise ContractViolation(f"policy array shape {arr.shape} != ({num_states},)")
        return arr
    return np.array([int(p(s)) for s in range(num_states)], dtype=np.int64)


def _check_action(g: GenerativeModel, action: int) -> int:
    action = int(action)
    if not 0 <= action < g.num_actions:
        raise ContractViolation(f"action {action} outside the model's {g.num_actions} actions")
    return action


def simulate_trajectory(
    g: GenerativeModel,
    p,
    start_state: int,
    start_action: int,
    horizon: int,
    rng: np.random.Generator,
    trajectory_index: int = 0,
) -> TrajectoryReturn:
    """Simulate one trajectory: `start_action` first, then the policy.

    Returns sum_{t=0}^{horizon-1} beta^t r_t; the stream is advanced by
    exactly one draw per step.
    """
    if horizon < 1:
        raise ContractViolation(f"horizon must be >= 1, got {horizon}")
    state = int(start_state)
    action = _check_action(g, start_action)
    total = 0.0
    disc = 1.0
    for _ in range(horizon):
        state, reward = g.sample(state, action, rng)
        total += disc * reward
        disc *= g.discount
        action = _check_action(g, policy_action(p, state))
    return TrajectoryReturn(total, trajectory_index, int(start_state), int(start_action))


def _estimate(samples: np.ndarray) -> QEstimate:
    n = samples.size
    std = float(np.std(samples, ddof=1)) if n > 1 else 0.0
    return QEstimate(float(samples.mean()), n, std)


def _tabular_policy_array(g: GenerativeModel, p):
    if isinstance(g, TabularGenerative):
        try:
            return policy_as_array(p, g.num_states)
        except (TypeError, ContractViolation, IndexError):
            return None
    return None


def _batch_qvalue_tabular(g: TabularGenerative, pol: np.ndarray, state, action, cfg: RolloutConfig):
    """Vectorized rollout batch; row l of the draw matrix belongs to trajectory l."""
    L, tau = cfg.num_trajectories, cfg.horizon
    u = substream(cfg.seed, "qvalue", state, action).random((L, tau + 1))
    rewards = g.model.rewards
    states = np.full(L, state, dtype=np.int64)
    actions = np.full(L, action, dtype=np.int64)
    totals = np.zeros(L)
    disc = 1.0
    r0 = float(rewards[state, action])
    beta = g.discount
    # column 0 is the first transition under `action`; the return accumulates
    # the base policy's rewards from the sampled next state onward
    states = g.sample_next_batch(states, actions, u[:, 0])
    for t in range(tau):
        actions = pol[states]
        totals += disc * rewards[states, actions]
        disc *= beta
        states = g.sample_next_batch(states, actions, u[:, t + 1])
    return r0 + beta * totals


def mc_rollout_qvalue(g: GenerativeModel, p, state: int, action: int, cfg: RolloutConfig) -> QEstimate:
    """Estimate q(state, action) = r + beta * mean of L base-policy returns.

    Each trajectory samples its first transition under `action` and then
    follows p for cfg.horizon steps, on a stream derived from
    (cfg.seed, state, action, trajectory index).
    """
    action = _check_action(g, action)
    pol = _tabular_policy_array(g, p)
    if pol is not None:
        samples = _batch_qvalue_tabular(g, pol, int(state), action, cfg)
        return _estimate(samples)
    samples = np.empty(cfg.num_trajectories)
    for l in range(cfg.num_trajectories):
        rng = substream(cfg.seed, "qvalue", state, action, l)
        nxt, r0 = g.sample(state, action, rng)
        tr = simulate_trajectory(g, p, nxt, policy_action(p, nxt), cfg.horizon, rng, l)
        samples[l] = r0 + g.discount * tr.value
    return _estimate(samples)


def rollout_policy_action(g: GenerativeModel, p, state: int, cfg: RolloutConfig):
    """Greedy action over rollout q-estimates; ties go to the lowest action index.

    Returns (action, [QEstimate per action]).
    """
    if g.num_actions < 1:
        raise ContractViolation("empty action set")
    estimates = [mc_rollout_qvalue(g, p, state, a, cfg) for a in range(g.num_actions)]
    values = np.array([e.value for e in estimates])
    return int(values.argmax()), estimates


@dataclass(frozen=True)
class ParallelRolloutDecision:
    """Decision of a rollout over a set of base policies."""

    action: int
    per_policy: tuple  # per_policy[j][a] -> QEstimate for policy j, action a
    action_values: np.ndarray  # best-over-policies value per action


def parallel_rollout_action(g: GenerativeModel, policy_set, state: int, cfg: RolloutConfig):
    """Rollout over several base policies, taking the best estimate per action.

    All policies share trajectory streams (derived from seed/state/action/index
    only), so duplicated policies cannot change the decision.  Ties in the
    per-action max go to the lowest policy index, final ties to the lowest
    action index.
    """
    policies = list(policy_set)
    if not policies:
        raise ContractViolation("parallel rollout needs a non-empty policy set")
    per_policy = tuple(
        tuple(mc_rollout_qvalue(g, p, state, a, cfg) for a in range(g.num_actions))
        for p in policies
    )
    table = np.array([[e.value for e in row] for row in per_policy])
    action_values = table.max(axis=0)
    action = int(action_values.argmax())
    return ParallelRolloutDecision(action, per_policy, action_values)


def mc_policy_value(g: GenerativeModel, p, state: int, cfg: RolloutConfig) -> QEstimate:
    """Estimate the horizon-length value of following p from `state`.

    Mean of L discounted trajectory returns, all starting at `state` with the
    policy's own action.  Tabular models draw one stream derived from
    (seed, state) and give trajectory l row l of the (L, horizon) draw matrix,
    which keeps very large batches cheap and partition-independent; other
    generative models get one derived stream per trajectory.
    """
    L, tau = cfg.num_trajectories, cfg.horizon
    pol = _tabular_policy_array(g, p)
    if pol is None:
        samples = np.empty(L)
        for l in range(L):
            rng = substream(cfg.seed, "pvalue", state, l)
            tr = simulate_trajectory(g, p, state, policy_action(p, state), tau, rng, l)
            samples[l] = tr.value
        return _estimate(samples)
    rng = substream(cfg.seed, "pvalue", state)
    u = rng.random((L, tau))
    rewards = g.model.rewards
    states = np.full(L, state, dtype=np.int64)
    totals = np.zeros(L)
    disc = 1.0
    for t in range(tau):
        actions = pol[states]
        totals += disc * rewards[states, actions]
        disc *= g.discount
        states = g.sample_next_batch(states, actions, u[:, t])
    return _estimate(totals)
