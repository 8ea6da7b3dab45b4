"""Monte Carlo rollout directly on the joint bandit, no indexability assumed.

The base policy inside trajectories is greedy: each simulated slot plays the
feasible level assignment with the highest immediate reward sum (optionally
epsilon-greedy with a decaying exploration rate, exploring uniformly over the
feasible set).  A rollout decision scores every candidate action with L
trajectories of depth tau and picks the best estimate.

Candidate batches draw from streams derived per (seed, state, candidate);
trajectory l consumes row l of the candidate's draw matrix, so decisions are
reproducible for a fixed seed regardless of how the candidate x trajectory
grid is partitioned across workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation
from .rmab import RmabModel, enumerate_feasible_actions, myopic_action
from .rollout import RolloutConfig
from .streams import substream

DEFAULT_CANDIDATE_CAP = 64


@dataclass
class GreedyBasePolicy:
    """Myopic in-trajectory policy, optionally epsilon-greedy with decay.

    At step t the myopic action is played with probability 1 - eps0 * decay**t,
    otherwise a uniformly random feasible action (state-independent).  Two
    draws are consumed per decision in epsilon-greedy mode, none in
    deterministic mode, so draw layouts stay fixed.
    """

    model: RmabModel
    mode: str = "deterministic"
    epsilon0: float = 0.2
    decay: float = 0.95

    def __post_init__(self):
        if self.mode not in ("deterministic", "epsilon-greedy"):
            raise ContractViolation(f"unknown base policy mode {self.mode!r}")
        if not 0.0 <= self.epsilon0 <= 1.0:
            raise ContractViolation(f"epsilon0 must lie in [0, 1], got {self.epsilon0}")
        if not 0.0 < self.decay <= 1.0:
            raise ContractViolation(f"decay must lie in (0, 1], got {self.decay}")
        self._actions = enumerate_feasible_actions(self.model)

    def epsilon_at(self, t: int) -> float:
        return self.epsilon0 * self.decay**t

    @property
    def feasible_actions(self) -> list:
        return self._actions

    def action(self, x, t: int, rng: np.random.Generator = None):
        if self.mode == "deterministic":
            return myopic_action(self.model, x)
        if rng is None:
            raise ContractViolation("epsilon-greedy base policy needs a random stream")
        coin = rng.random()
        pick = rng.random()  # drawn unconditionally to keep the draw layout fixed
        if coin < self.epsilon_at(t):
            return self._actions[min(int(pick * len(self._actions)), len(self._actions) - 1)]
        return myopic_action(self.model, x)

    __call__ = action


@dataclass(frozen=True)
class JointRolloutDecision:
    """Chosen joint action plus the per-candidate rollout estimates behind it."""

    action: tuple
    candidates: tuple
    values: np.ndarray
    num_trajectories: int
    horizon: int
    seed: int


def _candidate_list(m: RmabModel, x, cap: int):
    actions = enumerate_feasible_actions(m)
    if len(actions) <= cap:
        return actions
    # short-list by immediate reward; the myopic action is the top entry so it
    # always survives the cut
    scored = sorted(actions, key=lambda a: (-m.immediate_reward(x, a), a))
    return sorted(scored[:cap])


def _base_actions_vectorized(base: GreedyBasePolicy, reward_tables, states, t, u_mode):
    """Base actions for a batch of joint states, matching .action() draw-for-draw."""
    actions_list = base.feasible_actions
    table = np.empty((states.shape[0], len(actions_list)))
    for j, a in enumerate(actions_list):
        total = np.zeros(states.shape[0])
        for i in range(states.shape[1]):
            total += reward_tables[i][states[:, i], a[i]]
        table[:, j] = total
    chosen = table.argmax(axis=1)
    if base.mode == "epsilon-greedy":
        explore = u_mode[:, 0] < base.epsilon_at(t)
        random_idx = np.minimum(
            (u_mode[:, 1] * len(actions_list)).astype(np.int64), len(actions_list) - 1
        )
        chosen = np.where(explore, random_idx, chosen)
    return chosen, table


def nonindexable_rollout_action(
    m: RmabModel,
    x,
    cfg: RolloutConfig,
    base: GreedyBasePolicy,
    candidate_cap: int = DEFAULT_CANDIDATE_CAP,
) -> JointRolloutDecision:
    """Pick the candidate action with the best L-trajectory estimate.

    Candidates are the whole feasible set when it fits under candidate_cap,
    otherwise the cap-many actions with the highest immediate reward.  Each
    trajectory takes the candidate first, then follows the base policy; the
    per-step reward is the immediate sum the base action attains.  Candidate
    ties resolve lexicographically.
    """
    x = m.validate_state(x)
    candidates = _candidate_list(m, x, candidate_cap)
    if not candidates:
        raise ContractViolation("no candidate actions to evaluate")
    n = m.num_arms
    L, tau = cfg.num_trajectories, cfg.horizon
    mode_draws = 2 if base.mode == "epsilon-greedy" else 0
    draws = n + tau * (mode_draws + n)
    reward_tables = [arm.model.rewards for arm in m.arms]
    actions_arr = np.array(base.feasible_actions, dtype=np.int64)
    beta = m.discount
    values = np.empty(len(candidates))
    x_arr = np.array(x, dtype=np.int64)
    for c, cand in enumerate(candidates):
        u = substream(cfg.seed, "jointro", x, cand).random((L, draws))
        states = np.tile(x_arr, (L, 1))
        col = 0
        for i in range(n):
            states[:, i] = _next_states(m, i, states[:, i], np.full(L, cand[i]), u[:, col])
            col += 1
        returns = np.zeros(L)
        disc = 1.0
        for t in range(tau):
            u_mode = u[:, col : col + mode_draws] if mode_draws else None
            col += mode_draws
            chosen, table = _base_actions_vectorized(base, reward_tables, states, t, u_mode)
            returns += disc * table[np.arange(L), chosen]
            disc *= beta
            step_actions = actions_arr[chosen]
            for i in range(n):
                states[:, i] = _next_states(m, i, states[:, i], step_actions[:, i], u[:, col])
                col += 1
        values[c] = m.immediate_reward(x, cand) + beta * float(returns.mean())
    best = int(values.argmax())
    return JointRolloutDecision(
        tuple(candidates[best]), tuple(candidates), values, L, tau, cfg.seed
    )


def _next_states(m: RmabModel, arm_index: int, states, actions, u):
    rows = m._cums[arm_index][states, actions]
    return np.minimum((rows <= u[:, None]).sum(axis=1), rows.shape[1] - 1)


def rollout_controller(
    m: RmabModel,
    cfg: RolloutConfig,
    base: GreedyBasePolicy,
    candidate_cap: int = DEFAULT_CANDIDATE_CAP,
):
    """Wrap the rollout decision as a joint decision rule for the simulator.

    Stateless: each step re-seeds the decision from the per-step stream the
    simulator provides, so episode traces are reproducible bit-for-bit.
    """

    def rule(x, t, rng):
        step_seed = int(rng.integers(0, 2**63))
        step_cfg = RolloutConfig(cfg.num_trajectories, cfg.horizon, step_seed)
        return nonindexable_rollout_action(m, x, step_cfg, base, candidate_cap).action

    return rule
