"""Restless multi-armed bandits: N independent Markov arms coupled by a budget.

Arm i is a finite MDP whose actions 0..M_i-1 are activity levels; a joint
action assigns one level per arm subject to sum(levels) <= budget.  Reward is
earned from every arm at every level (scenarios wanting "no reward when
passive" encode r(., 0) = 0).

Joint decision rules are callables ``policy(state, t, rng) -> levels`` where
``state`` and ``levels`` are per-arm tuples.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, GuardExceeded
from .mdp import MdpModel, StateSpace
from .streams import substream, subseed

ENUMERATION_GUARD = 10**7
JOINT_STATE_GUARD = 10**6
JOINT_TENSOR_GUARD = 2 * 10**7


@dataclass
class ArmModel:
    """One bandit arm: a finite MDP whose actions are activity levels."""

    model: MdpModel
    label: str = ""

    @property
    def num_states(self) -> int:
        return self.model.num_states

    @property
    def num_levels(self) -> int:
        return self.model.num_actions


@dataclass
class RmabModel:
    """N independent arms, a per-slot budget on total activity, one shared discount."""

    arms: list
    budget: int

    def __post_init__(self):
        if not self.arms:
            raise ContractViolation("an RMAB needs at least one arm")
        if self.budget < 1:
            raise ContractViolation(f"budget must be >= 1, got {self.budget}")
        discounts = {arm.model.discount for arm in self.arms}
        if len(discounts) > 1:
            raise ContractViolation(f"arms disagree on the discount: {sorted(discounts)}")
        for i, arm in enumerate(self.arms):
            if not arm.label:
                arm.label = f"arm{i}"
        self._cums = [np.cumsum(arm.model.transitions, axis=2) for arm in self.arms]

    @property
    def num_arms(self) -> int:
        return len(self.arms)

    @property
    def discount(self) -> float:
        return self.arms[0].model.discount

    def level_counts(self) -> tuple[int, ...]:
        return tuple(arm.num_levels for arm in self.arms)

    def validate_state(self, x) -> tuple[int, ...]:
        x = tuple(int(s) for s in x)
        if len(x) != self.num_arms:
            raise ContractViolation(f"state has {len(x)} entries for {self.num_arms} arms")
        for i, (s, arm) in enumerate(zip(x, self.arms)):
            if not 0 <= s < arm.num_states:
                raise ContractViolation(f"state {s} out of range for arm {i}")
        return x

    def validate_action(self, a) -> tuple[int, ...]:
        a = tuple(int(v) for v in a)
        if len(a) != self.num_arms:
            raise ContractViolation(f"action has {len(a)} entries for {self.num_arms} arms")
        for i, (lvl, arm) in enumerate(zip(a, self.arms)):
            if not 0 <= lvl < arm.num_levels:
                raise ContractViolation(f"level {lvl} out of range for arm {i}")
        if sum(a) > self.budget:
            raise ContractViolation(f"action {a} exceeds budget {self.budget}")
        return a

    def immediate_reward(self, x, a) -> float:
        return float(sum(arm.model.rewards[s, lvl] for arm, s, lvl in zip(self.arms, x, a)))

    def step_arms(self, x, a, rng: np.random.Generator) -> tuple[int, ...]:
        """Advance every arm one slot under its own transition law (one draw per arm)."""
        nxt = []
        for i, (s, lvl) in enumerate(zip(x, a)):
            row = self._cums[i][s, lvl]
            u = rng.random()
            nxt.append(min(int(np.searchsorted(row, u, side="right")), len(row) - 1))
        return tuple(nxt)


def enumerate_feasible_actions(m: RmabModel) -> list:
    """All level assignments with sum <= budget, in lexicographic order."""
    counts = m.level_counts()
    if math.prod(counts) > ENUMERATION_GUARD:
        raise GuardExceeded(
            f"joint action space of size {math.prod(counts)} exceeds the enumeration "
            f"guard ({ENUMERATION_GUARD}); use a greedy/index policy instead"
        )
    return [a for a in itertools.product(*(range(c) for c in counts)) if sum(a) <= m.budget]


def _two_action(m: RmabModel) -> bool:
    return all(c == 2 for c in m.level_counts())


def top_k_positive(values, k: int) -> list[int]:
    """Indices of up to k strictly positive entries, largest first.

    Ties prefer the higher index, which makes play/not-play vectors built from
    the result lexicographically smallest among the maximizers.
    """
    order = sorted(range(len(values)), key=lambda i: (-values[i], -i))
    return [i for i in order[:k] if values[i] > 0]


def myopic_action(m: RmabModel, x) -> tuple[int, ...]:
    """Feasible action maximizing the immediate joint reward.

    Ties resolve to the lexicographically smallest maximizer.  Two-action
    bandits use the exact marginal-gain shortcut; other models enumerate.
    """
    x = m.validate_state(x)
    if _two_action(m):
        gains = [arm.model.rewards[s, 1] - arm.model.rewards[s, 0] for arm, s in zip(m.arms, x)]
        played = top_k_positive(gains, m.budget)
        action = [0] * m.num_arms
        for i in played:
            action[i] = 1
        return tuple(action)
    best, best_val = None, -np.inf
    for a in enumerate_feasible_actions(m):
        val = m.immediate_reward(x, a)
        if val > best_val:
            best, best_val = a, val
    return best


def _decoded_coords(m: RmabModel):
    dims = tuple(arm.num_states for arm in m.arms)
    return np.unravel_index(np.arange(math.prod(dims)), dims), dims


def myopic_value_table(m: RmabModel) -> np.ndarray:
    """max_a sum_i r_i(x_i, a_i) over feasible actions, for every joint state."""
    actions = enumerate_feasible_actions(m)
    coords, dims = _decoded_coords(m)
    if math.prod(dims) > JOINT_STATE_GUARD:
        raise GuardExceeded(f"joint state space exceeds the guard ({JOINT_STATE_GUARD})")
    best = np.full(math.prod(dims), -np.inf)
    for a in actions:
        total = np.zeros(math.prod(dims))
        for i, arm in enumerate(m.arms):
            total += arm.model.rewards[coords[i], a[i]]
        np.maximum(best, total, out=best)
    return best


def lookahead_action(m: RmabModel, x) -> tuple[int, ...]:
    """One-step lookahead: immediate reward plus the discounted expectation of
    the next slot's best immediate reward under the product transition law."""
    x = m.validate_state(x)
    dims = tuple(arm.num_states for arm in m.arms)
    if math.prod(dims) > JOINT_STATE_GUARD:
        raise GuardExceeded(f"joint state space exceeds the guard ({JOINT_STATE_GUARD})")
    g = myopic_value_table(m).reshape(dims)
    beta = m.discount
    best, best_val = None, -np.inf
    for a in enumerate_feasible_actions(m):
        future = g
        for i, arm in enumerate(m.arms):
            future = np.tensordot(arm.model.transitions[x[i], a[i]], future, axes=(0, 0))
        val = m.immediate_reward(x, a) + beta * float(future)
        if val > best_val:
            best, best_val = a, val
    return best


def joint_as_mdp(m: RmabModel) -> tuple[MdpModel, list]:
    """Exact product MDP over joint states with the feasible joint-action set.

    Returns (model, actions); action index j of the model corresponds to the
    level assignment actions[j].  Only viable at desk scale.
    """
    actions = enumerate_feasible_actions(m)
    dims = tuple(arm.num_states for arm in m.arms)
    n_joint = math.prod(dims)
    if n_joint * n_joint * len(actions) > JOINT_TENSOR_GUARD:
        raise GuardExceeded(
            f"joint transition tensor would hold {n_joint * n_joint * len(actions)} entries "
            f"(guard {JOINT_TENSOR_GUARD})"
        )
    coords, _ = _decoded_coords(m)
    transitions = np.empty((n_joint, len(actions), n_joint))
    rewards = np.empty((n_joint, len(actions)))
    for j, a in enumerate(actions):
        prod = np.ones((1, 1))
        total = np.zeros(n_joint)
        for i, arm in enumerate(m.arms):
            prod = np.kron(prod, arm.model.transitions[:, a[i], :])
            total += arm.model.rewards[coords[i], a[i]]
        transitions[:, j, :] = prod
        rewards[:, j] = total
    model = MdpModel(transitions, rewards, m.discount, states=StateSpace(dims))
    return model, actions


def joint_policy_from_flat(m: RmabModel, flat_policy, actions):
    """Adapt a flat-state policy of the product MDP into a joint decision rule."""
    space = StateSpace(tuple(arm.num_states for arm in m.arms))

    def rule(x, t, rng):
        return actions[int(flat_policy[space.encode(x)])]

    return rule


def simulate_episode(m: RmabModel, policy, horizon: int, seed: int, start_state) -> float:
    """Run one episode and return its discounted total reward.

    The policy is called as policy(x, t, rng) with a per-step stream derived
    from (seed, t); arm transitions draw from the episode's own stream.  Every
    emitted action is checked against the budget.
    """
    if horizon < 1:
        raise ContractViolation(f"horizon must be >= 1, got {horizon}")
    x = m.validate_state(start_state)
    env_rng = substream(seed, "env")
    total = 0.0
    disc = 1.0
    for t in range(horizon):
        a = policy(x, t, substream(seed, "policy", t))
        try:
            a = m.validate_action(a)
        except ContractViolation as exc:
            raise ContractViolation(f"infeasible action at step {t}: {exc}") from exc
        total += disc * m.immediate_reward(x, a)
        disc *= m.discount
        x = m.step_arms(x, a, env_rng)
    return total


def evaluate_policy(
    m: RmabModel,
    policy,
    episodes: int,
    horizon: int,
    seed: int,
    start_state,
    threads: int = 1,
) -> tuple[float, float]:
    """Mean and standard error of the episode return over derived streams.

    Episode e always uses the stream derived from (seed, e), so the result is
    deterministic in the seed no matter how episodes are spread over threads.
    """
    if episodes < 1:
        raise ContractViolation(f"episodes must be >= 1, got {episodes}")

    def run(e: int) -> float:
        return simulate_episode(m, policy, horizon, subseed(seed, "episode", e), start_state)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            returns = np.fromiter(pool.map(run, range(episodes)), dtype=np.float64, count=episodes)
    else:
        returns = np.fromiter(map(run, range(episodes)), dtype=np.float64, count=episodes)
    mean = float(returns.mean())
    std_err = float(returns.std(ddof=1) / math.sqrt(episodes)) if episodes > 1 else 0.0
    return mean, std_err
