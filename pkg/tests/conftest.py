import numpy as np
import pytest

from rmabplan.mdp import MdpModel
from rmabplan.rmab import ArmModel, RmabModel


def random_mdp(rng, num_states, num_actions, beta, r_low=-1.0, r_high=1.0):
    transitions = rng.dirichlet(np.ones(num_states), size=(num_states, num_actions))
    rewards = rng.uniform(r_low, r_high, size=(num_states, num_actions))
    return MdpModel(transitions, rewards, beta)


def random_rmab(rng, num_arms, num_states, num_levels, budget, beta, r_low=0.0, r_high=1.0):
    arms = [
        ArmModel(random_mdp(rng, num_states, num_levels, beta, r_low, r_high), f"arm{i}")
        for i in range(num_arms)
    ]
    return RmabModel(arms, budget)


def single_state_mdp(reward_by_action, beta):
    a = len(reward_by_action)
    return MdpModel(
        np.ones((1, a, 1)), np.asarray(reward_by_action, dtype=float).reshape(1, a), beta
    )


def static_arm(rewards, beta, label=""):
    """Arm whose states never move: transitions are self-loops for every level."""
    rewards = np.asarray(rewards, dtype=float)
    s, m = rewards.shape
    transitions = np.zeros((s, m, s))
    for x in range(s):
        transitions[x, :, x] = 1.0
    return ArmModel(MdpModel(transitions, rewards, beta), label or "static")


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
