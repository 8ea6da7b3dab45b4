"""Frozen arm fixtures shared by the whittle and acceptance test modules."""

import numpy as np

from rmabplan.mdp import MdpModel
from rmabplan.rmab import ArmModel


def restart_arm(label="restart"):
    """5-state arm: playing restarts to state 0, resting drifts upward.

    Play rewards increase with the state, so the index is strictly increasing.
    Certified indexable; exact indices frozen in RESTART_EXACT_INDICES.
    """
    drift = 0.7
    t = np.zeros((5, 2, 5))
    for x in range(5):
        t[x, 1, 0] = 1.0
        up = min(x + 1, 4)
        t[x, 0, up] += drift
        t[x, 0, x] += 1 - drift
    r = np.zeros((5, 2))
    r[:, 1] = [0.1, 0.3, 0.5, 0.7, 0.9]
    return ArmModel(MdpModel(t, r, 0.8), label)


# bisection at tol 1e-9 against the exact subsidized solver; recorded once
RESTART_EXACT_INDICES = [-0.012, 0.0701052624, 0.183235457, 0.3192261263, 0.9]

# acceptance-suite iteration settings for the Monte Carlo index on the fixture
RESTART_MC_SETTINGS = dict(
    num_trajectories=2000,
    horizon=30,
    step_c=0.4,
    step_exponent=0.55,
    tol=0.01,
    max_outer=600,
)


def tangled_arm(label="tangled"):
    """3-state arm with a known passive-set nesting violation near W = -0.4.

    Found by random search over sharp-rowed 3-state arms with the exact
    subsidized solver; frozen here so the non-indexable branch stays covered.
    """
    t = np.array(
        [
            [[0.738, 0.010, 0.252], [0.983, 0.004, 0.013]],
            [[0.195, 0.804, 0.001], [0.110, 0.889, 0.001]],
            [[0.759, 0.156, 0.085], [0.000, 0.796, 0.204]],
        ]
    )
    r = np.array([[0.227, 0.707], [0.806, 0.291], [0.450, 0.752]])
    return ArmModel(MdpModel(t, r, 0.9), label)


TANGLED_VIOLATION_STATE = 2


def static_multilevel_arm(gains, num_levels, beta=0.7, label="static-multilevel"):
    """Static arm (self-loops everywhere) with reward a * gains[x].

    Adjacent-level indices all equal gains[x], which makes it the closed-form
    fixture for multi-action index checks.
    """
    gains = np.asarray(gains, dtype=float)
    s = gains.size
    t = np.zeros((s, num_levels, s))
    for x in range(s):
        t[x, :, x] = 1.0
    r = np.arange(num_levels)[None, :] * gains[:, None]
    return ArmModel(MdpModel(t, r, beta), label)
