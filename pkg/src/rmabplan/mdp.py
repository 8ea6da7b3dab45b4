"""Finite tabular MDPs: Bellman machinery, exact solvers, and generative sampling.

Conventions fixed for the whole toolkit:
  * discounting starts at weight 1 (the first reward is undiscounted),
  * argmax ties are broken toward the lowest action index,
  * transition rows are validated to sum to 1 within 1e-9 at construction
    and then renormalized exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, NonConvergence

ROW_SUM_TOL = 1e-9
_INT64_MAX = np.iinfo(np.int64).max


@dataclass(frozen=True)
class StateSpace:
    """Multi-dimensional state space addressed through flat row-major indices.

    ``dims`` holds the per-dimension cardinalities; a state is either a flat
    index in [0, total_states) or a coordinate vector, and encode/decode is a
    bijection between the two.
    """

    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) == 0:
            raise ContractViolation("state space needs at least one dimension")
        if any(d < 1 for d in dims):
            raise ContractViolation(f"all dimensions must be >= 1, got {dims}")
        total = math.prod(dims)
        if total > _INT64_MAX:
            raise ContractViolation(f"state space of size {total} overflows flat indexing")
        object.__setattr__(self, "dims", dims)

    @property
    def total_states(self) -> int:
        return math.prod(self.dims)

    def encode(self, coords) -> int:
        coords = tuple(int(c) for c in coords)
        if len(coords) != len(self.dims):
            raise ContractViolation(f"expected {len(self.dims)} coordinates, got {len(coords)}")
        for c, d in zip(coords, self.dims):
            if not 0 <= c < d:
                raise ContractViolation(f"coordinate {coords} out of range for dims {self.dims}")
        return int(np.ravel_multi_index(coords, self.dims))

    def decode(self, index: int) -> tuple[int, ...]:
        index = int(index)
        if not 0 <= index < self.total_states:
            raise ContractViolation(f"flat index {index} out of range [0, {self.total_states})")
        return tuple(int(c) for c in np.unravel_index(index, self.dims))


@dataclass
class MdpModel:
    """Tabular MDP: transition tensor (S, A, S), reward table (S, A), discount in (0,1)."""

    transitions: np.ndarray
    rewards: np.ndarray
    discount: float
    states: StateSpace = None

    def __post_init__(self):
        t = np.asarray(self.transitions, dtype=np.float64)
        r = np.asarray(self.rewards, dtype=np.float64)
        if t.ndim != 3 or t.shape[0] != t.shape[2]:
            raise ContractViolation(f"transitions must have shape (S, A, S), got {t.shape}")
        if r.shape != t.shape[:2]:
            raise ContractViolation(
                f"rewards shape {r.shape} does not match transitions {t.shape[:2]}"
            )
        if not 0.0 < self.discount < 1.0:
            raise ContractViolation(f"discount must lie in (0, 1), got {self.discount}")
        if not np.all(np.isfinite(r)):
            raise ContractViolation("rewards must be finite")
        if np.any(t < 0.0):
            raise ContractViolation("transition probabilities must be nonnegative")
        sums = t.sum(axis=2)
        bad = np.abs(sums - 1.0) > ROW_SUM_TOL
        if np.any(bad):
            s, a = np.argwhere(bad)[0]
            raise ContractViolation(
                f"transition row sum is {sums[s, a]:.12f} for state {s}, action {a} "
                f"(must be 1 within {ROW_SUM_TOL})"
            )
        t = t / sums[:, :, None]
        self.transitions = t
        self.rewards = r
        if self.states is None:
            self.states = StateSpace((t.shape[0],))
        elif self.states.total_states != t.shape[0]:
            raise ContractViolation(
                f"state space of size {self.states.total_states} does not match "
                f"{t.shape[0]} transition rows"
            )

    @property
    def num_states(self) -> int:
        return self.transitions.shape[0]

    @property
    def num_actions(self) -> int:
        return self.transitions.shape[1]

    @property
    def r_bound(self) -> float:
        """Finite bound with |r(x, a)| <= r_bound for all pairs."""
        return float(np.max(np.abs(self.rewards)))

    @property
    def r_max(self) -> float:
        return float(np.max(self.rewards))

    @property
    def r_min(self) -> float:
        return float(np.min(self.rewards))

    def value_bound(self) -> float:
        """Upper bound r_bound / (1 - discount) on |V| for any policy."""
        return self.r_bound / (1.0 - self.discount)


def _check_value(v, m: MdpModel) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (m.num_states,):
        raise ContractViolation(f"value function shape {v.shape} does not match {m.num_states} states")
    return v


def _check_policy(p, m: MdpModel) -> np.ndarray:
    p = np.asarray(p, dtype=np.int64)
    if p.shape != (m.num_states,):
        raise ContractViolation(f"policy shape {p.shape} does not match {m.num_states} states")
    if np.any(p < 0) or np.any(p >= m.num_actions):
        raise ContractViolation("policy contains an action index outside the model's action set")
    return p


def q_values(v, m: MdpModel) -> np.ndarray:
    """Action-value table r(x,a) + beta * sum_y P(y|x,a) v(y), shape (S, A)."""
    v = _check_value(v, m)
    return m.rewards + m.discount * np.einsum("say,y->sa", m.transitions, v)


def bellman_backup(v, m: MdpModel) -> np.ndarray:
    """One optimal backup: (Tv)(x) = max_a [ r(x,a) + beta * E v(next) ]."""
    return q_values(v, m).max(axis=1)


def greedy_policy(v, m: MdpModel) -> np.ndarray:
    """Greedy action per state for the given value function, lowest index on ties."""
    return q_values(v, m).argmax(axis=1)


def bellman_backup_policy(v, m: MdpModel, p) -> np.ndarray:
    """Fixed-policy backup: (T_p v)(x) = r(x,p(x)) + beta * E v(next)."""
    v = _check_value(v, m)
    p = _check_policy(p, m)
    idx = np.arange(m.num_states)
    r_p = m.rewards[idx, p]
    t_p = m.transitions[idx, p]
    return r_p + m.discount * t_p @ v


def value_iteration(m: MdpModel, tol: float, max_iters: int = 100_000, v0=None):
    """Iterate the optimal backup to sup-norm residual below tol.

    Returns (values, policy, iterations).  The returned values satisfy
    ||T v - v||_inf < tol and are within tol * beta / (1 - beta) of the
    optimum; the policy is greedy for the returned values.
    """
    if tol <= 0:
        raise ContractViolation(f"tol must be positive, got {tol}")
    v = np.zeros(m.num_states) if v0 is None else _check_value(v0, m).copy()
    residual = np.inf
    for it in range(1, max_iters + 1):
        tv = bellman_backup(v, m)
        residual = float(np.max(np.abs(tv - v)))
        v = tv
        if residual < tol:
            return v, greedy_policy(v, m), it
    raise NonConvergence(
        f"value iteration did not reach tol={tol} in {max_iters} iterations "
        f"(last residual {residual:.3e})",
        residual=residual,
        iterations=max_iters,
    )


def policy_evaluation(m: MdpModel, p, tol: float, max_iters: int = 100_000, v0=None) -> np.ndarray:
    """Iterate the fixed-policy backup to its fixed point, residual below tol."""
    if tol <= 0:
        raise ContractViolation(f"tol must be positive, got {tol}")
    p = _check_policy(p, m)
    v = np.zeros(m.num_states) if v0 is None else _check_value(v0, m).copy()
    residual = np.inf
    for _ in range(max_iters):
        tv = bellman_backup_policy(v, m, p)
        residual = float(np.max(np.abs(tv - v)))
        v = tv
        if residual < tol:
            return v
    raise NonConvergence(
        f"policy evaluation did not reach tol={tol} in {max_iters} iterations "
        f"(last residual {residual:.3e})",
        residual=residual,
        iterations=max_iters,
    )


def policy_iteration(m: MdpModel, tol: float, max_rounds: int = 1_000, initial_policy=None):
    """Alternate evaluation and greedy improvement until the policy is stable.

    Returns (policy, values).  Each improvement is monotone: the new policy's
    value dominates the old one elementwise (up to evaluation tolerance).
    """
    if tol <= 0:
        raise ContractViolation(f"tol must be positive, got {tol}")
    p = (
        np.zeros(m.num_states, dtype=np.int64)
        if initial_policy is None
        else _check_policy(initial_policy, m).copy()
    )
    v = None
    for _ in range(max_rounds):
        v = policy_evaluation(m, p, tol, v0=v)
        improved = greedy_policy(v, m)
        if np.array_equal(improved, p):
            return p, v
        p = improved
    raise NonConvergence(
        f"policy iteration did not stabilize in {max_rounds} rounds", iterations=max_rounds
    )


def finite_horizon_value(m: MdpModel, p, horizon: int) -> np.ndarray:
    """Exact expected discounted reward of following p for `horizon` steps.

    Backward recursion of sum_{t=0}^{horizon-1} beta^t r(x(t), p(x(t))); the
    first reward carries weight 1.
    """
    if horizon < 1:
        raise ContractViolation(f"horizon must be >= 1, got {horizon}")
    p = _check_policy(p, m)
    idx = np.arange(m.num_states)
    r_p = m.rewards[idx, p]
    t_p = m.transitions[idx, p]
    v = r_p.copy()
    for _ in range(horizon - 1):
        v = r_p + m.discount * t_p @ v
    return v


class GenerativeModel:
    """Sampling interface for rollout planning.

    Subclasses provide ``sample(state, action, rng) -> (next_state, reward)``
    plus the attributes ``num_actions``, ``discount``, ``r_min`` and ``r_max``.
    Sampling with a generator in the same state must be reproducible
    bit-for-bit, and rewards must respect the declared bounds.
    """

    num_actions: int
    discount: float
    r_min: float
    r_max: float

    def sample(self, state: int, action: int, rng: np.random.Generator):
        raise NotImplementedError


class TabularGenerative(GenerativeModel):
    """Generative adapter over a tabular model via inverse-CDF sampling.

    One uniform draw is consumed per sample call, which the vectorized rollout
    paths rely on for draw-for-draw equivalence with sequential simulation.
    """

    def __init__(self, model: MdpModel):
        self.model = model
        self.num_actions = model.num_actions
        self.discount = model.discount
        self.r_min = model.r_min
        self.r_max = model.r_max
        self._cum = np.cumsum(model.transitions, axis=2)

    @property
    def num_states(self) -> int:
        return self.model.num_states

    def sample(self, state: int, action: int, rng: np.random.Generator):
        u = rng.random()
        row = self._cum[state, action]
        nxt = min(int(np.searchsorted(row, u, side="right")), self.model.num_states - 1)
        return nxt, float(self.model.rewards[state, action])

    def sample_next_batch(self, states: np.ndarray, actions, u: np.ndarray) -> np.ndarray:
        """Vectorized next states for per-trajectory uniforms u (same draws as sample())."""
        rows = self._cum[states, actions]
        return np.minimum((rows <= u[:, None]).sum(axis=1), self.model.num_states - 1)


def make_tabular_generative(m: MdpModel) -> TabularGenerative:
    """Wrap a tabular model so rollout code can run against it."""
    return TabularGenerative(m)
