"""Subsidized single-arm analysis: indexability checks and index computation.

A two-action arm is paid a subsidy W per slot of passivity; the multi-action
generalization pays W per unused activity unit, so with levels 0..M-1 the
augmented reward is r(x, a) + W * (M - 1 - a) and the two-action case reduces
to the familiar r(x, a) + W * (1 - a).

An arm is indexable when the passive set of the subsidized problem grows
monotonically (by inclusion) from empty to the full state set as W sweeps a
wide-enough interval; the index of a state is the subsidy at which it enters
the passive set.  Multi-action arms generalize this per activity level: the
index W(x, alpha) is the subsidy at which the optimal level at x drops to
alpha or below, with the top level anchored at W(x, M-1) = 0.

Indexability verdicts here are grid certificates: "no nesting violation on
the supplied grid", nothing stronger.  Reports carry the grid so callers can
refine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, IndexabilityInconclusive, NonConvergence
from .mdp import MdpModel, StateSpace, TabularGenerative, bellman_backup, q_values, value_iteration
from .rmab import ArmModel
from .rollout import RolloutConfig, mc_rollout_qvalue
from .streams import subseed

DEFAULT_GRID_POINTS = 2001
DEFAULT_DP_TOL = 1e-9


@dataclass(frozen=True)
class ThresholdPolicy:
    """Play (action 1) exactly when the scalar state exceeds the threshold."""

    threshold: int

    def __call__(self, state: int) -> int:
        return 1 if state > self.threshold else 0


@dataclass(frozen=True)
class ThresholdRegionPolicy:
    """Multi-dimensional threshold: play when strictly above some region element.

    The region must be an antichain under the componentwise partial order;
    states not comparable to any element stay passive.
    """

    region: tuple
    space: StateSpace

    def __post_init__(self):
        region = tuple(tuple(int(c) for c in g) for g in self.region)
        for g in region:
            if len(g) != len(self.space.dims):
                raise ContractViolation(f"region element {g} does not match dims {self.space.dims}")
        for a in region:
            for b in region:
                if a != b and all(x <= y for x, y in zip(a, b)):
                    raise ContractViolation(f"region elements {a} and {b} are comparable")
        object.__setattr__(self, "region", region)

    def __call__(self, state: int) -> int:
        coords = self.space.decode(state)
        for g in self.region:
            if all(c >= gc for c, gc in zip(coords, g)) and coords != g:
                return 1
        return 0


def subsidize(arm: ArmModel, w: float) -> MdpModel:
    """Arm model with rewards augmented by w per unused activity unit."""
    m = arm.model
    coeff = (m.num_actions - 1) - np.arange(m.num_actions)
    return MdpModel(m.transitions, m.rewards + w * coeff[None, :], m.discount, states=m.states)


def w_span(arm: ArmModel) -> float:
    """Search half-width for the subsidy: 2 * max|r| / (1 - beta).

    Beyond this, one activity level dominates at every state, so index
    searches and indexability grids are confined to [-w_span, +w_span].
    """
    return 2.0 * arm.model.r_bound / (1.0 - arm.model.discount)


def default_w_grid(arm: ArmModel, points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    span = w_span(arm)
    return np.linspace(-span, span, points)


def subsidized_dp(arm: ArmModel, w: float, tol: float = DEFAULT_DP_TOL, v0=None):
    """Solve the subsidized arm exactly; returns (values, policy)."""
    v, policy, _ = value_iteration(subsidize(arm, w), tol, v0=v0)
    return v, policy


def passive_set(arm: ArmModel, w: float, tol: float = DEFAULT_DP_TOL) -> frozenset:
    """States whose optimal subsidized action is 0."""
    _, policy = subsidized_dp(arm, w, tol)
    return frozenset(int(s) for s in np.flatnonzero(policy == 0))


@dataclass
class IndexabilityReport:
    """Grid-certified indexability verdict.

    ``level_sets[alpha][j]`` is the set of states whose optimal level is
    <= alpha at grid point j; for two-action arms ``passive_sets`` is the
    alpha=0 row.  ``first_violation`` is (alpha, W, state) for the first
    nesting break found, if any.
    """

    indexable: bool
    grid: np.ndarray
    level_sets: dict
    first_violation: tuple | None
    arm_label: str = ""
    num_levels: int = 2

    @property
    def passive_sets(self) -> list:
        return self.level_sets[0]


def _grid_policies(arm: ArmModel, grid, tol: float):
    policies = []
    v = None
    for w in grid:
        v, policy = subsidized_dp(arm, float(w), tol, v0=v)
        policies.append(policy)
    return policies


def _certify(arm: ArmModel, grid, levels, tol: float) -> IndexabilityReport:
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ContractViolation("the subsidy grid must be strictly increasing with >= 2 points")
    m = arm.model.num_actions
    all_states = frozenset(range(arm.model.num_states))
    policies = _grid_policies(arm, grid, tol)
    level_sets = {
        alpha: [frozenset(int(s) for s in np.flatnonzero(p <= alpha)) for p in policies]
        for alpha in levels
    }
    for alpha in levels:
        if alpha >= m - 1:
            continue  # the top level's set is the full state set by definition
        sets = level_sets[alpha]
        if sets[0] != frozenset() or sets[-1] != all_states:
            raise IndexabilityInconclusive(
                f"grid too narrow for level {alpha}: end sets have sizes "
                f"{len(sets[0])} and {len(sets[-1])} (need empty and full); widen the grid"
            )
    indexable = True
    first_violation = None
    for alpha in levels:
        sets = level_sets[alpha]
        for j in range(1, len(sets)):
            lost = sets[j - 1] - sets[j]
            if lost:
                indexable = False
                first_violation = (alpha, float(grid[j]), min(lost))
                break
        if not indexable:
            break
    return IndexabilityReport(
        indexable, grid, level_sets, first_violation, arm.label, num_levels=m
    )


def check_indexability(arm: ArmModel, w_grid=None, tol: float = DEFAULT_DP_TOL) -> IndexabilityReport:
    """Certify on a grid that the passive set grows from empty to full.

    Raises IndexabilityInconclusive when the grid does not reach an empty
    passive set on the left and the full set on the right.
    """
    if arm.model.num_actions != 2:
        raise ContractViolation("check_indexability expects a two-action arm")
    grid = default_w_grid(arm) if w_grid is None else w_grid
    return _certify(arm, grid, levels=[0], tol=tol)


def check_full_indexability(
    arm: ArmModel, w_grid=None, levels=None, tol: float = DEFAULT_DP_TOL
) -> IndexabilityReport:
    """Certify that {x : optimal level <= alpha} is nondecreasing in W per level."""
    m = arm.model.num_actions
    if levels is None:
        levels = list(range(m))
    grid = default_w_grid(arm) if w_grid is None else w_grid
    return _certify(arm, grid, levels=levels, tol=tol)


def _require_certificate(arm: ArmModel, certificate, needed_level: int):
    if certificate is None:
        raise ContractViolation(
            f"arm {arm.label!r} has no indexability certificate; run the checker first"
        )
    if not certificate.indexable:
        raise ContractViolation(f"arm {arm.label!r} failed certification: {certificate.first_violation}")
    if needed_level not in certificate.level_sets:
        raise ContractViolation(f"certificate does not cover level {needed_level}")


def _bisect_index(arm: ArmModel, x: int, alpha: int, tol_w: float, dp_tol: float):
    """Subsidy at which the optimal level at x drops to <= alpha.

    Maintains the bracket invariant: level > alpha at lo, <= alpha at hi.
    Returns (index, bisection steps).
    """
    span = w_span(arm)
    lo, hi = -span, span
    v = None

    def level_at(w):
        nonlocal v
        v, policy = subsidized_dp(arm, w, dp_tol, v0=v)
        return int(policy[x])

    if level_at(lo) <= alpha:
        raise ContractViolation(
            f"state {x} already sits at level <= {alpha} at subsidy {lo}; "
            "bisection bracket is invalid (non-indexable evidence or degenerate arm)"
        )
    if level_at(hi) > alpha:
        raise ContractViolation(
            f"state {x} still sits at level > {alpha} at subsidy {hi}; "
            "bisection bracket is invalid (non-indexable evidence or degenerate arm)"
        )
    steps = 0
    while hi - lo >= tol_w:
        mid = 0.5 * (lo + hi)
        if level_at(mid) <= alpha:
            hi = mid
        else:
            lo = mid
        steps += 1
    return 0.5 * (lo + hi), steps


def exact_whittle_index(
    arm: ArmModel, x: int, tol_w: float = 1e-6, certificate: IndexabilityReport = None
) -> float:
    """Bisection index of a certified two-action arm: the minimum subsidy
    making passivity optimal at x.  Serves as the oracle for the Monte Carlo
    index iteration."""
    if arm.model.num_actions != 2:
        raise ContractViolation("exact_whittle_index expects a two-action arm")
    _require_certificate(arm, certificate, needed_level=0)
    value, _ = _bisect_index(arm, int(x), alpha=0, tol_w=tol_w, dp_tol=DEFAULT_DP_TOL)
    return value


@dataclass(frozen=True)
class McIndexResult:
    """Outcome of a stochastic index iteration."""

    value: float
    converged: bool
    iterations: int
    trace: tuple  # ((W, delta), ...) in iteration order


def mc_whittle_index(
    arm: ArmModel,
    x: int,
    cfg: RolloutConfig,
    step_c: float = 1.0,
    step_exponent: float = 0.6,
    tol: float = 0.02,
    w_init: float = 0.0,
    max_outer: int = 500,
    constant_step: float = None,
) -> McIndexResult:
    """Monte Carlo index iteration for a two-action arm.

    The subsidy moves on the slow timescale,

        W <- W + gamma_k * (V~(x, play, W) - V~(x, pass, W)),

    while each action value is re-estimated on the fast timescale from a
    fresh rollout batch: first transition under the respective action, then
    the threshold-at-x base policy, rewards subsidy-augmented throughout.
    Stops when |delta| < tol; a non-convergent run returns converged=False
    with the full (W, delta) trace rather than raising.
    """
    if arm.model.num_actions != 2:
        raise ContractViolation("mc_whittle_index expects a two-action arm")
    x = int(x)
    base = ThresholdPolicy(x)
    span = w_span(arm)
    w = float(np.clip(w_init, -span, span))
    trace = []
    for k in range(max_outer):
        g = TabularGenerative(subsidize(arm, w))
        cfg_k = RolloutConfig(cfg.num_trajectories, cfg.horizon, subseed(cfg.seed, "mcidx", x, k))
        v_play = mc_rollout_qvalue(g, base, x, 1, cfg_k).value
        v_pass = mc_rollout_qvalue(g, base, x, 0, cfg_k).value
        delta = v_play - v_pass
        trace.append((w, delta))
        if abs(delta) < tol:
            return McIndexResult(w, True, k + 1, tuple(trace))
        gamma = constant_step if constant_step is not None else step_c / (1.0 + k) ** step_exponent
        w = float(np.clip(w + gamma * delta, -span, span))
    return McIndexResult(w, False, max_outer, tuple(trace))


def multiaction_index(
    arm: ArmModel,
    x: int,
    alpha: int,
    method: str = "exact",
    tol_w: float = 1e-6,
    certificate: IndexabilityReport = None,
    params: dict = None,
) -> McIndexResult:
    """Index for lowering activity from level alpha to alpha-1 at state x.

    ``exact`` bisects the subsidy with the exact subsidized solver (requires a
    full-indexability certificate).  ``two-timescale`` couples a slow subsidy
    iteration with fast value sweeps of the subsidized program:

        delta = q_W(x, alpha) - q_W(x, alpha-1),    W <- W + gamma_t * delta,

    so the subsidy rises while the lower level is still the worse choice, and
    settles at indifference.
    """
    m = arm.model.num_actions
    if not 1 <= alpha <= m - 1:
        raise ContractViolation(f"alpha must be in [1, {m - 1}], got {alpha}")
    x = int(x)
    if method == "exact":
        _require_certificate(arm, certificate, needed_level=alpha - 1)
        value, steps = _bisect_index(arm, x, alpha - 1, tol_w, DEFAULT_DP_TOL)
        return McIndexResult(value, True, steps, ())
    if method != "two-timescale":
        raise ContractViolation(f"unknown method {method!r}")
    params = dict(params or {})
    step_c = params.get("step_c", 1.0)
    step_exponent = params.get("step_exponent", 0.6)
    constant_step = params.get("constant_step")
    tol = params.get("tol", 1e-4)
    max_outer = params.get("max_outer", 20_000)
    span = w_span(arm)
    w = float(np.clip(params.get("w_init", 0.0), -span, span))
    min_iters = params.get("min_iters", 50)  # let the fast-timescale values warm up first
    v = np.zeros(arm.model.num_states)
    trace = []
    for t in range(max_outer):
        sub = subsidize(arm, w)
        v = bellman_backup(v, sub)  # fast timescale: one sweep per subsidy update
        q = q_values(v, sub)[x]
        delta = float(q[alpha] - q[alpha - 1])
        trace.append((w, delta))
        if t >= min_iters and abs(delta) < tol:
            return McIndexResult(w, True, t + 1, tuple(trace[-20:]))
        gamma = constant_step if constant_step is not None else step_c / (1.0 + t) ** step_exponent
        w = float(np.clip(w + gamma * delta, -span, span))
    return McIndexResult(w, False, max_outer, tuple(trace[-20:]))


@dataclass
class IndexTable:
    """Per-arm map (state, activity level) -> index value.

    Multi-action tables carry every level with the top level anchored at 0;
    two-action tables store level 0 and synthesize the top-level anchor.
    ``info[(state, level)]`` records (iterations, converged) of the method
    that produced each entry.
    """

    arm_label: str
    num_levels: int
    entries: dict
    monotone_in_level: bool = True
    info: dict = field(default_factory=dict)

    def lookup(self, state: int, level: int) -> float:
        key = (int(state), int(level))
        if key in self.entries:
            return self.entries[key]
        if key[1] == self.num_levels - 1:
            return 0.0  # raising past the top level is never worthwhile
        raise ContractViolation(
            f"index table for {self.arm_label!r} has no entry for state {key[0]}, level {key[1]}"
        )


def build_index_table(
    arm: ArmModel,
    method: str = "exact",
    certificate: IndexabilityReport = None,
    states=None,
    tol_w: float = 1e-6,
    mc_cfg: RolloutConfig = None,
    mc_params: dict = None,
) -> IndexTable:
    """Compute index values for the requested states at every level.

    ``method`` is "exact" (bisection), "mc" (Monte Carlo iteration, two-action
    arms only) or "two-timescale".
    """
    m = arm.model.num_actions
    if states is None:
        states = range(arm.model.num_states)
    entries, info = {}, {}
    mc_params = dict(mc_params or {})
    for x in states:
        for alpha in range(1, m):
            level = alpha - 1  # table slot: index for resting at `level` vs going higher
            if method == "exact":
                _require_certificate(arm, certificate, needed_level=level)
                value, steps = _bisect_index(arm, int(x), level, tol_w, DEFAULT_DP_TOL)
                entries[(int(x), level)] = value
                info[(int(x), level)] = (steps, True)
            elif method == "mc":
                if m != 2:
                    raise ContractViolation("the mc method applies to two-action arms only")
                if mc_cfg is None:
                    raise ContractViolation("the mc method needs a RolloutConfig")
                res = mc_whittle_index(arm, int(x), mc_cfg, **mc_params)
                entries[(int(x), level)] = res.value
                info[(int(x), level)] = (res.iterations, res.converged)
            elif method == "two-timescale":
                res = multiaction_index(arm, int(x), alpha, "two-timescale", params=mc_params)
                entries[(int(x), level)] = res.value
                info[(int(x), level)] = (res.iterations, res.converged)
            else:
                raise ContractViolation(f"unknown method {method!r}")
        if m > 2:
            entries[(int(x), m - 1)] = 0.0
            info[(int(x), m - 1)] = (0, True)
    # level-monotonicity metadata spans the stored entries (two-action tables
    # hold a single level, so the check is vacuous there)
    monotone = True
    if m > 2:
        for x in states:
            vals = [entries[(int(x), lvl)] for lvl in range(m)]
            if any(vals[i] < vals[i + 1] - 1e-9 for i in range(len(vals) - 1)):
                monotone = False
    return IndexTable(arm.label, m, entries, monotone, info)


def greedy_allocation(tables, x, budget: int) -> tuple[int, ...]:
    """Allocate the budget one activity unit at a time by the largest index.

    Starting from all-zero levels, repeatedly raise the arm whose index at its
    current (state, level) is largest, stopping when the budget binds or the
    best available index is <= 0 (a nonpositive index means the raise is not
    worth a subsidy at all).  Index ties raise the lowest arm number first.
    """
    tables = list(tables)
    x = tuple(int(s) for s in x)
    if len(x) != len(tables):
        raise ContractViolation(f"{len(x)} states for {len(tables)} index tables")
    levels = [0] * len(tables)
    total = 0
    while total < budget:
        best_i, best_w = None, None
        for i, table in enumerate(tables):
            if levels[i] >= table.num_levels - 1:
                continue
            w = table.lookup(x[i], levels[i])
            if best_w is None or w > best_w:
                best_i, best_w = i, w
        if best_i is None or best_w <= 0.0:
            break
        levels[best_i] += 1
        total += 1
    return tuple(levels)


def index_policy(tables, budget: int):
    """Joint decision rule applying greedy_allocation at every step."""

    def rule(x, t, rng):
        return greedy_allocation(tables, x, budget)

    return rule
