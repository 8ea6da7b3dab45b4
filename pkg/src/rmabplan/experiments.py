"""Experiment orchestration: named policies, CSV/manifest emission.

Outputs are byte-reproducible: results depend only on the config (plus any
CLI overrides baked into it), never on wall time, host, or thread count.
The wall_ms column is therefore left blank in the CSV; measured timings go
to the verbose log only.
"""

from __future__ import annotations

import io
import json
import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, ContractViolation
from .jointrollout import GreedyBasePolicy, rollout_controller
from .mdp import MdpModel, TabularGenerative, make_tabular_generative, value_iteration
from .rmab import (
    RmabModel,
    evaluate_policy,
    joint_as_mdp,
    joint_policy_from_flat,
    lookahead_action,
    myopic_action,
)
from .rollout import RolloutConfig, rollout_policy_action
from .scenarios import ExperimentSection, ScenarioConfig, build_model
from .streams import subseed, substream
from .whittle import build_index_table, check_indexability, default_w_grid, index_policy

log = logging.getLogger("rmabplan")

RESULTS_SCHEMA = "rmabplan-results-v1"
CSV_COLUMNS = ("scenario", "policy", "episodes", "horizon", "seed", "mean", "std_err", "wall_ms", "failed")

POLICY_NAMES = ("myopic", "lookahead", "whittle", "rollout", "optimal")


def format_number(x: float, precision: int = 9) -> str:
    return f"{x:.{precision}g}"


def _whittle_rule(m: RmabModel, exp: ExperimentSection):
    tables = []
    memo = {}  # identical arms (e.g. homogeneous users) share one table
    for arm in m.arms:
        key = (
            arm.model.transitions.tobytes(),
            arm.model.rewards.tobytes(),
            arm.model.discount,
        )
        if key in memo:
            tables.append(memo[key])
            continue
        grid = default_w_grid(arm, exp.index.grid_points)
        certificate = check_indexability(arm, grid)
        if exp.index.method == "mc":
            cfg = RolloutConfig(exp.index.trajectories, exp.index.horizon, subseed(exp.seed, "index", arm.label))
            table = build_index_table(
                arm,
                "mc",
                certificate,
                mc_cfg=cfg,
                mc_params=dict(
                    step_c=exp.index.step_c,
                    step_exponent=exp.index.step_exponent,
                    tol=exp.index.tol,
                    max_outer=exp.index.max_outer,
                ),
            )
        else:
            table = build_index_table(arm, "exact", certificate, tol_w=exp.index.tol_w)
        memo[key] = table
        tables.append(table)
    return index_policy(tables, m.budget)


def build_joint_policy(name: str, m: RmabModel, exp: ExperimentSection):
    """Decision rule for one of the named policies."""
    if name == "myopic":
        return lambda x, t, rng: myopic_action(m, x)
    if name == "lookahead":
        return lambda x, t, rng: lookahead_action(m, x)
    if name == "whittle":
        return _whittle_rule(m, exp)
    if name == "rollout":
        ro = exp.rollout
        mode = "epsilon-greedy" if ro.epsilon0 > 0 else "deterministic"
        base = GreedyBasePolicy(m, mode, ro.epsilon0, ro.decay)
        cfg = RolloutConfig(ro.trajectories, ro.rollout_horizon, subseed(exp.seed, "rollout"))
        return rollout_controller(m, cfg, base, ro.candidate_cap)
    if name == "optimal":
        joint, actions = joint_as_mdp(m)
        _, policy, _ = value_iteration(joint, 1e-9)
        return joint_policy_from_flat(m, policy, actions)
    raise ConfigError(f"unknown policy {name!r} (have {', '.join(POLICY_NAMES)})")


@dataclass
class PolicyRow:
    policy: str
    mean: float | None
    std_err: float | None
    failed: str = ""


@dataclass
class ExperimentReport:
    config: ScenarioConfig
    rows: list
    csv_text: str
    manifest: dict

    @property
    def failures(self) -> list:
        return [r for r in self.rows if r.failed]


def default_start_state(m: RmabModel) -> tuple:
    return (0,) * m.num_arms


def run_experiment(cfg: ScenarioConfig, threads: int = 1) -> ExperimentReport:
    """Evaluate every configured policy; never raises on a policy failure.

    Failed policies appear in the CSV with an empty mean and the error in the
    `failed` column; the caller decides the exit status from report.failures.
    """
    model = build_model(cfg)
    if not isinstance(model, RmabModel):
        raise ConfigError("run_experiment needs an rmab (or generator) model section")
    exp = cfg.experiment
    start = tuple(exp.start_state) if exp.start_state is not None else default_start_state(model)
    rows = []
    for name in exp.policies:
        t0 = time.perf_counter()
        try:
            rule = build_joint_policy(name, model, exp)
            mean, std_err = evaluate_policy(
                model, rule, exp.episodes, exp.horizon, exp.seed, start, threads=threads
            )
            rows.append(PolicyRow(name, mean, std_err))
        except Exception as exc:  # noqa: BLE001 - flushed into the failed column
            rows.append(PolicyRow(name, None, None, f"{type(exc).__name__}: {exc}"))
        log.info("policy %s finished in %.0f ms", name, 1e3 * (time.perf_counter() - t0))
    csv_text = render_csv(cfg, rows)
    manifest = build_manifest(cfg)
    return ExperimentReport(cfg, rows, csv_text, manifest)


def render_csv(cfg: ScenarioConfig, rows) -> str:
    exp = cfg.experiment
    prec = cfg.output.precision
    buf = io.StringIO()
    buf.write(f"# {RESULTS_SCHEMA}\n")
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for row in rows:
        mean = "" if row.mean is None else format_number(row.mean, prec)
        se = "" if row.std_err is None else format_number(row.std_err, prec)
        failed = row.failed.replace(",", ";").replace("\n", " ")
        buf.write(
            f"{cfg.name},{row.policy},{exp.episodes},{exp.horizon},{exp.seed},{mean},{se},,{failed}\n"
        )
    return buf.getvalue()


def build_manifest(cfg: ScenarioConfig) -> dict:
    return {
        "artifact": {"name": "rmabplan", "version": __version__},
        "results_schema": RESULTS_SCHEMA,
        "config": cfg.model_dump(),
    }


def write_report(report: ExperimentReport, out_dir) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / report.config.output.csv
    manifest_path = out / (csv_path.stem + ".manifest.json")
    csv_path.write_text(report.csv_text, encoding="utf-8")
    manifest_path.write_text(
        json.dumps(report.manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return csv_path, manifest_path


def evaluate_mdp_policy(
    m: MdpModel, decide, episodes: int, horizon: int, seed: int, start_state: int
) -> tuple[float, float]:
    """Closed-loop evaluation of a per-step decision rule on a plain MDP.

    ``decide(state, t, rng) -> action``; episode e draws from streams derived
    from (seed, e), so thread partitioning cannot change the outcome.
    """
    g = make_tabular_generative(m)
    returns = np.empty(episodes)
    for e in range(episodes):
        ep_seed = subseed(seed, "episode", e)
        env = substream(ep_seed, "env")
        s = start_state
        total, disc = 0.0, 1.0
        for t in range(horizon):
            a = int(decide(s, t, substream(ep_seed, "policy", t)))
            s2, r = g.sample(s, a, env)
            total += disc * r
            disc *= m.discount
            s = s2
        returns[e] = total
    mean = float(returns.mean())
    se = float(returns.std(ddof=1) / math.sqrt(episodes)) if episodes > 1 else 0.0
    return mean, se


def mdp_rollout_rule(g: TabularGenerative, base_policy, cfg: RolloutConfig):
    """Per-step rollout decision rule for plain MDPs (closed-loop use)."""

    def decide(s, t, rng):
        step_seed = int(rng.integers(0, 2**63))
        step_cfg = RolloutConfig(cfg.num_trajectories, cfg.horizon, step_seed)
        return rollout_policy_action(g, base_policy, s, step_cfg)[0]

    return decide
