"""Scenario configuration: schema, loading/validation, and model builders.

Configs are JSON documents validated by the pydantic models below (unknown
keys rejected).  A scenario carries either a plain MDP or an RMAB — inline
tables or a named generator — plus the experiment and output sections.  The
bundled scenarios live in ``rmabplan.scenario_data``.
"""

from __future__ import annotations

import json
from importlib import resources

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError, model_validator

from .errors import ConfigError, ContractViolation
from .mdp import MdpModel, StateSpace
from .rmab import ArmModel, RmabModel


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class MdpSpec(_Strict):
    """Inline tabular MDP: transitions[state][action][next], rewards[state][action]."""

    transitions: list
    rewards: list
    discount: float
    dims: list[int] | None = None


class ArmSpec(_Strict):
    """One arm of an RMAB; the discount comes from the enclosing rmab section."""

    transitions: list
    rewards: list
    dims: list[int] | None = None
    label: str = ""


class GeneratorSpec(_Strict):
    name: str
    params: dict


class RmabSpec(_Strict):
    discount: float
    budget: int
    arms: list[ArmSpec]


class ModelSection(_Strict):
    mdp: MdpSpec | None = None
    rmab: RmabSpec | None = None
    generator: GeneratorSpec | None = None

    @model_validator(mode="after")
    def _exactly_one(self):
        present = [
            k for k in ("mdp", "rmab", "generator") if getattr(self, k) is not None
        ]
        if len(present) != 1:
            raise ValueError(f"exactly one of mdp/rmab/generator must be set, got {present or 'none'}")
        return self


class RolloutParams(_Strict):
    trajectories: int = 32
    rollout_horizon: int = 6
    epsilon0: float = 0.0
    decay: float = 0.95
    candidate_cap: int = 64


class IndexParams(_Strict):
    method: str = "exact"
    grid_points: int = 2001
    tol_w: float = 1e-6
    trajectories: int = 2000
    horizon: int = 30
    step_c: float = 0.4
    step_exponent: float = 0.55
    tol: float = 0.01
    max_outer: int = 600


class ExperimentSection(_Strict):
    policies: list[str]
    episodes: int = 100
    horizon: int = 40
    seed: int = 0
    start_state: list[int] | None = None
    rollout: RolloutParams = RolloutParams()
    index: IndexParams = IndexParams()


class OutputSection(_Strict):
    csv: str = "results.csv"
    precision: int = 9


class ScenarioConfig(_Strict):
    schema_version: int = 1
    name: str
    model: ModelSection
    experiment: ExperimentSection
    output: OutputSection = OutputSection()


def parse_scenario(text: str) -> ScenarioConfig:
    """Parse and validate a scenario document; builds the model once to catch
    numeric problems (row sums, shapes) at load time."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc.msg} (line {exc.lineno}, column {exc.colno})")
    try:
        cfg = ScenarioConfig.model_validate(raw)
    except ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(p) for p in first["loc"])
        raise ConfigError(f"invalid config field {where!r}: {first['msg']}")
    try:
        build_model(cfg)
    except (ContractViolation, ConfigError) as exc:
        raise ConfigError(f"config model section is invalid: {exc}")
    return cfg


def load_scenario(path) -> ScenarioConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    return parse_scenario(text)


def dump_scenario(cfg: ScenarioConfig) -> str:
    return json.dumps(cfg.model_dump(), indent=2, sort_keys=True)


def bundled_scenario_path(name: str):
    """Path of a scenario shipped with the package (name without .json)."""
    ref = resources.files("rmabplan.scenario_data").joinpath(f"{name}.json")
    if not ref.is_file():
        raise ConfigError(f"no bundled scenario named {name!r}")
    return ref


def load_bundled_scenario(name: str) -> ScenarioConfig:
    return parse_scenario(bundled_scenario_path(name).read_text(encoding="utf-8"))


def build_mdp(spec: MdpSpec | ArmSpec, discount: float | None = None) -> MdpModel:
    states = StateSpace(tuple(spec.dims)) if spec.dims else None
    beta = discount if discount is not None else spec.discount
    return MdpModel(
        np.asarray(spec.transitions, dtype=np.float64),
        np.asarray(spec.rewards, dtype=np.float64),
        beta,
        states=states,
    )


def build_rmab(spec: RmabSpec) -> RmabModel:
    arms = [
        ArmModel(build_mdp(arm, discount=spec.discount), arm.label or f"arm{i}")
        for i, arm in enumerate(spec.arms)
    ]
    return RmabModel(arms, spec.budget)


def build_model(cfg: ScenarioConfig):
    """Materialize the scenario's model: MdpModel or RmabModel."""
    section = cfg.model
    if section.mdp is not None:
        return build_mdp(section.mdp)
    if section.rmab is not None:
        return build_rmab(section.rmab)
    gen = section.generator
    if gen.name not in GENERATORS:
        raise ConfigError(f"unknown model generator {gen.name!r} (have {sorted(GENERATORS)})")
    return GENERATORS[gen.name](gen.params)


class WirelessParams(_Strict):
    """Downlink scheduling: per-user queue fed by an arrival chain, served over
    a Markov channel; the scheduler owns fewer channels than users."""

    num_users: int
    budget: int
    queue_capacity: int
    channel_transitions: list
    channel_throughput: list[float]
    arrival_transitions: list
    arrival_counts: list[int]
    discount: float
    power_levels: int = 2


def _chain(matrix, what: str) -> np.ndarray:
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ConfigError(f"{what} transition matrix must be square, got {m.shape}")
    if np.any(m < 0) or np.any(np.abs(m.sum(axis=1) - 1.0) > 1e-9):
        raise ConfigError(f"{what} transition rows must be stochastic")
    return m


def build_wireless_arm(p: WirelessParams, label: str = "") -> ArmModel:
    """One user's arm: state (queue, channel, arrival), slot order
    arrival -> service -> chain steps.

    Arrivals (per the arrival-chain state) join the queue, which clips at
    capacity; a scheduled user then transmits min(queue, level * throughput)
    packets, which is the reward; finally both exogenous chains step.  Level 0
    serves nothing and earns nothing.
    """
    ch = _chain(p.channel_transitions, "channel")
    ar = _chain(p.arrival_transitions, "arrival")
    n_ch, n_ar = ch.shape[0], ar.shape[0]
    if len(p.channel_throughput) != n_ch:
        raise ConfigError("channel_throughput must have one entry per channel state")
    if len(p.arrival_counts) != n_ar:
        raise ConfigError("arrival_counts must have one entry per arrival state")
    if p.queue_capacity < 0 or p.power_levels < 2:
        raise ConfigError("queue_capacity must be >= 0 and power_levels >= 2")
    space = StateSpace((p.queue_capacity + 1, n_ch, n_ar))
    n, m = space.total_states, p.power_levels
    transitions = np.zeros((n, m, n))
    rewards = np.zeros((n, m))
    for s in range(n):
        q, c, a_state = space.decode(s)
        q_in = min(q + p.arrival_counts[a_state], p.queue_capacity)
        for lvl in range(m):
            served = min(q_in, int(lvl * p.channel_throughput[c]))
            rewards[s, lvl] = served
            q_out = q_in - served
            for c2 in range(n_ch):
                for a2 in range(n_ar):
                    transitions[s, lvl, space.encode((q_out, c2, a2))] += ch[c, c2] * ar[a_state, a2]
    return ArmModel(MdpModel(transitions, rewards, p.discount, states=space), label)


def build_wireless_rmab(params: dict) -> RmabModel:
    p = WirelessParams.model_validate(params)
    arms = [build_wireless_arm(p, f"user{i}") for i in range(p.num_users)]
    return RmabModel(arms, p.budget)


GENERATORS = {
    "wireless_downlink": build_wireless_rmab,
}
