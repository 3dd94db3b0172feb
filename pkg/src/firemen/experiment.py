"""Seeded gridworld training runs: configs, record streams, summaries, plots.

A run is described by a JSON-loadable :class:`RunConfig`: which layout and
reward table, which learner (with all hyperparameters) for each of the two
agents, how many episodes and seeds, and which metric windows and plots to
produce. :func:`run_experiment` executes every seed (optionally in a worker
pool sized by ``FIREMEN_WORKERS``), writing per seed one JSONL file of
:class:`~firemen.metrics.EpisodeRecord` lines plus any requested SVGs, and
finally one summary CSV and a metadata JSON for the whole run. Identical
configs and seeds produce byte-identical JSONL.

The coordinated-reward column of the summary excludes timeout episodes as
well as (A,B)/(B,A); the metadata file states this so downstream readers
do not have to guess.

:class:`AccessPointConfig` is the study variant that sweeps the single-fire
layouts with one to four approach corridors under the partially stochastic
reward table; it expands into one RunConfig per layout and adds a combined
plot of the per-layout (A,A) rates.

Shipped starting points live under ``data/presets/``: desk-scale configs
that finish on one CPU in minutes and full-scale ones matching the
published hyperparameters.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .games import TeamGame, load_catalogue
from .gridworld import EQUIPMENT, FiremenEnv, LayoutSpec, MOVE_DELTAS, load_layout
from .learners import (
    DDQNAgent,
    DeepConfig,
    ExplorationSchedule,
    HystereticDDQNAgent,
    IntervalConfig,
    LeniencyConfig,
    LenientDDQNAgent,
    NuiConfig,
    NuiDDQNAgent,
)
from .metrics import (
    EpisodeRecord,
    average_coordinated_reward,
    count_outcomes,
    rolling_action_distribution,
    rolling_joint_outcome_rate,
)
from .network import NetworkSpec
from .repeated_games import worker_count
from .svgplot import emit_phase_plot, line_chart

__all__ = [
    "ALGORITHMS",
    "PLOT_KINDS",
    "AgentSpec",
    "RunConfig",
    "AccessPointConfig",
    "SeedSummary",
    "ExperimentResult",
    "AccessPointResult",
    "run_config_from_mapping",
    "run_config_to_mapping",
    "load_run_config",
    "shipped_presets",
    "load_preset",
    "preflight",
    "run_experiment",
    "run_access_point_study",
    "load_records",
    "pickup_q_series",
]

ALGORITHMS = ("ddqn", "hysteretic", "lenient", "nui")
PLOT_KINDS = ("phase", "rate", "qvals")

# outcome-count columns of the summary CSV, in order
_BUCKETS = tuple(f"{a}{b}" for a in EQUIPMENT for b in EQUIPMENT) + ("timeout",)

_NAME_RE = re.compile(r"[A-Za-z0-9._-]+")


@dataclass(frozen=True)
class AgentSpec:
    """One agent's learner choice plus every knob it needs.

    Only the block matching ``algorithm`` is consulted (``beta`` for
    hysteretic, ``leniency`` for lenient, ``intervals``/``nui`` for the
    interval learner); the others keep their defaults and are ignored.
    """

    algorithm: str = "ddqn"
    alpha: float = 1e-4
    gamma: float = 0.95
    batch_size: int = 32
    replay_period: int = 4
    target_sync: int = 5000
    memory_capacity: int = 250_000
    schedule: ExplorationSchedule = ExplorationSchedule()
    beta: float = 0.9
    leniency: LeniencyConfig = LeniencyConfig()
    intervals: IntervalConfig = IntervalConfig()
    nui: NuiConfig = NuiConfig()

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(
                f"unknown algorithm {self.algorithm!r}; pick from {ALGORITHMS}"
            )

    def deep_config(self, net: NetworkSpec) -> DeepConfig:
        return DeepConfig(
            net=net,
            schedule=self.schedule,
            alpha=self.alpha,
            gamma=self.gamma,
            batch_size=self.batch_size,
            replay_period=self.replay_period,
            target_sync=self.target_sync,
            memory_capacity=self.memory_capacity,
        )

    def build(self, net: NetworkSpec, seed) -> DDQNAgent:
        cfg = self.deep_config(net)
        if self.algorithm == "ddqn":
            return DDQNAgent(cfg, seed)
        if self.algorithm == "hysteretic":
            return HystereticDDQNAgent(cfg, self.beta, seed)
        if self.algorithm == "lenient":
            return LenientDDQNAgent(cfg, self.leniency, seed)
        return NuiDDQNAgent(cfg, self.intervals, self.nui, seed)


@dataclass(frozen=True)
class RunConfig:
    """Everything one training run needs, JSON round-trippable."""

    name: str
    layout: str
    game: str
    agents: tuple[AgentSpec, AgentSpec]
    episodes: int
    seeds: tuple[int, ...]
    civilians: int = 0
    window: int = 1000
    tail: int = 1000
    rate_window: int = 100
    conv_kernels: tuple[int, int] = (32, 64)
    fc_width: int = 1024
    step_limit: int | None = None
    probe_pickup_q: bool = False
    plots: tuple[str, ...] = ()
    track_joint: tuple[str, str] | None = None

    def __post_init__(self):
        if not _NAME_RE.fullmatch(self.name):
            raise ValueError(
                "run names become file names: letters, digits, '._-' only"
            )
        if len(self.agents) != 2:
            raise ValueError("exactly two agents per run")
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")
        if not self.seeds or len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be non-empty and distinct")
        for field_name in ("window", "tail", "rate_window"):
            v = getattr(self, field_name)
            if not 1 <= v <= self.episodes:
                raise ValueError(
                    f"{field_name} must lie in [1, episodes], got {v}"
                )
        if self.civilians < 0:
            raise ValueError("civilians must be >= 0")
        if self.step_limit is not None and self.step_limit < 1:
            raise ValueError("step_limit override must be >= 1")
        unknown = set(self.plots) - set(PLOT_KINDS)
        if unknown:
            raise ValueError(f"unknown plot kinds {sorted(unknown)}")
        if "rate" in self.plots and self.track_joint is None:
            raise ValueError("the rate plot needs track_joint, e.g. ['A','A']")
        if self.track_joint is not None:
            if len(self.track_joint) != 2 or any(
                u not in EQUIPMENT for u in self.track_joint
            ):
                raise ValueError(
                    f"track_joint must be two labels from {EQUIPMENT}"
                )


@dataclass(frozen=True)
class AccessPointConfig:
    """Sweep of the single-fire layouts with 1..4 approach corridors."""

    name: str
    episodes: int
    seeds: tuple[int, ...]
    layouts: tuple[str, ...] = (
        "layout-1ap",
        "layout-2ap",
        "layout-3ap",
        "layout-4ap",
    )
    game: str = "AFG-PS-1AP"
    agent: AgentSpec = AgentSpec(algorithm="lenient")
    civilians: int = 0
    window: int = 1000
    tail: int = 1000
    rate_window: int = 100
    conv_kernels: tuple[int, int] = (32, 64)
    fc_width: int = 1024
    step_limit: int | None = None

    def __post_init__(self):
        if not self.layouts:
            raise ValueError("at least one layout required")

    def expand(self) -> tuple[RunConfig, ...]:
        """One RunConfig per layout, all tracking the (A,A) rate."""
        return tuple(
            RunConfig(
                name=f"{self.name}-{layout}",
                layout=layout,
                game=self.game,
                agents=(self.agent, self.agent),
                episodes=self.episodes,
                seeds=self.seeds,
                civilians=self.civilians,
                window=self.window,
                tail=self.tail,
                rate_window=self.rate_window,
                conv_kernels=self.conv_kernels,
                fc_width=self.fc_width,
                step_limit=self.step_limit,
                plots=("rate",),
                track_joint=("A", "A"),
            )
            for layout in self.layouts
        )


# --------------------------------------------------------------------------
# JSON codec. Strict: unknown keys are errors, so typos fail loudly.


def _check_keys(data: dict, cls, what: str) -> None:
    allowed = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - allowed
    if unknown:
        raise ValueError(f"unknown {what} keys {sorted(unknown)}")


def _agent_spec_from_mapping(data: dict) -> AgentSpec:
    _check_keys(data, AgentSpec, "agent")
    kwargs = dict(data)
    for key, cls in (
        ("schedule", ExplorationSchedule),
        ("leniency", LeniencyConfig),
        ("intervals", IntervalConfig),
        ("nui", NuiConfig),
    ):
        if key in kwargs:
            _check_keys(kwargs[key], cls, key)
            kwargs[key] = cls(**kwargs[key])
    return AgentSpec(**kwargs)


def run_config_from_mapping(data: dict) -> RunConfig:
    _check_keys(data, RunConfig, "run config")
    kwargs = dict(data)
    agents = kwargs.get("agents")
    if not isinstance(agents, (list, tuple)) or not 1 <= len(agents) <= 2:
        raise ValueError("agents must be a list of one or two agent blocks")
    specs = tuple(_agent_spec_from_mapping(a) for a in agents)
    if len(specs) == 1:  # one block configures both agents
        specs = (specs[0], specs[0])
    kwargs["agents"] = specs
    for key in ("seeds", "conv_kernels", "plots", "track_joint"):
        if kwargs.get(key) is not None:
            kwargs[key] = tuple(kwargs[key])
    return RunConfig(**kwargs)


def access_point_config_from_mapping(data: dict) -> AccessPointConfig:
    _check_keys(data, AccessPointConfig, "access-point config")
    kwargs = dict(data)
    if "agent" in kwargs:
        kwargs["agent"] = _agent_spec_from_mapping(kwargs["agent"])
    for key in ("seeds", "layouts", "conv_kernels"):
        if kwargs.get(key) is not None:
            kwargs[key] = tuple(kwargs[key])
    return AccessPointConfig(**kwargs)


def run_config_to_mapping(cfg: RunConfig | AccessPointConfig) -> dict:
    return dataclasses.asdict(cfg)


def load_run_config(path: str | Path) -> RunConfig | AccessPointConfig:
    """Load a config file; the presence of 'layouts' marks a sweep."""
    data = json.loads(Path(path).read_text())
    if "layouts" in data:
        return access_point_config_from_mapping(data)
    return run_config_from_mapping(data)


def shipped_presets() -> list[str]:
    base = resources.files("firemen") / "data" / "presets"
    return sorted(
        p.name[: -len(".json")]
        for p in base.iterdir()
        if p.name.endswith(".json")
    )


def load_preset(name: str) -> RunConfig | AccessPointConfig:
    candidate = resources.files("firemen") / "data" / "presets" / f"{name}.json"
    try:
        data = json.loads(candidate.read_text())
    except FileNotFoundError:
        raise FileNotFoundError(
            f"no shipped preset {name!r}; have {shipped_presets()}"
        ) from None
    if "layouts" in data:
        return access_point_config_from_mapping(data)
    return run_config_from_mapping(data)


# --------------------------------------------------------------------------
# execution


def preflight(cfg: RunConfig) -> tuple[LayoutSpec, TeamGame, NetworkSpec]:
    """Resolve and validate everything a run needs before any work starts."""
    layout = load_layout(cfg.layout)
    if cfg.step_limit is not None:
        layout = dataclasses.replace(layout, step_limit=cfg.step_limit)
    game = load_catalogue()[cfg.game]
    c, h, w = layout.obs_shape
    net = NetworkSpec(
        in_channels=c,
        in_height=h,
        in_width=w,
        conv_kernels=cfg.conv_kernels,
        fc_width=cfg.fc_width,
        n_actions=FiremenEnv.n_actions,
    )
    return layout, game, net


@dataclass
class SeedSummary:
    """One seed's results; ``status`` is 'ok' or 'failed: <reason>'."""

    seed: int
    status: str
    episodes: int = 0
    outcomes: dict = dataclasses.field(default_factory=dict)
    final_points: tuple = (None, None)
    rc: float | None = None
    rc_available: int = 0
    jsonl: str = ""
    svgs: tuple[str, ...] = ()


@dataclass
class ExperimentResult:
    config: RunConfig
    summaries: tuple[SeedSummary, ...]
    csv_path: Path
    meta_path: Path

    @property
    def failed_seeds(self) -> tuple[int, ...]:
        return tuple(s.seed for s in self.summaries if s.status != "ok")


def _pickup_probe(agent, o_prev, position, layout: LayoutSpec):
    """Q-values of the moves onto each equipment kind, None if not adjacent."""
    q = agent.q_values(o_prev)
    out = []
    for u in EQUIPMENT:
        cells = layout.equipment[u]
        val = None
        for a, (dr, dc) in enumerate(MOVE_DELTAS[:4]):
            if (position[0] + dr, position[1] + dc) in cells:
                val = float(q[a])
                break
        out.append(val)
    return tuple(out)


def _play_episode(env, agents, cfg: RunConfig, run_id: str, episode: int):
    obs = list(env.reset())
    for agent in agents:
        agent.begin_episode(episode)
    eps = agents[0].exploration_rate(obs[0])
    pickup_q: list[tuple | None] = [None, None]
    prev_holdings = env.holdings
    while True:
        positions = env.positions
        acts = [agent.act(o) for agent, o in zip(agents, obs)]
        result = env.step(acts[0], acts[1])
        if cfg.probe_pickup_q:
            holdings = env.holdings
            for i in (0, 1):
                if prev_holdings[i] is None and holdings[i] is not None:
                    # probe before observe(): the net is still the acting net
                    pickup_q[i] = _pickup_probe(
                        agents[i], obs[i], positions[i], env.layout
                    )
            prev_holdings = holdings
        for i in (0, 1):
            agents[i].observe(
                obs[i], acts[i], result.rewards[i], result.obs[i],
                result.terminal,
            )
        obs = list(result.obs)
        if result.terminal:
            break
    summaries = [agent.end_episode() for agent in agents]
    return EpisodeRecord(
        run_id=run_id,
        episode=episode,
        labels=env.holdings,
        kind="timeout" if result.outcome == "timeout" else "extinguished",
        reward=summaries[0].cumulative_reward,
        steps=env.steps,
        epsilon=eps,
        intervals=(summaries[0].intervals, summaries[1].intervals),
        pickup_q=(pickup_q[0], pickup_q[1]),
    )


def pickup_q_series(
    records: Sequence[EpisodeRecord], agent: int, episodes: int
) -> dict[str, np.ndarray]:
    """Per-equipment series of probed pickup Q-values, NaN where absent."""
    series = {u: np.full(episodes, np.nan) for u in EQUIPMENT}
    for rec in records:
        probe = rec.pickup_q[agent]
        if probe is None:
            continue
        for u, value in zip(EQUIPMENT, probe):
            if value is not None:
                series[u][rec.episode] = value
    return {f"equipment {u}": v for u, v in series.items()}


def _emit_plots(cfg, run_id, out_dir, records, dist) -> tuple[str, ...]:
    paths = []
    if "phase" in cfg.plots:
        p = out_dir / f"{run_id}-phase.svg"
        emit_phase_plot(dist.points, p, title=run_id)
        paths.append(str(p))
    if "rate" in cfg.plots:
        rate = rolling_joint_outcome_rate(
            records, cfg.track_joint, cfg.rate_window
        )
        u1, u2 = cfg.track_joint
        p = out_dir / f"{run_id}-rate.svg"
        p.write_text(
            line_chart(
                {f"({u1},{u2})": rate},
                y_range=(0.0, 1.0),
                title=run_id,
                x_label="episode window",
                y_label="fraction of window",
            )
        )
        paths.append(str(p))
    if "qvals" in cfg.plots:
        series = pickup_q_series(records, agent=0, episodes=cfg.episodes)
        if any(np.isfinite(v).any() for v in series.values()):
            p = out_dir / f"{run_id}-qvals.svg"
            p.write_text(
                line_chart(
                    series,
                    title=f"{run_id} pickup Q-values (agent 1)",
                    y_label="Q at pickup",
                )
            )
            paths.append(str(p))
    return tuple(paths)


def _play_seed(cfg: RunConfig, seed: int, out_dir: Path) -> SeedSummary:
    layout, game, net = preflight(cfg)
    env_ss, a0_ss, a1_ss = np.random.SeedSequence(seed).spawn(3)
    env = FiremenEnv(
        layout, game, cfg.civilians, np.random.default_rng(env_ss)
    )
    agents = [
        spec.build(net, ss) for spec, ss in zip(cfg.agents, (a0_ss, a1_ss))
    ]
    run_id = f"{cfg.name}-seed{seed}"
    jsonl = out_dir / f"{run_id}.jsonl"
    records = []
    with jsonl.open("w") as sink:
        for episode in range(cfg.episodes):
            rec = _play_episode(env, agents, cfg, run_id, episode)
            sink.write(rec.to_json() + "\n")
            records.append(rec)

    dist = rolling_action_distribution(records, cfg.window)
    finals = []
    for i in (0, 1):
        point = dist.final_point(i)
        finals.append(
            tuple(float(x) for x in point) if np.isfinite(point).all() else None
        )
    rc = average_coordinated_reward(records, cfg.tail)
    return SeedSummary(
        seed=seed,
        status="ok",
        episodes=cfg.episodes,
        outcomes=count_outcomes(records),
        final_points=tuple(finals),
        rc=rc.value if rc.defined else None,
        rc_available=rc.available,
        jsonl=str(jsonl),
        svgs=_emit_plots(cfg, run_id, out_dir, records, dist),
    )


def _run_seed(cfg: RunConfig, seed: int, out_dir: str) -> SeedSummary:
    """Worker entry point; a failure aborts this seed only."""
    try:
        return _play_seed(cfg, seed, Path(out_dir))
    except Exception as exc:
        return SeedSummary(
            seed=seed, status=f"failed: {type(exc).__name__}: {exc}"
        )


_CSV_COLUMNS = (
    ("seed", "status", "episodes")
    + _BUCKETS
    + tuple(f"agent{i}_{u}" for i in (1, 2) for u in EQUIPMENT)
    + ("coordinated_reward", "coordinated_count")
)


def _write_summary_csv(path: Path, summaries: Sequence[SeedSummary]) -> None:
    with path.open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(_CSV_COLUMNS)
        for s in summaries:
            row = [s.seed, s.status, s.episodes]
            row += [s.outcomes.get(b, 0) for b in _BUCKETS]
            for point in s.final_points:
                row += list(point) if point is not None else ["", "", ""]
            row += [s.rc if s.rc is not None else "", s.rc_available]
            writer.writerow(row)


def _write_meta(path: Path, cfg: RunConfig) -> None:
    meta = {
        "name": cfg.name,
        "config": run_config_to_mapping(cfg),
        "coordinated_reward_excludes": ["AB", "BA", "timeout"],
        "formats": {"records": "episode-jsonl/1", "summary": "run-csv/1"},
    }
    path.write_text(json.dumps(meta, indent=2) + "\n")


def run_experiment(
    cfg: RunConfig,
    out_dir: str | Path,
    workers: int | None = None,
) -> ExperimentResult:
    """Execute every seed of one run config and write its artifacts."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    preflight(cfg)  # fail before any worker starts on a broken config
    if workers is None:
        workers = worker_count()
    if workers <= 1 or len(cfg.seeds) == 1:
        summaries = [_run_seed(cfg, s, str(out_dir)) for s in cfg.seeds]
    else:
        with ProcessPoolExecutor(
            max_workers=min(workers, len(cfg.seeds))
        ) as pool:
            futures = {
                s: pool.submit(_run_seed, cfg, s, str(out_dir))
                for s in cfg.seeds
            }
            summaries = [futures[s].result() for s in cfg.seeds]
    csv_path = out_dir / f"{cfg.name}-summary.csv"
    meta_path = out_dir / f"{cfg.name}-meta.json"
    _write_summary_csv(csv_path, summaries)
    _write_meta(meta_path, cfg)
    return ExperimentResult(cfg, tuple(summaries), csv_path, meta_path)


def load_records(path: str | Path) -> list[EpisodeRecord]:
    """Read one JSONL record stream back into memory."""
    with Path(path).open() as f:
        return [EpisodeRecord.from_json(line) for line in f if line.strip()]


@dataclass
class AccessPointResult:
    config: AccessPointConfig
    results: tuple[ExperimentResult, ...]
    combined_svg: Path | None


def run_access_point_study(
    cfg: AccessPointConfig,
    out_dir: str | Path,
    workers: int | None = None,
) -> AccessPointResult:
    """Run the corridor sweep and overlay the per-layout (A,A) rates."""
    out_dir = Path(out_dir)
    results = tuple(
        run_experiment(run_cfg, out_dir, workers) for run_cfg in cfg.expand()
    )

    series: dict[str, np.ndarray] = {}
    for run_cfg, result in zip(cfg.expand(), results):
        curves = []
        for summary in result.summaries:
            if summary.status != "ok":
                continue
            records = load_records(summary.jsonl)
            curves.append(
                rolling_joint_outcome_rate(
                    records, ("A", "A"), cfg.rate_window
                )
            )
        if curves:
            series[run_cfg.layout] = np.mean(curves, axis=0)

    combined = None
    if series:
        combined = out_dir / f"{cfg.name}-access-points.svg"
        combined.write_text(
            line_chart(
                series,
                y_range=(0.0, 1.0),
                title=f"{cfg.name}: (A,A) rate by fire access",
                x_label="episode window",
                y_label="(A,A) fraction",
            )
        )
    return AccessPointResult(cfg, results, combined)
