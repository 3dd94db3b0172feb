"""Repeated play of the catalogue games by tabular learners.

Two independent learners pick actions epsilon-greedily over their own
Q-vectors, receive one shared reward drawn from the joint-action lottery,
and update by their rule. This is the small-scale apparatus behind the
coordination pathology demonstrations: average-based learners sliding to
the shadow equilibrium, maximum-based learners seized by a single lucky
payoff, and the interval-filtered rule recovering the optimum.

Each seed is fully deterministic (its RNG streams derive from the seed
alone) and can optionally emit a JSONL trace with one record per
iteration: iteration index, joint action, sampled reward, and each
agent's post-update greedy action.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .games import TeamGame, load_catalogue, sample_reward
from .learners import ExplorationSchedule, make_tabular_learner

__all__ = [
    "RepeatedGameConfig",
    "SeedResult",
    "run_repeated_game",
    "run_one_seed",
    "worker_count",
]

UNIFORM_RANDOM = ExplorationSchedule(initial=1.0, decay=1.0, floor=1.0)


def worker_count() -> int:
    """Process pool size, from FIREMEN_WORKERS; 1 means run inline."""
    raw = os.environ.get("FIREMEN_WORKERS", "1")
    try:
        n = int(raw)
    except ValueError as e:
        raise ValueError(f"FIREMEN_WORKERS must be an integer, got {raw!r}") from e
    if n < 1:
        raise ValueError(f"FIREMEN_WORKERS must be >= 1, got {n}")
    return n


@dataclass(frozen=True)
class RepeatedGameConfig:
    """One repeated-game experiment: a game, a rule per agent, a horizon,
    seeds, and the exploration schedule shared by both agents.

    ``rule_options`` forwards per-agent keyword arguments to the learner
    factory (hysteresis strength, interval decay mode, and so on).
    """

    game: str
    rules: tuple[str, str]
    iterations: int = 50_000
    seeds: tuple[int, ...] = (0,)
    schedule: ExplorationSchedule = ExplorationSchedule(
        initial=1.0, decay=0.9995, floor=0.05
    )
    rule_options: tuple[Mapping, Mapping] = ({}, {})  # treated read-only
    trace_block: int | None = None  # iterations per frequency-trace row

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if len(set(self.seeds)) != len(self.seeds) or not self.seeds:
            raise ValueError("seeds must be non-empty and distinct")
        if len(self.rules) != 2 or len(self.rule_options) != 2:
            raise ValueError("exactly two agents play")
        if self.trace_block is not None and self.trace_block < 1:
            raise ValueError("trace_block must be >= 1")

    @property
    def block(self) -> int:
        return self.trace_block or max(1, self.iterations // 100)


@dataclass
class SeedResult:
    """Convergence record for one seed."""

    seed: int
    final_greedy: tuple[str, str]
    q_tables: tuple[np.ndarray, np.ndarray]
    action_counts: np.ndarray      # (2, n_actions) totals over the run
    frequency_trace: np.ndarray    # (blocks, 2, n_actions), rows sum to 1


def _build_learners(cfg: RepeatedGameConfig, game: TeamGame, rngs):
    return tuple(
        make_tabular_learner(
            rule,
            rng=rng,
            n_actions=game.n_actions,
            **dict(options),
        )
        for rule, options, rng in zip(cfg.rules, cfg.rule_options, rngs)
    )


def run_one_seed(
    cfg: RepeatedGameConfig,
    seed: int,
    trace_dir: str | Path | None = None,
) -> SeedResult:
    game = load_catalogue()[cfg.game]
    ss = np.random.SeedSequence(seed)
    sel1, sel2, reward_ss, gate1, gate2 = ss.spawn(5)
    select_rngs = (np.random.default_rng(sel1), np.random.default_rng(sel2))
    reward_rng = np.random.default_rng(reward_ss)
    learners = _build_learners(
        cfg, game, (np.random.default_rng(gate1), np.random.default_rng(gate2))
    )

    n = game.n_actions
    counts = np.zeros((2, n), dtype=np.int64)
    block = cfg.block
    n_blocks = -(-cfg.iterations // block)
    freq = np.zeros((n_blocks, 2, n), dtype=np.float64)

    sink = None
    if trace_dir is not None:
        trace_dir = Path(trace_dir)
        trace_dir.mkdir(parents=True, exist_ok=True)
        sink = open(trace_dir / f"{cfg.game}-seed{seed}.jsonl", "w")

    try:
        for k in range(cfg.iterations):
            eps = cfg.schedule.epsilon(k)
            a1 = learners[0].select(eps, select_rngs[0])
            a2 = learners[1].select(eps, select_rngs[1])
            r = sample_reward(game, (a1, a2), reward_rng)
            learners[0].update(a1, r)
            learners[1].update(a2, r)
            counts[0, a1] += 1
            counts[1, a2] += 1
            freq[k // block, 0, a1] += 1
            freq[k // block, 1, a2] += 1
            if sink is not None:
                sink.write(
                    json.dumps(
                        {
                            "iteration": k,
                            "joint": [game.actions[a1], game.actions[a2]],
                            "reward": r,
                            "greedy": [
                                game.actions[learners[0].greedy()],
                                game.actions[learners[1].greedy()],
                            ],
                        }
                    )
                    + "\n"
                )
    finally:
        if sink is not None:
            sink.close()

    freq /= freq.sum(axis=2, keepdims=True)
    return SeedResult(
        seed=seed,
        final_greedy=(
            game.actions[learners[0].greedy()],
            game.actions[learners[1].greedy()],
        ),
        q_tables=(learners[0].q.copy(), learners[1].q.copy()),
        action_counts=counts,
        frequency_trace=freq,
    )


def run_repeated_game(
    cfg: RepeatedGameConfig,
    trace_dir: str | Path | None = None,
    workers: int | None = None,
) -> list[SeedResult]:
    """Run every seed; results come back in the order of ``cfg.seeds``.

    ``workers`` above 1 fans seeds out over processes (each seed is
    single-threaded either way); the default comes from FIREMEN_WORKERS.
    """
    load_catalogue()[cfg.game]  # fail fast on unknown game names
    if workers is None:
        workers = worker_count()
    if workers == 1 or len(cfg.seeds) == 1:
        return [run_one_seed(cfg, s, trace_dir) for s in cfg.seeds]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(run_one_seed, cfg, s, trace_dir) for s in cfg.seeds
        ]
        return [f.result() for f in futures]
