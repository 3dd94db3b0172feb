"""Episode records and the summary metrics computed over them.

A training run is analysed purely through its stream of
:class:`EpisodeRecord` rows, one per episode, so every metric here works
identically on live runs and on records read back from disk. The three
workhorses:

- :func:`rolling_action_distribution` tracks each agent's commitment mix
  as points on the 3-simplex over a sliding window (the phase-plot data),
- :func:`average_coordinated_reward` scores a run by the mean return of
  its final coordinated episodes, skipping the defined miscoordination
  outcomes,
- :func:`rolling_joint_outcome_rate` tracks how often a window ends in one
  particular joint commitment (the access-point comparison curves).

Miscoordination is exactly the pair set {(A,B), (B,A)} plus timeouts;
other mixed pairs are merely suboptimal coordination and stay in scope
for reward averaging.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .oracle import ACTION_LABELS

__all__ = [
    "EpisodeRecord",
    "MISCOORDINATION_PAIRS",
    "is_miscoordination",
    "outcome_bucket",
    "count_outcomes",
    "RollingDistribution",
    "rolling_action_distribution",
    "CoordinatedReward",
    "average_coordinated_reward",
    "rolling_joint_outcome_rate",
]

MISCOORDINATION_PAIRS = (("A", "B"), ("B", "A"))

_KINDS = ("extinguished", "timeout")


@dataclass(frozen=True)
class EpisodeRecord:
    """One finished episode, as seen from outside the learners.

    ``labels`` are the agents' final equipment commitments (None when an
    agent never picked anything up, possible only in timeouts).
    ``intervals`` and ``pickup_q`` are per-agent diagnostic payloads and
    stay None for runs that do not produce them. A pickup_q entry is one
    value per equipment kind (A, B, C order): the Q-value of the action
    leading onto that kind's cell from the pre-pickup observation, None
    for kinds not one step away.
    """

    run_id: str
    episode: int
    labels: tuple[str | None, str | None]
    kind: str
    reward: float
    steps: int
    epsilon: float
    intervals: tuple[dict | None, dict | None] = (None, None)
    pickup_q: tuple[
        tuple[float | None, ...] | None, tuple[float | None, ...] | None
    ] = (None, None)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown outcome kind {self.kind!r}")
        if len(self.labels) != 2:
            raise ValueError("exactly two agents per episode")
        for u in self.labels:
            if u is not None and u not in ACTION_LABELS:
                raise ValueError(f"unknown label {u!r}")
        if self.kind == "extinguished" and None in self.labels:
            raise ValueError("extinguishing requires both agents equipped")
        if self.episode < 0 or self.steps < 1:
            raise ValueError("episode must be >= 0 and steps >= 1")
        if not math.isfinite(self.reward):
            raise ValueError("reward must be finite")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")

    def to_json(self) -> str:
        payload = {
            "run_id": self.run_id,
            "episode": self.episode,
            "labels": list(self.labels),
            "kind": self.kind,
            "reward": self.reward,
            "steps": self.steps,
            "epsilon": self.epsilon,
            "intervals": [
                i if i is not None else None for i in self.intervals
            ],
            "pickup_q": [
                list(q) if q is not None else None for q in self.pickup_q
            ],
        }
        return json.dumps(payload, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> "EpisodeRecord":
        d = json.loads(line)
        return cls(
            run_id=d["run_id"],
            episode=d["episode"],
            labels=tuple(d["labels"]),
            kind=d["kind"],
            reward=d["reward"],
            steps=d["steps"],
            epsilon=d["epsilon"],
            intervals=tuple(d["intervals"]),
            pickup_q=tuple(
                tuple(q) if q is not None else None for q in d["pickup_q"]
            ),
        )


def is_miscoordination(record: EpisodeRecord) -> bool:
    """Timeouts and the punishing (A,B)/(B,A) pair are miscoordination;
    every other extinguish outcome counts as (possibly poor) coordination."""
    return record.kind == "timeout" or record.labels in MISCOORDINATION_PAIRS


def outcome_bucket(record: EpisodeRecord) -> str:
    """The single bucket an episode falls into: "timeout" or the ordered
    commitment pair, e.g. "AA" or "BC"."""
    if record.kind == "timeout":
        return "timeout"
    return "".join(record.labels)


def count_outcomes(records: Iterable[EpisodeRecord]) -> dict[str, int]:
    counts: dict[str, int] = {}
    for rec in records:
        b = outcome_bucket(rec)
        counts[b] = counts.get(b, 0) + 1
    return counts


# --------------------------------------------------------------------------


_CODE = {u: k for k, u in enumerate(ACTION_LABELS)}


@dataclass(frozen=True)
class RollingDistribution:
    """Sliding-window commitment mix.

    ``points[p, agent]`` is a 3-simplex point (fractions of A/B/C among
    that agent's classified episodes in window ``p``); a window with no
    classified episodes for an agent yields a NaN row. ``unclassified``
    counts the excluded episodes per window and agent.
    """

    window: int
    points: np.ndarray        # (positions, 2, 3) float64
    unclassified: np.ndarray  # (positions, 2) int64

    def final_point(self, agent: int) -> np.ndarray:
        return self.points[-1, agent]


def rolling_action_distribution(
    records: Sequence[EpisodeRecord], window: int = 1000
) -> RollingDistribution:
    n = len(records)
    if window < 1:
        raise ValueError("window must be >= 1")
    if window > n:
        raise ValueError(f"window {window} exceeds the {n} records given")
    onehot = np.zeros((2, n, 3), dtype=np.float64)
    for i, rec in enumerate(records):
        for agent in (0, 1):
            u = rec.labels[agent]
            if u is not None:
                onehot[agent, i, _CODE[u]] = 1.0
    csum = np.zeros((2, n + 1, 3), dtype=np.float64)
    np.cumsum(onehot, axis=1, out=csum[:, 1:, :])
    wcount = csum[:, window:, :] - csum[:, :-window, :]  # (2, P, 3)
    classified = wcount.sum(axis=2)
    points = np.full_like(wcount, np.nan)
    np.divide(
        wcount, classified[:, :, None], out=points,
        where=classified[:, :, None] > 0,
    )
    unclassified = (window - classified).astype(np.int64)
    return RollingDistribution(
        window=window,
        points=points.transpose(1, 0, 2),
        unclassified=unclassified.T,
    )


@dataclass(frozen=True)
class CoordinatedReward:
    """Mean return over the final coordinated episodes; ``value`` is None
    when fewer than ``requested`` coordinated episodes exist, with
    ``available`` saying how many there were."""

    value: float | None
    requested: int
    available: int

    @property
    def defined(self) -> bool:
        return self.value is not None


def average_coordinated_reward(
    records: Sequence[EpisodeRecord], tail: int = 1000
) -> CoordinatedReward:
    if tail < 1:
        raise ValueError("tail must be >= 1")
    rewards: list[float] = []
    for rec in reversed(records):
        if not is_miscoordination(rec):
            rewards.append(rec.reward)
            if len(rewards) == tail:
                break
    if len(rewards) < tail:
        return CoordinatedReward(None, tail, len(rewards))
    return CoordinatedReward(math.fsum(rewards) / tail, tail, tail)


def rolling_joint_outcome_rate(
    records: Sequence[EpisodeRecord],
    ja: tuple[str, str],
    window: int = 100,
) -> np.ndarray:
    """Fraction of episodes per window position ending in exactly the
    joint commitment ``ja`` (timeouts never match). Fewer records than
    the window yields an empty sequence."""
    ja = tuple(ja)
    if len(ja) != 2 or any(u not in ACTION_LABELS for u in ja):
        raise ValueError(f"invalid joint action {ja!r}")
    if window < 1:
        raise ValueError("window must be >= 1")
    n = len(records)
    if window > n:
        return np.empty(0, dtype=np.float64)
    hits = np.array(
        [
            1.0 if rec.kind == "extinguished" and rec.labels == ja else 0.0
            for rec in records
        ],
        dtype=np.float64,
    )
    csum = np.concatenate(([0.0], np.cumsum(hits)))
    return (csum[window:] - csum[:-window]) / window
