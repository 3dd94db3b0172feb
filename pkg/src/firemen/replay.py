"""Experience replay storage.

Two memory kinds live here. :class:`FifoMemory` is the classic ring buffer
of single transitions used by the plain and hysteretic/lenient deep
learners: a fixed capacity, oldest-first overwrite, uniform sampling with
replacement. :class:`EpisodicActionMemory` keeps whole trajectories in
per-label rings (one ring per equipment id) so a learner can curate *which
episodes* are allowed to influence its value estimates; minibatches are
drawn uniformly from the concatenation of all rings.

Observations are stored by value as uint8 {0,1} channel stacks. A
trajectory stores its observation sequence once - consecutive transitions
share the stack - which keeps large memories within RAM.

Both kinds serialise to a small versioned binary snapshot format, described
in docs/formats.md.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = ["Transition", "Trajectory", "FifoMemory", "EpisodicActionMemory"]

_MAGIC = b"FMRB"
_VERSION = 1
_KIND_FIFO = 0
_KIND_EPISODIC = 1


@dataclass
class Transition:
    """One step of experience. ``leniency`` is None unless a lenient learner
    recorded the state-action leniency at insertion time."""

    o_prev: np.ndarray
    action: int
    reward: float
    o_next: np.ndarray
    terminal: bool
    leniency: float | None = None

    def copy(self) -> "Transition":
        return Transition(
            o_prev=np.array(self.o_prev, dtype=np.uint8, copy=True),
            action=int(self.action),
            reward=float(self.reward),
            o_next=np.array(self.o_next, dtype=np.uint8, copy=True),
            terminal=bool(self.terminal),
            leniency=self.leniency,
        )


@dataclass
class Trajectory:
    """A whole episode: T+1 observations, T actions, T rewards.

    ``obs[t]`` is the observation before ``actions[t]``; the final
    observation is the one the episode ended on. ``terminal`` records
    whether the last transition ended the episode (always true for episodes
    produced by the gridworld, which terminates by extinguishing or
    timeout).
    """

    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    terminal: bool = True

    def __post_init__(self) -> None:
        t = len(self.actions)
        if len(self.rewards) != t or len(self.obs) != t + 1:
            raise ValueError(
                f"shape mismatch: {len(self.obs)} obs, {t} actions, "
                f"{len(self.rewards)} rewards"
            )
        if t == 0:
            raise ValueError("empty trajectory")

    def __len__(self) -> int:
        return len(self.actions)

    def transition(self, t: int) -> Transition:
        """Materialise step ``t`` (views, not copies)."""
        last = t == len(self) - 1
        return Transition(
            o_prev=self.obs[t],
            action=int(self.actions[t]),
            reward=float(self.rewards[t]),
            o_next=self.obs[t + 1],
            terminal=self.terminal and last,
        )

    @property
    def cumulative_reward(self) -> float:
        return math.fsum(float(r) for r in self.rewards)


class FifoMemory:
    """Fixed-capacity transition ring; oldest entries overwritten first."""

    def __init__(self, capacity: int):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self._items: list[Transition] = []
        self._next = 0

    def __len__(self) -> int:
        return len(self._items)

    def push(self, transition: Transition) -> None:
        item = transition.copy()  # stored by value
        if len(self._items) < self.capacity:
            self._items.append(item)
        else:
            self._items[self._next] = item
        self._next = (self._next + 1) % self.capacity

    def items_in_insertion_order(self) -> list[Transition]:
        """Stored transitions, oldest first (for tests and snapshots)."""
        if len(self._items) < self.capacity:
            return list(self._items)
        return self._items[self._next :] + self._items[: self._next]

    def sample(
        self, batch: int, rng: np.random.Generator
    ) -> list[Transition] | None:
        """Uniform sample with replacement; None while under-filled."""
        if len(self._items) < batch:
            return None
        idx = rng.integers(0, len(self._items), size=batch)
        return [self._items[i] for i in idx]

    # -- snapshot ----------------------------------------------------------

    def save(self, path: str | Path) -> None:
        with open(path, "wb") as f:
            f.write(_MAGIC)
            f.write(struct.pack("<HB", _VERSION, _KIND_FIFO))
            items = self.items_in_insertion_order()
            if items:
                shape = items[0].o_prev.shape
            else:
                shape = ()
            f.write(struct.pack("<QQB", self.capacity, len(items), len(shape)))
            for d in shape:
                f.write(struct.pack("<I", d))
            for t in items:
                _write_transition(f, t)

    @classmethod
    def load(cls, path: str | Path) -> "FifoMemory":
        with open(path, "rb") as f:
            _expect_header(f, _KIND_FIFO)
            capacity, count, ndim = struct.unpack("<QQB", f.read(17))
            shape = tuple(
                struct.unpack("<I", f.read(4))[0] for _ in range(ndim)
            )
            mem = cls(capacity)
            for _ in range(count):
                mem.push(_read_transition(f, shape))
        return mem


class EpisodicActionMemory:
    """Per-label rings of whole episodes, sampled as one pool.

    ``labels`` fixes the set of rings up front (the equipment ids);
    ``episodes_per_label`` is each ring's capacity in episodes. Pushing to a
    full ring evicts that ring's oldest episode. Sampling draws transitions
    uniformly with replacement from the concatenation of every ring.
    """

    def __init__(self, labels: tuple[str, ...], episodes_per_label: int):
        if episodes_per_label <= 0:
            raise ValueError("episodes_per_label must be positive")
        if len(set(labels)) != len(labels) or not labels:
            raise ValueError("labels must be non-empty and unique")
        self.labels = tuple(labels)
        self.episodes_per_label = int(episodes_per_label)
        self._rings: dict[str, list[Trajectory]] = {u: [] for u in labels}

    def episodes(self, label: str) -> list[Trajectory]:
        return list(self._rings[label])

    def episode_count(self, label: str) -> int:
        return len(self._rings[label])

    def push_episode(self, label: str, trajectory: Trajectory) -> None:
        ring = self._rings[label]
        ring.append(trajectory)
        if len(ring) > self.episodes_per_label:
            ring.pop(0)

    def total_transitions(self) -> int:
        return sum(
            len(tr) for ring in self._rings.values() for tr in ring
        )

    def sample(
        self, batch: int, rng: np.random.Generator
    ) -> list[Transition] | None:
        """Uniform over all stored transitions; None while under-filled."""
        trajs = [tr for u in self.labels for tr in self._rings[u]]
        lengths = np.array([len(tr) for tr in trajs], dtype=np.int64)
        total = int(lengths.sum())
        if total < batch:
            return None
        bounds = np.cumsum(lengths)
        flat = rng.integers(0, total, size=batch)
        which = np.searchsorted(bounds, flat, side="right")
        out = []
        for k, j in zip(which, flat):
            offset = j - (bounds[k - 1] if k > 0 else 0)
            out.append(trajs[k].transition(int(offset)))
        return out

    # -- snapshot ----------------------------------------------------------

    def save(self, path: str | Path) -> None:
        with open(path, "wb") as f:
            f.write(_MAGIC)
            f.write(struct.pack("<HB", _VERSION, _KIND_EPISODIC))
            f.write(struct.pack("<QB", self.episodes_per_label, len(self.labels)))
            for u in self.labels:
                raw = u.encode("utf-8")
                f.write(struct.pack("<B", len(raw)))
                f.write(raw)
            any_traj = next(
                (tr for u in self.labels for tr in self._rings[u]), None
            )
            shape = any_traj.obs.shape[1:] if any_traj is not None else ()
            f.write(struct.pack("<B", len(shape)))
            for d in shape:
                f.write(struct.pack("<I", d))
            for u in self.labels:
                ring = self._rings[u]
                f.write(struct.pack("<Q", len(ring)))
                for tr in ring:
                    f.write(struct.pack("<QB", len(tr), int(tr.terminal)))
                    f.write(np.ascontiguousarray(tr.obs, dtype=np.uint8).tobytes())
                    f.write(
                        np.ascontiguousarray(tr.actions, dtype=np.uint16).tobytes()
                    )
                    f.write(
                        np.ascontiguousarray(tr.rewards, dtype=np.float32).tobytes()
                    )

    @classmethod
    def load(cls, path: str | Path) -> "EpisodicActionMemory":
        with open(path, "rb") as f:
            _expect_header(f, _KIND_EPISODIC)
            per_label, n_labels = struct.unpack("<QB", f.read(9))
            labels = []
            for _ in range(n_labels):
                (ln,) = struct.unpack("<B", f.read(1))
                labels.append(f.read(ln).decode("utf-8"))
            (ndim,) = struct.unpack("<B", f.read(1))
            shape = tuple(
                struct.unpack("<I", f.read(4))[0] for _ in range(ndim)
            )
            mem = cls(tuple(labels), per_label)
            obs_size = int(np.prod(shape)) if shape else 0
            for u in labels:
                (count,) = struct.unpack("<Q", f.read(8))
                for _ in range(count):
                    t, terminal = struct.unpack("<QB", f.read(9))
                    obs = np.frombuffer(
                        f.read((t + 1) * obs_size), dtype=np.uint8
                    ).reshape((t + 1,) + shape)
                    actions = np.frombuffer(
                        f.read(t * 2), dtype=np.uint16
                    ).astype(np.int64)
                    rewards = np.frombuffer(f.read(t * 4), dtype=np.float32).copy()
                    mem.push_episode(
                        u,
                        Trajectory(
                            obs=obs.copy(),
                            actions=actions,
                            rewards=rewards,
                            terminal=bool(terminal),
                        ),
                    )
        return mem


def _write_transition(f, t: Transition) -> None:
    f.write(np.ascontiguousarray(t.o_prev, dtype=np.uint8).tobytes())
    f.write(np.ascontiguousarray(t.o_next, dtype=np.uint8).tobytes())
    has_len = t.leniency is not None
    f.write(
        struct.pack(
            "<HfBBf",
            t.action,
            t.reward,
            int(t.terminal),
            int(has_len),
            t.leniency if has_len else 0.0,
        )
    )


def _read_transition(f, shape: tuple[int, ...]) -> Transition:
    size = int(np.prod(shape)) if shape else 0
    o_prev = np.frombuffer(f.read(size), dtype=np.uint8).reshape(shape).copy()
    o_next = np.frombuffer(f.read(size), dtype=np.uint8).reshape(shape).copy()
    action, reward, terminal, has_len, leniency = struct.unpack(
        "<HfBBf", f.read(12)
    )
    return Transition(
        o_prev=o_prev,
        action=action,
        reward=reward,
        o_next=o_next,
        terminal=bool(terminal),
        leniency=float(leniency) if has_len else None,
    )


def _expect_header(f, kind: int) -> None:
    magic = f.read(4)
    if magic != _MAGIC:
        raise ValueError(f"not a replay snapshot (magic {magic!r})")
    version, got_kind = struct.unpack("<HB", f.read(3))
    if version != _VERSION:
        raise ValueError(f"unsupported snapshot version {version}")
    if got_kind != kind:
        raise ValueError(f"snapshot kind {got_kind} does not match reader")
