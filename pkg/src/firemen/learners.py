"""Independent learners.

Deep variants share one Double-DQN core (online/target nets, FIFO replay,
Adam on the weighted squared Bellman residual) and differ only in how they
weight or filter experience:

- ``DDQNAgent``: the plain baseline.
- ``HystereticDDQNAgent``: negative residuals are scaled by beta < 1, so
  value decreases land softly while increases land at full strength.
- ``LenientDDQNAgent``: negative updates pass a random gate that opens as
  the (observation, action) temperature cools; exploration is
  temperature-greedy rather than epsilon-greedy.
- ``NuiDDQNAgent``: stores whole episodes into per-equipment rings, but
  only when the episode return clears the action's negative-update
  interval; updates themselves are plain uniform-weight DDQN.

Tabular counterparts of the same ideas act on a single-state Q-vector for
repeated strategic-form games; ``make_tabular_learner`` builds them by rule
name.

Every agent draws from its own named RNG streams (init / action / sample /
gate), spawned from one seed, so exactness claims hold: a hysteretic agent
with beta=1 and a lenient agent with all temperatures at zero reproduce the
baseline's parameter trajectory bit for bit under a shared seed.
"""

from __future__ import annotations

import hashlib
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .gridworld import mask_civilians
from .network import (
    Adam,
    NetworkSpec,
    forward,
    init_parameters,
    optimize_batch,
    sync_target,
)
from .oracle import ACTION_LABELS, classify
from .replay import EpisodicActionMemory, FifoMemory, Transition, Trajectory

__all__ = [
    "ExplorationSchedule",
    "epsilon_greedy",
    "hysteretic_weight",
    "leniency_value",
    "lenient_weights",
    "LeniencyConfig",
    "TemperatureTable",
    "IntervalConfig",
    "NegativeUpdateIntervals",
    "NuiConfig",
    "DeepConfig",
    "DDQNAgent",
    "HystereticDDQNAgent",
    "LenientDDQNAgent",
    "NuiDDQNAgent",
    "EpisodeSummary",
    "TabularLearner",
    "AverageLearner",
    "MaximumLearner",
    "HystereticLearner",
    "LenientLearner",
    "NuiLearner",
    "make_tabular_learner",
    "TABULAR_RULES",
]


# --------------------------------------------------------------------------
# exploration


@dataclass(frozen=True)
class ExplorationSchedule:
    """Per-episode epsilon decay with a floor.

    epsilon(k) is computed as a power of the episode index, not by repeated
    multiplication, so schedules are exact: max(floor, initial * decay**k).
    """

    initial: float = 1.0
    decay: float = 0.999
    floor: float = 0.05

    def __post_init__(self):
        if not 0.0 <= self.floor <= self.initial <= 1.0:
            raise ValueError("need 0 <= floor <= initial <= 1")
        if not 0.0 < self.decay <= 1.0:
            raise ValueError("decay must be in (0, 1]")

    def epsilon(self, episode: int) -> float:
        if episode < 0:
            raise ValueError("episode index must be >= 0")
        return max(self.floor, self.initial * self.decay**episode)


def epsilon_greedy(
    qvec: np.ndarray, epsilon: float, rng: np.random.Generator
) -> int:
    """Uniform action with probability epsilon, else lowest-index argmax."""
    if rng.random() < epsilon:
        return int(rng.integers(len(qvec)))
    return int(np.argmax(qvec))


# --------------------------------------------------------------------------
# hysteresis


def hysteretic_weight(delta, beta: float):
    """Per-sample weight: 1 on positive residuals, beta otherwise.

    delta == 0 takes the beta branch. Works on scalars and arrays.
    """
    return np.where(np.asarray(delta) > 0, 1.0, beta)


# --------------------------------------------------------------------------
# leniency


@dataclass(frozen=True)
class LeniencyConfig:
    moderation: float = 1.0        # K in the leniency map 1 - exp(-K*T)
    rho: float = -0.1              # retroactive decay shape
    d: float = 0.95                # strongest per-episode decay factor
    max_temperature: float = 1.0   # initial global ceiling
    mu: float = 0.9998             # per-episode ceiling decay
    exponent: float = 0.25         # temperature-greedy exploration power

    def __post_init__(self):
        if self.moderation <= 0 or self.exponent <= 0:
            raise ValueError("moderation and exponent must be positive")
        if not 0 < self.d <= 1 or not 0 < self.mu <= 1:
            raise ValueError("d and mu must be in (0, 1]")
        if self.rho >= 0:
            raise ValueError("rho must be negative (decay fades into the past)")
        if self.max_temperature <= 0:
            raise ValueError("max_temperature must be positive")


def leniency_value(temperature: float, moderation: float) -> float:
    """l = 1 - exp(-K*T): 0 at zero temperature, toward 1 when hot."""
    if temperature < 0 or moderation <= 0:
        raise ValueError("need temperature >= 0 and moderation > 0")
    return 1.0 - math.exp(-moderation * temperature)


def lenient_weights(
    delta: np.ndarray, leniencies: np.ndarray, chi: np.ndarray
) -> np.ndarray:
    """Gate per-sample updates: positives always pass; negatives pass when
    the uniform draw chi exceeds the stored leniency.

    Zero leniency passes unconditionally (not merely with probability 1),
    which makes the all-temperatures-zero reduction to baseline exact.
    """
    delta = np.asarray(delta)
    keep = (delta > 0) | (leniencies <= 0) | (chi > leniencies)
    return keep.astype(np.float64)


class TemperatureTable:
    """Per-(observation, action) temperatures behind a 64-bit key.

    Keys hash the civilian-masked observation bytes plus the action index,
    so civilian positions never split otherwise-identical situations.
    Unseen pairs sit at the current ceiling nu; stored temperatures are
    clipped to nu whenever it decays, keeping the table invariant
    T <= nu <= nu0 true at every read.
    """

    def __init__(self, cfg: LeniencyConfig = LeniencyConfig()):
        self.cfg = cfg
        self.nu0 = cfg.max_temperature
        self.nu = cfg.max_temperature
        self._t: dict[bytes, float] = {}

    def __len__(self) -> int:
        return len(self._t)

    @staticmethod
    def key(obs: np.ndarray, action: int) -> bytes:
        h = hashlib.blake2b(digest_size=8)
        h.update(mask_civilians(obs).tobytes())
        h.update(bytes([action]))
        return h.digest()

    def keys_for_observation(self, obs: np.ndarray, n_actions: int) -> list[bytes]:
        base = hashlib.blake2b(digest_size=8)
        base.update(mask_civilians(obs).tobytes())
        out = []
        for a in range(n_actions):
            h = base.copy()
            h.update(bytes([a]))
            out.append(h.digest())
        return out

    def temperature(self, key: bytes) -> float:
        return min(self._t.get(key, self.nu), self.nu)

    def leniency(self, key: bytes) -> float:
        return leniency_value(self.temperature(key), self.cfg.moderation)

    def mean_state_temperature(self, obs: np.ndarray, n_actions: int) -> float:
        keys = self.keys_for_observation(obs, n_actions)
        return math.fsum(self.temperature(k) for k in keys) / n_actions

    def explore_probability(self, obs: np.ndarray, n_actions: int) -> float:
        return (self.mean_state_temperature(obs, n_actions) / self.nu0) ** self.cfg.exponent

    def tds_decay_episode(self, visited: list[bytes]) -> None:
        """Retroactive decay over the episode's visit sequence.

        The k-th pair counting back from the episode end cools by
        phi(k) = 1 - (1-d)*exp(rho*k): the final visit cools hardest
        (phi = d), early visits barely at all. Afterwards the global
        ceiling decays by mu and every stored temperature is clipped to it.
        """
        one_minus_d = 1.0 - self.cfg.d
        for k, key in enumerate(reversed(visited)):
            phi = 1.0 - one_minus_d * math.exp(self.cfg.rho * k)
            self._t[key] = self.temperature(key) * phi
        self.nu *= self.cfg.mu
        for key, t in self._t.items():
            if t > self.nu:
                self._t[key] = self.nu


def temperature_greedy_action(
    qvec: np.ndarray,
    table: TemperatureTable,
    obs: np.ndarray,
    rng: np.random.Generator,
) -> int:
    """Explore uniformly with probability (mean state temperature / nu0)
    raised to the configured exponent; otherwise act greedily."""
    p = table.explore_probability(obs, len(qvec))
    if rng.random() < p:
        return int(rng.integers(len(qvec)))
    return int(np.argmax(qvec))


# --------------------------------------------------------------------------
# negative update intervals


@dataclass(frozen=True)
class IntervalConfig:
    window: int = 100              # R^u ring size
    decay_mode: str = "multiplicative"
    decay_rate: float = 0.995      # multiplicative shrink toward 0
    decay_step: float = 0.02       # additive step, for scales that must cross 0
    slack: float = 0.05            # near-max tolerance enabling decay
    decay_threshold: int = 50      # R^u entries required before decay starts

    def __post_init__(self):
        if self.decay_mode not in ("multiplicative", "additive"):
            raise ValueError(f"unknown decay_mode {self.decay_mode!r}")
        if not 0 < self.decay_rate < 1:
            raise ValueError("decay_rate must be in (0, 1)")
        if self.decay_step <= 0:
            raise ValueError("decay_step must be positive")
        if self.window < 1 or self.decay_threshold < 1:
            raise ValueError("window and decay_threshold must be >= 1")
        if self.slack < 0:
            raise ValueError("slack must be >= 0")


class NegativeUpdateIntervals:
    """Per-action return intervals [r_min, r_max] with a sliding window.

    An episode return is admitted for storage when it clears both the
    interval floor and the window's mean minus standard deviation. The
    floor decays only while returns keep landing near the ceiling, and
    only once the window is reasonably full, so one-off flukes neither
    collapse nor freeze the interval.
    """

    def __init__(self, labels: tuple[str, ...], cfg: IntervalConfig = IntervalConfig()):
        if len(set(labels)) != len(labels) or not labels:
            raise ValueError("labels must be non-empty and unique")
        self.labels = tuple(labels)
        self.cfg = cfg
        self._window: dict[str, deque[float]] = {
            u: deque(maxlen=cfg.window) for u in labels
        }
        self._min: dict[str, float | None] = {u: None for u in labels}
        self._max: dict[str, float | None] = {u: None for u in labels}

    def initialized(self, u: str) -> bool:
        return self._min[u] is not None

    def initialize(self, u: str, value: float) -> None:
        """Seed both bounds with the best return seen while exploring."""
        if u not in self._min:
            raise KeyError(f"unknown action {u!r}")
        self._min[u] = float(value)
        self._max[u] = float(value)

    def bounds(self, u: str) -> tuple[float, float]:
        if not self.initialized(u):
            raise RuntimeError(f"interval for {u!r} not initialized")
        return self._min[u], self._max[u]

    def _decayed(self, value: float) -> float:
        if self.cfg.decay_mode == "multiplicative":
            return self.cfg.decay_rate * value
        return value - self.cfg.decay_step

    def update(self, u: str, r_tau: float) -> bool:
        """Record a return for action u; True means "store the episode".

        Order matters and is part of the contract: the return joins the
        window and may raise the ceiling before the storage test runs, so
        a fresh maximum is always stored; the floor decay test runs last
        against the updated ceiling.
        """
        if u not in self._min:
            raise KeyError(f"unknown action {u!r}")
        if not self.initialized(u):
            raise RuntimeError(
                f"interval for {u!r} must be initialized before updates"
            )
        r_tau = float(r_tau)
        window = self._window[u]
        window.append(r_tau)
        if r_tau > self._max[u]:
            self._max[u] = r_tau

        arr = np.asarray(window, dtype=np.float64)
        store = r_tau >= max(self._min[u], float(arr.mean() - arr.std()))

        if (
            r_tau >= self._max[u] - self.cfg.slack
            and len(window) >= self.cfg.decay_threshold
        ):
            # the clamp only matters in degenerate all-negative regimes,
            # where a multiplicative shrink toward zero would move the
            # floor up past the ceiling
            self._min[u] = min(self._decayed(self._min[u]), self._max[u])
        return store

    def snapshot(self) -> dict[str, dict[str, float | int | None]]:
        return {
            u: {
                "min": self._min[u],
                "max": self._max[u],
                "window": len(self._window[u]),
            }
            for u in self.labels
        }


# --------------------------------------------------------------------------
# deep agents


@dataclass(frozen=True)
class DeepConfig:
    net: NetworkSpec
    schedule: ExplorationSchedule = ExplorationSchedule()
    alpha: float = 0.0001
    gamma: float = 0.95
    batch_size: int = 32
    replay_period: int = 4        # optimize every K observed transitions
    target_sync: int = 5000       # target refresh period, in transitions
    memory_capacity: int = 250_000

    def __post_init__(self):
        if not 0 <= self.gamma <= 1:
            raise ValueError("gamma must be in [0, 1]")
        if min(self.batch_size, self.replay_period, self.target_sync,
               self.memory_capacity) < 1:
            raise ValueError("batch/replay/sync/capacity must be >= 1")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")


@dataclass
class EpisodeSummary:
    label: str | None = None
    cumulative_reward: float = 0.0
    stored: bool | None = None     # NUI storage decision; None elsewhere
    exploring: bool = False        # NUI random-exploration phase flag
    intervals: dict | None = None  # NUI interval snapshot


class DDQNAgent:
    """Baseline Double-DQN independent learner."""

    kind = "ddqn"

    def __init__(self, cfg: DeepConfig, seed: int | np.random.SeedSequence):
        self.cfg = cfg
        ss = (
            seed
            if isinstance(seed, np.random.SeedSequence)
            else np.random.SeedSequence(seed)
        )
        # stream order is a compatibility contract; changing it changes runs
        init_ss, act_ss, sample_ss, gate_ss = ss.spawn(4)
        self.online = init_parameters(cfg.net, np.random.default_rng(init_ss))
        self.target = self.online.copy()
        self.opt = Adam(cfg.net.n_parameters, alpha=cfg.alpha)
        self.action_rng = np.random.default_rng(act_ss)
        self.sample_rng = np.random.default_rng(sample_ss)
        self.gate_rng = np.random.default_rng(gate_ss)
        self.memory = FifoMemory(cfg.memory_capacity)
        self.epsilon = cfg.schedule.epsilon(0)
        self.steps = 0
        self.episode = 0
        self.optimize_count = 0
        self.last_loss: float | None = None
        self._ep_rewards: list[float] = []

    # -- policy ------------------------------------------------------------

    def q_values(self, obs: np.ndarray) -> np.ndarray:
        return forward(self.online, obs[None])[0]

    def act(self, obs: np.ndarray) -> int:
        return epsilon_greedy(self.q_values(obs), self.epsilon, self.action_rng)

    def exploration_rate(self, obs: np.ndarray) -> float:
        """Probability of acting randomly from this observation right now."""
        return self.epsilon

    # -- lifecycle ---------------------------------------------------------

    def begin_episode(self, episode: int) -> None:
        self.episode = episode
        self.epsilon = self.cfg.schedule.epsilon(episode)
        self._ep_rewards = []

    def observe(
        self,
        o_prev: np.ndarray,
        action: int,
        reward: float,
        o_next: np.ndarray,
        terminal: bool,
    ) -> None:
        self._store(self._transition(o_prev, action, reward, o_next, terminal))
        self._ep_rewards.append(float(reward))
        self.steps += 1
        if self.steps % self.cfg.replay_period == 0:
            self._optimize()
        if self.steps % self.cfg.target_sync == 0:
            sync_target(self.online, self.target)

    def end_episode(self) -> EpisodeSummary:
        return EpisodeSummary(cumulative_reward=math.fsum(self._ep_rewards))

    # -- internals / subtype hooks -----------------------------------------

    def _transition(self, o_prev, action, reward, o_next, terminal) -> Transition:
        return Transition(
            o_prev=o_prev, action=action, reward=reward,
            o_next=o_next, terminal=terminal,
        )

    def _store(self, transition: Transition) -> None:
        self.memory.push(transition)

    def _weight_fn(self):
        return None  # uniform weights

    def _optimize(self) -> None:
        batch = self.memory.sample(self.cfg.batch_size, self.sample_rng)
        if batch is None:
            return
        loss, _, _ = optimize_batch(
            self.online, self.target, self.opt, batch,
            self.cfg.gamma, weight_fn=self._weight_fn(),
        )
        self.last_loss = loss
        self.optimize_count += 1


class HystereticDDQNAgent(DDQNAgent):
    """DDQN with damped negative updates: weight beta on delta <= 0."""

    kind = "hysteretic"

    def __init__(self, cfg: DeepConfig, beta: float, seed):
        if not 0 < beta <= 1:
            raise ValueError("beta must be in (0, 1] (fraction of alpha)")
        super().__init__(cfg, seed)
        self.beta = float(beta)

    def _weight_fn(self):
        beta = self.beta
        return lambda delta, batch: hysteretic_weight(delta, beta)


class LenientDDQNAgent(DDQNAgent):
    """DDQN with temperature-gated negative updates.

    The leniency of each transition is fixed at insertion time from the
    current temperature of its (observation, action) pair; optimization
    draws the gate variables from a dedicated stream so the sampling
    stream stays aligned with the baseline's.
    """

    kind = "lenient"

    def __init__(self, cfg: DeepConfig, leniency: LeniencyConfig, seed):
        super().__init__(cfg, seed)
        self.table = TemperatureTable(leniency)
        self._visited: list[bytes] = []

    def act(self, obs: np.ndarray) -> int:
        return temperature_greedy_action(
            self.q_values(obs), self.table, obs, self.action_rng
        )

    def exploration_rate(self, obs: np.ndarray) -> float:
        return self.table.explore_probability(obs, self.cfg.net.n_actions)

    def begin_episode(self, episode: int) -> None:
        super().begin_episode(episode)
        self._visited = []

    def _transition(self, o_prev, action, reward, o_next, terminal) -> Transition:
        key = self.table.key(o_prev, action)
        self._visited.append(key)
        return Transition(
            o_prev=o_prev, action=action, reward=reward,
            o_next=o_next, terminal=terminal,
            leniency=self.table.leniency(key),
        )

    def _weight_fn(self):
        def fn(delta, batch):
            lens = np.asarray([t.leniency for t in batch], dtype=np.float64)
            chi = self.gate_rng.random(len(batch))
            return lenient_weights(delta, lens, chi)
        return fn

    def end_episode(self) -> EpisodeSummary:
        self.table.tds_decay_episode(self._visited)
        self._visited = []
        return super().end_episode()


@dataclass(frozen=True)
class NuiConfig:
    episodes_per_label: int = 100
    init_episodes: int = 10      # per-ring fill target for the random phase
    exploration_cap: int = 500   # hard stop for the random phase, episodes
    fallback_floor: float = -1.0  # interval seed for labels never seen

    def __post_init__(self):
        if min(self.episodes_per_label, self.init_episodes,
               self.exploration_cap) < 1:
            raise ValueError("NUI episode counts must be >= 1")


class NuiDDQNAgent(DDQNAgent):
    """DDQN over per-equipment episodic memories with interval storage.

    Episodes buffer locally until they end; the trajectory is classified
    by the equipment committed to, its return is tested against that
    action's negative-update interval, and only passing episodes enter
    the ring. A uniform-random exploration phase first fills every ring
    and seeds the intervals with the best observed returns; no
    optimization happens until it completes.
    """

    kind = "nui"

    def __init__(
        self,
        cfg: DeepConfig,
        intervals: IntervalConfig,
        nui: NuiConfig,
        seed,
    ):
        super().__init__(cfg, seed)
        self.nui = nui
        self.memory = EpisodicActionMemory(
            ACTION_LABELS, nui.episodes_per_label
        )
        self.intervals = NegativeUpdateIntervals(ACTION_LABELS, intervals)
        self.exploring = True
        self._best: dict[str, float | None] = {u: None for u in ACTION_LABELS}
        self._episodes_seen = 0
        self._ep_obs: list[np.ndarray] = []
        self._ep_actions: list[int] = []

    def act(self, obs: np.ndarray) -> int:
        if self.exploring:
            return int(self.action_rng.integers(self.cfg.net.n_actions))
        return super().act(obs)

    def exploration_rate(self, obs: np.ndarray) -> float:
        return 1.0 if self.exploring else self.epsilon

    def begin_episode(self, episode: int) -> None:
        super().begin_episode(episode)
        self._ep_obs = []
        self._ep_actions = []

    def _store(self, transition: Transition) -> None:
        # buffer the episode; ring insertion is decided at episode end
        if not self._ep_obs:
            self._ep_obs.append(transition.o_prev)
        self._ep_obs.append(transition.o_next)
        self._ep_actions.append(transition.action)

    def _optimize(self) -> None:
        # nothing changes the online net while exploring, so the periodic
        # target sync in observe() is a harmless no-op there
        if self.exploring:
            return
        super()._optimize()

    def end_episode(self) -> EpisodeSummary:
        trajectory = Trajectory(
            obs=np.stack(self._ep_obs),
            actions=np.asarray(self._ep_actions, dtype=np.int64),
            rewards=np.asarray(self._ep_rewards, dtype=np.float32),
            terminal=True,
        )
        label = classify(trajectory)
        # interval bookkeeping uses the rewards as observed, not as stored:
        # the float32 buffer copy must not leak rounding into the bounds
        r_tau = math.fsum(self._ep_rewards)
        self._episodes_seen += 1

        stored = None
        if self.exploring:
            if label is not None:
                self.memory.push_episode(label, trajectory)
                stored = True
                best = self._best[label]
                if best is None or r_tau > best:
                    self._best[label] = r_tau
            self._maybe_finish_exploration()
        elif label is not None:
            stored = self.intervals.update(label, r_tau)
            if stored:
                self.memory.push_episode(label, trajectory)

        return EpisodeSummary(
            label=label,
            cumulative_reward=r_tau,
            stored=stored,
            exploring=self.exploring,
            intervals=self.intervals.snapshot(),
        )

    def _maybe_finish_exploration(self) -> None:
        filled = all(
            self.memory.episode_count(u) >= self.nui.init_episodes
            for u in ACTION_LABELS
        )
        if not filled and self._episodes_seen < self.nui.exploration_cap:
            return
        for u in ACTION_LABELS:
            best = self._best[u]
            self.intervals.initialize(
                u, best if best is not None else self.nui.fallback_floor
            )
        self.exploring = False


# --------------------------------------------------------------------------
# tabular learners for repeated strategic-form games


class TabularLearner:
    """Single-state Q-vector learner; subclasses define the update rule."""

    rule = "abstract"

    def __init__(self, n_actions: int = 3):
        self.n_actions = n_actions
        self.q = np.zeros(n_actions, dtype=np.float64)

    def greedy(self) -> int:
        return int(np.argmax(self.q))

    def select(self, epsilon: float, rng: np.random.Generator) -> int:
        return epsilon_greedy(self.q, epsilon, rng)

    def update(self, action: int, reward: float) -> None:
        raise NotImplementedError


class AverageLearner(TabularLearner):
    """Q_u is the running mean of every reward observed for u."""

    rule = "average"

    def __init__(self, n_actions: int = 3):
        super().__init__(n_actions)
        self.counts = np.zeros(n_actions, dtype=np.int64)

    def update(self, action: int, reward: float) -> None:
        self.counts[action] += 1
        self.q[action] += (reward - self.q[action]) / self.counts[action]


class MaximumLearner(TabularLearner):
    """Q_u is the best reward ever observed for u."""

    rule = "maximum"

    def __init__(self, n_actions: int = 3):
        super().__init__(n_actions)
        self.q[:] = -np.inf

    def update(self, action: int, reward: float) -> None:
        if reward > self.q[action]:
            self.q[action] = reward


class HystereticLearner(TabularLearner):
    """Two learning rates: alpha on increases, beta*alpha on decreases."""

    rule = "hysteretic"

    def __init__(self, alpha: float = 0.1, beta: float = 0.5, n_actions: int = 3):
        if not 0 < beta <= 1:
            raise ValueError("beta must be in (0, 1] (fraction of alpha)")
        super().__init__(n_actions)
        self.alpha = alpha
        self.beta = beta

    def update(self, action: int, reward: float) -> None:
        delta = reward - self.q[action]
        rate = self.alpha if delta > 0 else self.beta * self.alpha
        self.q[action] += rate * delta


class LenientLearner(TabularLearner):
    """Temperature-gated updates; per-action temperatures cool per visit."""

    rule = "lenient"

    def __init__(
        self,
        rng: np.random.Generator,
        alpha: float = 0.1,
        moderation: float = 1.0,
        temperature_decay: float = 0.95,
        n_actions: int = 3,
    ):
        super().__init__(n_actions)
        self.rng = rng
        self.alpha = alpha
        self.moderation = moderation
        self.temperature_decay = temperature_decay
        self.temperatures = np.ones(n_actions, dtype=np.float64)

    def update(self, action: int, reward: float) -> None:
        delta = reward - self.q[action]
        lenience = leniency_value(self.temperatures[action], self.moderation)
        if delta > 0 or lenience <= 0 or self.rng.random() > lenience:
            self.q[action] += self.alpha * delta
        self.temperatures[action] *= self.temperature_decay


class NuiLearner(TabularLearner):
    """Interval-filtered averaging; a one-step version of NUI storage.

    Each play of u is an episode of length one with return r. Returns
    passing u's interval enter a bounded reward ring; Q_u is the ring
    mean, so admitted outliers wash out while rejected miscoordination
    rewards never touch the estimate at all.
    """

    rule = "nui"

    def __init__(
        self,
        cfg: IntervalConfig = IntervalConfig(),
        ring_capacity: int = 100,
        init_samples: int = 10,
        exploration_cap: int = 1000,
        n_actions: int = 3,
    ):
        super().__init__(n_actions)
        labels = tuple(str(i) for i in range(n_actions))
        self._labels = labels
        self.intervals = NegativeUpdateIntervals(labels, cfg)
        self.rings: list[deque[float]] = [
            deque(maxlen=ring_capacity) for _ in range(n_actions)
        ]
        self.init_samples = init_samples
        self.exploration_cap = exploration_cap
        self.exploring = True
        self._best: list[float | None] = [None] * n_actions
        self._iterations = 0

    def select(self, epsilon: float, rng: np.random.Generator) -> int:
        if self.exploring:
            return int(rng.integers(self.n_actions))
        return super().select(epsilon, rng)

    def update(self, action: int, reward: float) -> None:
        self._iterations += 1
        if self.exploring:
            self.rings[action].append(reward)
            best = self._best[action]
            if best is None or reward > best:
                self._best[action] = reward
            if (
                all(len(r) >= self.init_samples for r in self.rings)
                or self._iterations >= self.exploration_cap
            ):
                for i, label in enumerate(self._labels):
                    best = self._best[i]
                    self.intervals.initialize(
                        label, best if best is not None else -1.0
                    )
                self.exploring = False
        else:
            if self.intervals.update(self._labels[action], reward):
                self.rings[action].append(reward)
        ring = self.rings[action]
        if ring:
            self.q[action] = math.fsum(ring) / len(ring)


TABULAR_RULES = ("average", "maximum", "hysteretic", "lenient", "nui")


def make_tabular_learner(
    rule: str,
    rng: np.random.Generator | None = None,
    **kwargs,
) -> TabularLearner:
    """Build a tabular learner by rule name; unknown names are an error."""
    if rule == "average":
        return AverageLearner(**kwargs)
    if rule == "maximum":
        return MaximumLearner(**kwargs)
    if rule == "hysteretic":
        return HystereticLearner(**kwargs)
    if rule == "lenient":
        if rng is None:
            raise ValueError("lenient rule needs an rng for its update gate")
        return LenientLearner(rng, **kwargs)
    if rule == "nui":
        return NuiLearner(**kwargs)
    raise ValueError(f"unknown tabular rule {rule!r}")
