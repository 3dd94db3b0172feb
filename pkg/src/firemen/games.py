"""Single-state cooperative team games and the analysis quantities used to
reason about them.

A :class:`TeamGame` is a strategic-form game in which every player receives
the same reward. Payoff entries are finite lotteries, so deterministic,
partially stochastic and fully stochastic variants of the same game all fit
one representation. Games are normally loaded from the shipped catalogue
(``data/games.txt``), a plain-text file users can extend without touching
code.

The analysis helpers cover the quantities that matter when independent
learners play these games repeatedly: expected payoffs, optimistic and
average action qualities, pure Nash equilibria, Pareto dominance between
joint actions, the shadowed-equilibrium relation, and the joint exploration
probability of a team of epsilon-greedy agents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Outcome",
    "TeamGame",
    "load_catalogue",
    "sample_reward",
    "expected_reward",
    "expected_matrix",
    "quality_average",
    "quality_max",
    "enumerate_pure_nash",
    "pareto_dominates",
    "is_shadowed",
    "global_exploration",
    "analyze",
]

_PROB_TOL = 1e-9


@dataclass(frozen=True)
class Outcome:
    """One support point of a payoff lottery."""

    reward: float
    prob: float


@dataclass(frozen=True)
class TeamGame:
    """A symmetric-payoff strategic-form game with lottery entries.

    ``table`` maps a joint action ``(row, col)`` (action indices) to the
    tuple of possible outcomes for that joint action. Probabilities within
    an entry sum to one.
    """

    name: str
    actions: tuple[str, ...]
    table: Mapping[tuple[int, int], tuple[Outcome, ...]]

    def __post_init__(self) -> None:
        n = len(self.actions)
        if len(set(self.actions)) != n:
            raise ValueError(f"{self.name}: duplicate action labels")
        missing = [
            (i, j) for i in range(n) for j in range(n) if (i, j) not in self.table
        ]
        if missing:
            raise ValueError(f"{self.name}: missing joint actions {missing}")
        for ja, outcomes in self.table.items():
            total = math.fsum(o.prob for o in outcomes)
            if abs(total - 1.0) > _PROB_TOL:
                raise ValueError(
                    f"{self.name}: probabilities for {ja} sum to {total}, not 1"
                )
            if any(o.prob <= 0 for o in outcomes):
                raise ValueError(f"{self.name}: non-positive probability in {ja}")

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    def action_index(self, label: str) -> int:
        try:
            return self.actions.index(label)
        except ValueError:
            raise KeyError(f"{self.name}: unknown action {label!r}") from None

    def joint_index(self, ja: tuple[str, str] | tuple[int, int]) -> tuple[int, int]:
        """Normalise a joint action given as labels or indices."""
        a, b = ja
        if isinstance(a, str):
            a = self.action_index(a)
        if isinstance(b, str):
            b = self.action_index(b)
        n = self.n_actions
        if not (0 <= a < n and 0 <= b < n):
            raise KeyError(f"{self.name}: joint action {ja!r} out of range")
        return a, b


def _parse_outcomes(text: str, where: str) -> tuple[Outcome, ...]:
    outcomes = []
    for token in text.split():
        if "@" in token:
            reward_s, prob_s = token.split("@", 1)
            outcomes.append(Outcome(float(reward_s), float(prob_s)))
        else:
            outcomes.append(Outcome(float(token), 1.0))
    if not outcomes:
        raise ValueError(f"{where}: empty outcome list")
    return tuple(outcomes)


def load_catalogue(path: str | Path | None = None) -> dict[str, TeamGame]:
    """Parse a game catalogue file into a name -> TeamGame mapping.

    With no argument the packaged catalogue is loaded. Raises ValueError on
    malformed entries (unknown labels, missing joint actions, probabilities
    not summing to one).
    """
    if path is None:
        text = (resources.files("firemen") / "data" / "games.txt").read_text()
    else:
        text = Path(path).read_text()

    games: dict[str, TeamGame] = {}
    name: str | None = None
    actions: tuple[str, ...] = ()
    table: dict[tuple[int, int], tuple[Outcome, ...]] = {}

    def flush() -> None:
        nonlocal name, actions, table
        if name is None:
            return
        if not actions:
            raise ValueError(f"{name}: no actions line")
        games[name] = TeamGame(name=name, actions=actions, table=dict(table))
        name, actions, table = None, (), {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("game "):
            flush()
            name = line[len("game ") :].strip()
            if name in games:
                raise ValueError(f"line {lineno}: duplicate game {name!r}")
        elif line.startswith("actions "):
            if name is None:
                raise ValueError(f"line {lineno}: actions before game")
            actions = tuple(line.split()[1:])
        elif "->" in line:
            if name is None or not actions:
                raise ValueError(f"line {lineno}: entry before game/actions")
            lhs, rhs = line.split("->", 1)
            parts = lhs.split()
            if len(parts) != 2:
                raise ValueError(f"line {lineno}: joint action needs two labels")
            row, col = parts
            idx = (actions.index(row), actions.index(col))
            if idx in table:
                raise ValueError(f"line {lineno}: duplicate entry {row} {col}")
            table[idx] = _parse_outcomes(rhs, f"line {lineno}")
        else:
            raise ValueError(f"line {lineno}: unparseable line {raw!r}")
    flush()
    return games


def sample_reward(
    game: TeamGame, ja: tuple[int, int] | tuple[str, str], rng: np.random.Generator
) -> float:
    """Draw one reward from the lottery for a joint action."""
    outcomes = game.table[game.joint_index(ja)]
    if len(outcomes) == 1:
        return outcomes[0].reward
    probs = [o.prob for o in outcomes]
    k = rng.choice(len(outcomes), p=probs)
    return outcomes[k].reward


def expected_reward(game: TeamGame, ja: tuple[int, int] | tuple[str, str]) -> float:
    outcomes = game.table[game.joint_index(ja)]
    return math.fsum(o.reward * o.prob for o in outcomes)


def expected_matrix(game: TeamGame) -> np.ndarray:
    """Expected rewards as an (n, n) array indexed [row, col]."""
    n = game.n_actions
    m = np.empty((n, n), dtype=float)
    for i in range(n):
        for j in range(n):
            m[i, j] = expected_reward(game, (i, j))
    return m


def quality_average(
    game: TeamGame, u: int | str, opponent_dist: Sequence[float]
) -> float:
    """Expected reward of action ``u`` against a mixed opponent.

    ``opponent_dist`` is a probability vector over the opponent's actions.
    This is the quantity an average-based estimator converges to.
    """
    if isinstance(u, str):
        u = game.action_index(u)
    dist = np.asarray(opponent_dist, dtype=float)
    if dist.shape != (game.n_actions,):
        raise ValueError("opponent_dist length must match the action count")
    if (dist < -_PROB_TOL).any() or abs(dist.sum() - 1.0) > 1e-6:
        raise ValueError("opponent_dist must be a probability vector")
    return math.fsum(
        dist[j] * expected_reward(game, (u, j)) for j in range(game.n_actions)
    )


def quality_max(game: TeamGame, u: int | str) -> float:
    """Best reward in the support of any lottery in row ``u``.

    The quantity a maximum-based estimator converges to: the highest reward
    ever observable after playing ``u``, however unlikely.
    """
    if isinstance(u, str):
        u = game.action_index(u)
    return max(
        o.reward
        for j in range(game.n_actions)
        for o in game.table[(u, j)]
    )


def _deviation_payoffs(
    game: TeamGame, ja: tuple[int, int], m: np.ndarray
) -> list[float]:
    """Expected payoffs of all strict unilateral deviations from ``ja``."""
    i, j = ja
    out = []
    for u in range(game.n_actions):
        if u != i:
            out.append(m[u, j])
        if u != j:
            out.append(m[i, u])
    return out


def enumerate_pure_nash(game: TeamGame) -> list[tuple[int, int]]:
    """Pure Nash equilibria of the expected game, row-major order.

    A joint action is an equilibrium when no strict unilateral deviation
    strictly increases the expected reward (ties allowed).
    """
    m = expected_matrix(game)
    nash = []
    for i in range(game.n_actions):
        for j in range(game.n_actions):
            if all(d <= m[i, j] + 0.0 for d in _deviation_payoffs(game, (i, j), m)):
                nash.append((i, j))
    return nash


def pareto_dominates(
    game: TeamGame,
    ja1: tuple[int, int] | tuple[str, str],
    ja2: tuple[int, int] | tuple[str, str],
) -> bool:
    """True when ja1 is strictly better than ja2 for the team in expectation.

    Both players share a reward, so Pareto dominance between joint actions
    collapses to a strict inequality of expected rewards.
    """
    return expected_reward(game, ja1) > expected_reward(game, ja2)


def is_shadowed(
    game: TeamGame,
    candidate: tuple[int, int] | tuple[str, str],
    by: tuple[int, int] | tuple[str, str],
) -> bool:
    """Shadowed-equilibrium test between two joint actions.

    ``candidate`` is shadowed by ``by`` when some unilateral deviation from
    ``candidate`` pays strictly less than every unilateral deviation from
    ``by``: the candidate carries a deeper miscoordination penalty than
    anything reachable by straying from ``by``.
    """
    cand = game.joint_index(candidate)
    ref = game.joint_index(by)
    m = expected_matrix(game)
    worst_cand = min(_deviation_payoffs(game, cand, m))
    worst_ref = min(_deviation_payoffs(game, ref, m))
    return worst_cand < worst_ref


def global_exploration(epsilons: Iterable[float]) -> float:
    """Probability that at least one of n epsilon-greedy agents explores.

    Equals 1 - prod(1 - eps_i). Grows with the team size: individually
    small exploration rates still produce frequent joint deviations.
    """
    eps = list(epsilons)
    for e in eps:
        if not (0.0 <= e <= 1.0):
            raise ValueError(f"epsilon {e} outside [0, 1]")
    prod = 1.0
    for e in eps:
        prod *= 1.0 - e
    return 1.0 - prod


def analyze(game: TeamGame) -> dict:
    """Structured analysis report for one game (used by the CLI).

    Contains the expected matrix, per-action optimistic/uniform qualities,
    pure Nash equilibria, the Pareto ranking among equilibria, and which
    equilibria are shadowed by which joint actions.
    """
    n = game.n_actions
    labels = game.actions
    m = expected_matrix(game)
    uniform = [1.0 / n] * n
    nash = enumerate_pure_nash(game)

    pareto: list[dict] = []
    for x in nash:
        for y in nash:
            if x != y and pareto_dominates(game, x, y):
                pareto.append(
                    {
                        "dominant": [labels[x[0]], labels[x[1]]],
                        "dominated": [labels[y[0]], labels[y[1]]],
                    }
                )

    shadowed: list[dict] = []
    all_joint = [(i, j) for i in range(n) for j in range(n)]
    for x in nash:
        for y in all_joint:
            if x != y and is_shadowed(game, x, y):
                shadowed.append(
                    {
                        "equilibrium": [labels[x[0]], labels[x[1]]],
                        "by": [labels[y[0]], labels[y[1]]],
                    }
                )

    return {
        "game": game.name,
        "actions": list(labels),
        "expected": [[m[i, j] for j in range(n)] for i in range(n)],
        "quality_max": {labels[u]: quality_max(game, u) for u in range(n)},
        "quality_average_uniform": {
            labels[u]: quality_average(game, u, uniform) for u in range(n)
        },
        "pure_nash": [[labels[i], labels[j]] for i, j in nash],
        "pareto_dominance": pareto,
        "shadowed": shadowed,
    }
