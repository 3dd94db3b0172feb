"""The two-agent firefighting gridworld.

Two agents spawn inside a compartment (or in two separate chambers), walk
out, each commit irrevocably to one piece of equipment by stepping onto its
cell, and must then stand simultaneously adjacent to a burning obstacle to
extinguish it. The joint equipment choice (u1, u2) indexes a team reward
table; every other reward is exactly 0, except a -1.0 for both on timeout.
Civilians wander the map at random and physically block movement.

Layouts are plain text files: a small ``key: value`` header (observation
mode, step limit, overlap flag, legend) followed by a glyph grid. See
``data/layouts/`` for the shipped maps and docs/formats.md for the format.

Observation encoding (channel stack, uint8 {0,1}):

====  =========================================================
 0    obstacles: walls plus every fire-candidate cell
 1    the burning cell
 2-4  equipment dispenser cells A, B, C (static)
 5    own position
 6-8  own equipment one-hot, broadcast across the full plane
 9    other agent's position (if visible)
10-12 other agent's equipment one-hot (if visible)
13    civilians
====  =========================================================

Under ``observation: full`` the planes cover the whole grid and the other
agent is always visible. Under ``observation: window R`` each agent sees a
(2R+1)-square crop centred on itself, zero-padded at borders, and the other
agent (position and equipment channels both) only exists in the crop while
inside it - equipment choices are mutually observable in layout 1 and
hidden during pickup in layout 2, which is the entire point of having both.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .games import TeamGame, sample_reward

__all__ = [
    "Action",
    "EQUIPMENT",
    "MOVE_DELTAS",
    "LayoutSpec",
    "load_layout",
    "shipped_layouts",
    "FiremenEnv",
    "StepResult",
    "mask_civilians",
    "N_CHANNELS",
    "CH_OBSTACLE",
    "CH_FIRE",
    "CH_EQUIP",
    "CH_SELF_POS",
    "CH_SELF_EQ",
    "CH_OTHER_POS",
    "CH_OTHER_EQ",
    "CH_CIVILIAN",
]

# action indices; deltas in (row, col)
UP, DOWN, LEFT, RIGHT, NOOP = range(5)
_DELTAS = ((-1, 0), (1, 0), (0, -1), (0, 1), (0, 0))
MOVE_DELTAS = _DELTAS
Action = int
N_ACTIONS = 5

EQUIPMENT = ("A", "B", "C")

N_CHANNELS = 14
CH_OBSTACLE = 0
CH_FIRE = 1
CH_EQUIP = {"A": 2, "B": 3, "C": 4}
CH_SELF_POS = 5
CH_SELF_EQ = {"A": 6, "B": 7, "C": 8}
CH_OTHER_POS = 9
CH_OTHER_EQ = {"A": 10, "B": 11, "C": 12}
CH_CIVILIAN = 13

_LEGEND = {
    "#": "wall",
    ".": "free",
    "o": "fire-candidate",
    "A": "equipment-A",
    "B": "equipment-B",
    "C": "equipment-C",
    "1": "spawn-1",
    "2": "spawn-2",
    "c": "civilian-spawn",
}


@dataclass(frozen=True)
class LayoutSpec:
    """A parsed, validated layout."""

    name: str
    height: int
    width: int
    walls: np.ndarray  # bool (H, W): '#' cells
    fire_candidates: tuple[tuple[int, int], ...]  # 'o' cells (obstacles)
    equipment: dict[str, tuple[tuple[int, int], ...]]  # kind -> cells
    spawns: tuple[tuple[int, int], tuple[int, int]]
    civilian_spawns: tuple[tuple[int, int], ...]
    observation: str  # "full" or "window"
    window_radius: int  # 0 when full
    step_limit: int
    allow_overlap: bool

    @property
    def obs_shape(self) -> tuple[int, int, int]:
        if self.observation == "window":
            side = 2 * self.window_radius + 1
            return (N_CHANNELS, side, side)
        return (N_CHANNELS, self.height, self.width)

    def blocked(self) -> np.ndarray:
        """Static impassable mask: walls plus fire-candidate obstacles."""
        m = self.walls.copy()
        for r, c in self.fire_candidates:
            m[r, c] = True
        return m


def load_layout(source: str | Path) -> LayoutSpec:
    """Parse and validate a layout file (path or shipped layout name)."""
    path = Path(source)
    if path.suffix == ".txt" and path.exists():
        text = path.read_text()
    else:
        candidate = resources.files("firemen") / "data" / "layouts" / f"{source}.txt"
        try:
            text = candidate.read_text()
        except FileNotFoundError:
            raise FileNotFoundError(
                f"no layout file {source!r} and no shipped layout of that name"
            ) from None
    return parse_layout(text)


def shipped_layouts() -> list[str]:
    base = resources.files("firemen") / "data" / "layouts"
    return sorted(p.name[: -len(".txt")] for p in base.iterdir()
                  if p.name.endswith(".txt"))


def parse_layout(text: str) -> LayoutSpec:
    meta: dict[str, str] = {}
    rows: list[str] = []
    in_map = False
    for raw in text.splitlines():
        if in_map:
            if raw.strip():
                rows.append(raw.rstrip("\n"))
            continue
        line = raw.strip()
        if not line or line.startswith("//"):
            continue
        if line == "map:":
            in_map = True
            continue
        if ":" not in line:
            raise ValueError(f"header line without ':': {raw!r}")
        key, value = line.split(":", 1)
        meta[key.strip()] = value.strip()

    for required in ("name", "observation", "step-limit", "legend"):
        if required not in meta:
            raise ValueError(f"layout header missing {required!r}")
    if not rows:
        raise ValueError("layout has no map")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError("ragged map: all rows must have equal width")
    height = len(rows)

    obs_words = meta["observation"].split()
    if obs_words == ["full"]:
        observation, radius = "full", 0
    elif len(obs_words) == 2 and obs_words[0] == "window":
        observation, radius = "window", int(obs_words[1])
        if radius < 1:
            raise ValueError("window radius must be >= 1")
    else:
        raise ValueError(f"bad observation mode {meta['observation']!r}")

    step_limit = int(meta["step-limit"])
    if step_limit <= 0:
        raise ValueError("step-limit must be positive")
    allow_overlap = meta.get("allow-overlap", "false").lower() == "true"

    walls = np.zeros((height, width), dtype=bool)
    fire_candidates: list[tuple[int, int]] = []
    equipment: dict[str, list[tuple[int, int]]] = {u: [] for u in EQUIPMENT}
    spawns: dict[str, tuple[int, int]] = {}
    civ_spawns: list[tuple[int, int]] = []

    for r, row in enumerate(rows):
        for c, glyph in enumerate(row):
            if glyph not in _LEGEND:
                raise ValueError(f"unknown glyph {glyph!r} at {(r, c)}")
            if glyph == "#":
                walls[r, c] = True
            elif glyph == "o":
                fire_candidates.append((r, c))
            elif glyph in EQUIPMENT:
                equipment[glyph].append((r, c))
            elif glyph in ("1", "2"):
                if glyph in spawns:
                    raise ValueError(f"duplicate spawn {glyph}")
                spawns[glyph] = (r, c)
            elif glyph == "c":
                civ_spawns.append((r, c))

    if set(spawns) != {"1", "2"}:
        raise ValueError("layout needs exactly one '1' and one '2' spawn")
    if not fire_candidates:
        raise ValueError("layout needs at least one fire candidate 'o'")
    for u in EQUIPMENT:
        if not equipment[u]:
            raise ValueError(f"layout needs at least one equipment-{u} cell")

    # border must be sealed so nothing can leave the grid
    border = np.zeros((height, width), dtype=bool)
    border[0, :] = border[-1, :] = True
    border[:, 0] = border[:, -1] = True
    if not walls[border].all():
        raise ValueError("layout border must be all walls")

    spec = LayoutSpec(
        name=meta["name"],
        height=height,
        width=width,
        walls=walls,
        fire_candidates=tuple(fire_candidates),
        equipment={u: tuple(cells) for u, cells in equipment.items()},
        spawns=(spawns["1"], spawns["2"]),
        civilian_spawns=tuple(civ_spawns),
        observation=observation,
        window_radius=radius,
        step_limit=step_limit,
        allow_overlap=allow_overlap,
    )

    # every fire candidate needs at least one walkable orthogonal neighbour
    blocked = spec.blocked()
    for r, c in fire_candidates:
        if not any(
            0 <= r + dr < height and 0 <= c + dc < width
            and not blocked[r + dr, c + dc]
            for dr, dc in _DELTAS[:4]
        ):
            raise ValueError(f"fire candidate {(r, c)} has no access point")
    return spec


@dataclass
class StepResult:
    obs: tuple[np.ndarray, np.ndarray]
    rewards: tuple[float, float]
    terminal: bool
    outcome: str | None  # e.g. "AB", "timeout"; None while running


def mask_civilians(obs: np.ndarray) -> np.ndarray:
    """Copy of an observation with the civilian channel zeroed.

    Lenient temperature keys hash masked observations so that identical
    tactical situations are not split apart by civilian noise.
    """
    out = np.array(obs, dtype=obs.dtype, copy=True)
    out[..., CH_CIVILIAN, :, :] = 0
    return out


class FiremenEnv:
    """Two agents, one fire, three kinds of equipment, optional civilians.

    All randomness (fire location, civilian placement and motion, collision
    winners) flows from the Generator handed to ``__init__``/``reset``, so
    a seeded environment replays exactly.
    """

    n_actions = N_ACTIONS

    def __init__(
        self,
        layout: LayoutSpec,
        game: TeamGame,
        civilian_count: int = 0,
        seed: int | np.random.Generator = 0,
    ):
        if tuple(game.actions) != EQUIPMENT:
            raise ValueError(
                f"game actions {game.actions} must be {EQUIPMENT}"
            )
        if civilian_count < 0:
            raise ValueError("civilian_count must be >= 0")
        self.layout = layout
        self.game = game
        self.civilian_count = civilian_count
        self.rng = (
            seed
            if isinstance(seed, np.random.Generator)
            else np.random.default_rng(seed)
        )
        self._blocked = layout.blocked()
        self._static = self._build_static_channels()
        self._equip_at: dict[tuple[int, int], str] = {
            cell: u for u in EQUIPMENT for cell in layout.equipment[u]
        }
        # free cells where civilians may stand
        self._civ_ok = ~self._blocked.copy()
        for cells in layout.equipment.values():
            for cell in cells:
                self._civ_ok[cell] = False
        self._terminal = True  # must reset() first

    # -- state accessors ---------------------------------------------------

    @property
    def positions(self) -> tuple[tuple[int, int], tuple[int, int]]:
        return tuple(self._pos)

    @property
    def holdings(self) -> tuple[str | None, str | None]:
        return tuple(self._holding)

    @property
    def fire(self) -> tuple[int, int]:
        return self._fire

    @property
    def civilians(self) -> tuple[tuple[int, int], ...]:
        return tuple(self._civilians)

    @property
    def steps(self) -> int:
        return self._steps

    @property
    def terminal(self) -> bool:
        return self._terminal

    # -- lifecycle ---------------------------------------------------------

    def reset(self) -> tuple[np.ndarray, np.ndarray]:
        lay = self.layout
        self._fire = lay.fire_candidates[
            int(self.rng.integers(len(lay.fire_candidates)))
        ]
        self._pos = [lay.spawns[0], lay.spawns[1]]
        self._holding: list[str | None] = [None, None]
        self._steps = 0
        self._terminal = False

        self._civilians: list[tuple[int, int]] = []
        if self.civilian_count > 0:
            candidates = list(lay.civilian_spawns)
            if not candidates:
                free = ~self._blocked
                candidates = [
                    (r, c)
                    for r in range(lay.height)
                    for c in range(lay.width)
                    if free[r, c]
                    and (r, c) not in self._equip_at
                    and (r, c) not in self._pos
                ]
            if self.civilian_count > len(candidates):
                raise ValueError(
                    f"cannot place {self.civilian_count} civilians on "
                    f"{len(candidates)} available cells"
                )
            chosen = self.rng.choice(
                len(candidates), size=self.civilian_count, replace=False
            )
            self._civilians = [candidates[int(i)] for i in chosen]
        return self.observe(0), self.observe(1)

    def step(self, a1: Action, a2: Action) -> StepResult:
        if self._terminal:
            raise RuntimeError("step() after terminal state; call reset()")
        for a in (a1, a2):
            if not 0 <= a < N_ACTIONS:
                raise ValueError(f"bad action {a}")

        self._move_agents(a1, a2)
        self._do_pickups()
        self._move_civilians()
        self._steps += 1

        if self._extinguished():
            u1, u2 = self._holding
            r = float(sample_reward(self.game, (u1, u2), self.rng))
            self._terminal = True
            return StepResult(
                obs=(self.observe(0), self.observe(1)),
                rewards=(r, r),
                terminal=True,
                outcome=f"{u1}{u2}",
            )
        if self._steps >= self.layout.step_limit:
            self._terminal = True
            return StepResult(
                obs=(self.observe(0), self.observe(1)),
                rewards=(-1.0, -1.0),
                terminal=True,
                outcome="timeout",
            )
        return StepResult(
            obs=(self.observe(0), self.observe(1)),
            rewards=(0.0, 0.0),
            terminal=False,
            outcome=None,
        )

    # -- internals ---------------------------------------------------------

    def _passable_for_agent(self, cell: tuple[int, int]) -> bool:
        r, c = cell
        if self._blocked[r, c]:
            return False
        if cell == self._fire:
            return False
        if cell in self._civilians:
            return False
        return True

    def _move_agents(self, a1: Action, a2: Action) -> None:
        p1, p2 = self._pos
        want = []
        for pos, act in ((p1, a1), (p2, a2)):
            dr, dc = _DELTAS[act]
            t = (pos[0] + dr, pos[1] + dc)
            want.append(t if self._passable_for_agent(t) else pos)
        t1, t2 = want

        if self.layout.allow_overlap:
            self._pos = [t1, t2]
            return

        moved1 = t1 != p1
        moved2 = t2 != p2
        if moved1 and moved2 and t1 == t2:
            # contention for one cell: a uniform coin picks the mover
            if self.rng.random() < 0.5:
                self._pos = [t1, p2]
            else:
                self._pos = [p1, t2]
            return
        if moved1 and moved2 and t1 == p2 and t2 == p1:
            return  # swap disallowed, both stay
        # moving into the other's cell works only if the other vacates it
        if moved1 and t1 == p2 and not moved2:
            t1 = p1
        if moved2 and t2 == p1 and not (moved1 and t1 != p1):
            t2 = p2
        self._pos = [t1, t2]

    def _do_pickups(self) -> None:
        for i in (0, 1):
            if self._holding[i] is None:
                kind = self._equip_at.get(self._pos[i])
                if kind is not None:
                    self._holding[i] = kind  # irrevocable

    def _move_civilians(self) -> None:
        occupied = set(self._pos)
        for k, (r, c) in enumerate(self._civilians):
            move = int(self.rng.integers(N_ACTIONS))
            dr, dc = _DELTAS[move]
            t = (r + dr, c + dc)
            if (
                t != (r, c)
                and self._civ_ok[t]
                and t != self._fire
                and t not in occupied
                and t not in self._civilians
            ):
                self._civilians[k] = t

    def _adjacent_to_fire(self, cell: tuple[int, int]) -> bool:
        fr, fc = self._fire
        return abs(cell[0] - fr) + abs(cell[1] - fc) == 1

    def _extinguished(self) -> bool:
        return (
            self._holding[0] is not None
            and self._holding[1] is not None
            and self._adjacent_to_fire(self._pos[0])
            and self._adjacent_to_fire(self._pos[1])
        )

    # -- observations ------------------------------------------------------

    def _build_static_channels(self) -> np.ndarray:
        lay = self.layout
        static = np.zeros((N_CHANNELS, lay.height, lay.width), dtype=np.uint8)
        static[CH_OBSTACLE][self._blocked] = 1
        for u in EQUIPMENT:
            for r, c in lay.equipment[u]:
                static[CH_EQUIP[u], r, c] = 1
        return static

    def observe(self, agent: int) -> np.ndarray:
        """Current observation for agent 0 or 1 (uint8 channel stack)."""
        if agent not in (0, 1):
            raise ValueError("agent must be 0 or 1")
        lay = self.layout
        obs = self._static.copy()
        obs[CH_FIRE][self._fire] = 1
        me, other = agent, 1 - agent
        obs[CH_SELF_POS][self._pos[me]] = 1
        if self._holding[me] is not None:
            obs[CH_SELF_EQ[self._holding[me]]][:, :] = 1
        obs[CH_OTHER_POS][self._pos[other]] = 1
        if self._holding[other] is not None:
            obs[CH_OTHER_EQ[self._holding[other]]][:, :] = 1
        for cell in self._civilians:
            obs[CH_CIVILIAN][cell] = 1

        if lay.observation == "full":
            return obs

        # centred window crop with zero padding
        rad = lay.window_radius
        side = 2 * rad + 1
        r0 = self._pos[me][0] - rad
        c0 = self._pos[me][1] - rad
        out = np.zeros((N_CHANNELS, side, side), dtype=np.uint8)
        rs, re = max(r0, 0), min(r0 + side, lay.height)
        cs, ce = max(c0, 0), min(c0 + side, lay.width)
        out[:, rs - r0 : re - r0, cs - c0 : ce - c0] = obs[:, rs:re, cs:ce]
        # the other agent exists only while inside the crop; its equipment
        # channels are broadcast planes, so gate them on visibility
        orow, ocol = self._pos[other]
        visible = rs <= orow < re and cs <= ocol < ce
        if not visible:
            out[CH_OTHER_POS][:, :] = 0
            for u in EQUIPMENT:
                out[CH_OTHER_EQ[u]][:, :] = 0
        # own equipment planes must cover the whole window, padding included
        if self._holding[me] is not None:
            out[CH_SELF_EQ[self._holding[me]]][:, :] = 1
        return out
