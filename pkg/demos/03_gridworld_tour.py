"""A guided episode in the firefighting gridworld.

Two agents spawn in a small room, walk onto equipment dispensers to make
an irrevocable choice of gear, and then have to stand next to the fire at
the same time. Only then does the team reward arrive, drawn from the
configured game table using the pair of choices. The gridworld therefore
stretches a one-shot strategic decision over a corridor of movement,
timing and partial progress; every pathology of the matrix game is still
in here, plus sparse reward.

Run: python3 demos/03_gridworld_tour.py
"""

import numpy as np

from firemen.games import load_catalogue
from firemen.gridworld import (
    DOWN,
    LEFT,
    NOOP,
    RIGHT,
    UP,
    FiremenEnv,
    load_layout,
)

layout = load_layout("layout-micro")
game = load_catalogue()["AFG-DET"]
env = FiremenEnv(layout, game, seed=1)  # this seed burns the left candidate
env.reset()

glyphs = {name: i for i, name in enumerate(("UP", "DOWN", "LEFT", "RIGHT", "NOOP"))}
names = {v: k for k, v in glyphs.items()}


def show(step_label):
    grid = [["#" if layout.walls[r, c] else "." for c in range(layout.width)]
            for r in range(layout.height)]
    for u, cells in layout.equipment.items():
        for r, c in cells:
            grid[r][c] = u.lower()
    fr, fc = env.fire
    grid[fr][fc] = "F"
    (r1, c1), (r2, c2) = env.positions
    grid[r1][c1] = "1"
    grid[r2][c2] = "2"
    print(f"--- {step_label} | holdings {env.holdings} | steps {env.steps}")
    print("\n".join("".join(row) for row in grid))


show("after reset (F is this episode's fire)")

# Scripted plan: both agents commit to A (the jackpot, if they agree),
# then meet at the fire. Dispensers are walkable after pickup, so agent 2
# follows agent 1 across the A cell once it is vacated. The fire has only
# two approach cells, so the agents must split them; agent 1 parks on one
# and waits.
plan = [
    (RIGHT, LEFT),   # step off the spawns
    (UP, LEFT),      # agent 1 onto the A dispenser: commitment is here
    (LEFT, NOOP),    # agent 1 vacates A and is already beside the fire
    (NOOP, LEFT),
    (NOOP, UP),      # agent 2 takes A for itself
    (NOOP, UP),      # agent 2 reaches the second approach cell: done
]

for k, (a1, a2) in enumerate(plan, start=1):
    res = env.step(a1, a2)
    show(f"step {k}: ({names[a1]}, {names[a2]})")
    if res.terminal:
        print(f"terminal: outcome {res.outcome}, team reward {res.rewards[0]}")
        break
else:
    print("plan ran out before termination (fire on the other side?)")

# Observations are channel stacks over the grid: obstacles, dispensers,
# the fire, each agent's position and commitment flags, civilians.
obs = env.observe(0)
print(f"\nobservation tensor for agent 1: shape {obs.shape}, "
      f"dtype {obs.dtype}, nonzero cells {int(np.count_nonzero(obs))}")
print("channel 0 (obstacles, includes the fire candidates):")
print(obs[0].astype(int))
