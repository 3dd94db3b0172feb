"""The climb game at table scale: five update rules, two reward tables.

Both players run the same rule with an annealing exploration schedule and
only ever see their own action and the shared reward. The deterministic
table rewards agreeing on A with 11, punishes near-misses around it with
-30, and offers a safe never-negative C column; the partially stochastic
variant additionally pays (B,B) as a 14-or-0 coin flip with the same
average. Each rule fails somewhere:

- "average" (plain Q-learning) learns each action's average value against
  a noisy partner, and that average ranks safe C highest: it reliably
  abandons the optimum on both tables.
- "maximum" scores actions by the best reward they ever produced. That
  nails the deterministic table and falls straight into the stochastic
  trap: one lucky 14 makes B look like the best action forever.
- "hysteretic" shrinks the learning rate on bad news (here to a tenth).
  Strong enough optimism recovers the deterministic optimum, but on the
  noisy table it cannot tell unlucky draws from miscoordination and
  splits between A and the B trap.
- "lenient" forgives bad news with a probability that cools per visit.
  Tuned hot and slow it is the strongest rule on the stochastic table,
  while on the deterministic one it tends to settle on the lesser (B,B)
  equilibrium.
- "nui" admits a reward into an action's value estimate only when it is
  near that action's best observed return, with a floor that decays when
  the good returns dry up. With an additive floor (so it can sink below
  a lottery's bad draws) it recovers A on both tables, given time.

Run: python3 demos/02_tabular_learners.py   (about a minute)
"""

from collections import Counter

from firemen.learners import IntervalConfig
from firemen.repeated_games import RepeatedGameConfig, run_repeated_game

SEEDS = tuple(range(10))

# rule -> (constructor options, iterations) per game
ADDITIVE = {"cfg": IntervalConfig(decay_mode="additive", decay_step=0.01)}
LINEUP = [
    ("average", {}, {}, 5000, 5000),
    ("maximum", {}, {}, 5000, 5000),
    ("hysteretic", {"beta": 0.1}, {"beta": 0.1}, 5000, 5000),
    ("lenient",
     {"moderation": 10.0, "temperature_decay": 0.9995},
     {"moderation": 10.0, "temperature_decay": 0.9995}, 5000, 5000),
    ("nui", {}, ADDITIVE, 5000, 20_000),  # lotteries need the longer horizon
]

for gi, game in enumerate(("Climb-DET", "Climb-PS")):
    print("=" * 56)
    print(f"{game}, {len(SEEDS)} seeds, greedy joint action at the end:")
    for rule, det_opts, ps_opts, det_iters, ps_iters in LINEUP:
        options = (det_opts, ps_opts)[gi]
        iterations = (det_iters, ps_iters)[gi]
        cfg = RepeatedGameConfig(
            game=game,
            rules=(rule, rule),
            iterations=iterations,
            seeds=SEEDS,
            rule_options=(options, options),
        )
        results = run_repeated_game(cfg)
        tally = Counter("".join(r.final_greedy) for r in results)
        verdict = ", ".join(f"{k}:{v}" for k, v in tally.most_common())
        print(f"   {rule:<10} ({iterations:>5} its) -> {verdict}")

print("=" * 56)
print("AA is the optimum, CC the overgeneralised refuge, BB either the")
print("lesser equilibrium or, on the stochastic table, the jackpot trap.")
