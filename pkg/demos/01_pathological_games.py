"""Tour of the game catalogue and why these tables are hard for
independent learners.

Every game here is a team game: both players receive the same reward, so
in principle they only need to agree on the best joint action. Two things
get in the way. First, the best joint action (A,A) is surrounded by
punishment: if your partner deviates, A looks terrible, while the safe
action C never pays much but never hurts. Averaging over a shaky partner
therefore drags both players toward C; that is relative
overgeneralisation, and it shows up below as (A,A) being "shadowed".
Second, the stochastic variants pay (B,B) as a lottery, so a learner that
just remembers the best outcome it ever saw cannot tell a good joint
action from a lucky one.

Run: python3 demos/01_pathological_games.py
"""

from firemen.games import analyze, load_catalogue

catalogue = load_catalogue()

for name in ("Climb-DET", "Climb-PS", "AFG-DET", "AFG-PS", "AFG-FS"):
    game = catalogue[name]
    report = analyze(game)
    labels = report["actions"]

    print("=" * 60)
    print(f"{name}: expected team reward")
    print("      " + "".join(f"{u:>8}" for u in labels))
    for u, row in zip(labels, report["expected"]):
        print(f"   {u}  " + "".join(f"{v:8.2f}" for v in row))

    pairs = ", ".join(f"({a},{b})" for a, b in report["pure_nash"])
    print(f"pure Nash equilibria: {pairs}")
    for entry in report["pareto_dominance"]:
        a, b = entry["dominant"], entry["dominated"]
        print(f"   ({a[0]},{a[1]}) Pareto-dominates ({b[0]},{b[1]})")

    # Shadowing is the formal face of relative overgeneralisation: a
    # unilateral slip away from the equilibrium costs more than the same
    # slip elsewhere, so averaging learners rate the equilibrium action
    # poorly even though the equilibrium itself is optimal.
    shadows = {tuple(e["equilibrium"]) for e in report["shadowed"]}
    for eq in sorted(shadows):
        by = [
            tuple(e["by"]) for e in report["shadowed"]
            if tuple(e["equilibrium"]) == eq
        ]
        joined = ", ".join(f"({a},{b})" for a, b in by)
        print(f"   ({eq[0]},{eq[1]}) is shadowed by {joined}")

print("=" * 60)
print("Uniform-partner action quality for AFG-DET (what a learner that")
print("averages over a random partner believes each action is worth):")
report = analyze(catalogue["AFG-DET"])
for u in report["actions"]:
    print(
        f"   {u}: best case {report['quality_max'][u]:5.2f}   "
        f"vs a random partner {report['quality_average_uniform'][u]:6.3f}"
    )
print("C wins the average ranking even though (A,A) pays twice as much;")
print("that inversion is the trap the learners in this package target.")
