"""A complete experiment at desk scale, end to end.

This runs a shortened single-seed version of the shipped
afg-det-nui-desk preset: two return-interval learners on the micro
firefighting layout with the deterministic reward table. Expect roughly a
minute. Watch the outcome mix move through three phases: uniform random
exploration while the per-label episode stores fill, a messy middle where
miscoordination and the safe (C,C) outcome compete, and, usually, a take-
over by (A,A) as the stores purify toward each label's best return.

The full preset (5 seeds, 1000 episodes) is what the acceptance tests
run; reproduce it with:  firemen run afg-det-nui-desk --out runs/

Run: python3 demos/04_desk_experiment.py
"""

import dataclasses
from collections import Counter
from pathlib import Path

from firemen.experiment import load_preset, load_records, run_experiment

OUT = Path("demo-output")

cfg = dataclasses.replace(
    load_preset("afg-det-nui-desk"),
    name="desk-demo",
    episodes=600,
    seeds=(0,),
    window=150,
    tail=150,
)

print(f"running {cfg.episodes} episodes on {cfg.layout} / {cfg.game} ...")
result = run_experiment(cfg, OUT)
summary = result.summaries[0]
print(f"status: {summary.status}")

records = load_records(OUT / summary.jsonl)
for lo in range(0, cfg.episodes, 150):
    chunk = records[lo:lo + 150]
    mix = Counter(
        "timeout" if r.kind == "timeout" else "".join(r.labels) for r in chunk
    )
    top = ", ".join(f"{k}:{v}" for k, v in mix.most_common(4))
    print(f"   episodes {lo:3d}-{lo + len(chunk) - 1}: {top}")

print(f"final-window commitment rates: agent1 {summary.final_points[0]}")
print(f"                               agent2 {summary.final_points[1]}")
rc = "undefined" if summary.rc is None else f"{summary.rc:.3f}"
print(f"coordinated reward over the tail: {rc} "
      f"({summary.rc_available} qualifying episodes)")
print(f"artifacts in {OUT}/: {summary.jsonl}, {', '.join(summary.svgs)}")
print("open the -phase.svg in a browser: each agent's path through the")
print("action simplex should end pinned to the A corner.")
