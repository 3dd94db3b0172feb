"""Command-line front end.

Four subcommands cover the operational surface:

``firemen run <config>``
    Execute a run config (JSON file or shipped preset name) and write its
    JSONL record streams, summary CSV, metadata, and any requested SVGs.

``firemen plot <records.jsonl> --kind phase|scatter|rate|qvals``
    Re-derive a plot from a stored record stream.

``firemen verify``
    Run the acceptance test module from a source checkout and print a
    per-criterion pass/fail table.

``firemen games analyze <game>``
    Print the equilibrium analysis of a catalogue game (or any game file).
"""

from __future__ import annotations

import argparse
import json
import sys
from collections import Counter
from pathlib import Path

import numpy as np

from .games import analyze, load_catalogue
from .gridworld import EQUIPMENT
from .metrics import (
    outcome_bucket,
    rolling_action_distribution,
    rolling_joint_outcome_rate,
)
from .experiment import (
    AccessPointConfig,
    load_preset,
    load_records,
    load_run_config,
    pickup_q_series,
    run_access_point_study,
    run_experiment,
)
from .svgplot import emit_phase_plot, line_chart, scatter_plot

__all__ = ["main"]


def _cmd_run(args) -> int:
    source = Path(args.config)
    if source.exists():
        cfg = load_run_config(source)
    else:
        try:
            cfg = load_preset(args.config)
        except FileNotFoundError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
    out_dir = Path(args.out)

    if isinstance(cfg, AccessPointConfig):
        study = run_access_point_study(cfg, out_dir, args.workers)
        results = study.results
        if study.combined_svg:
            print(f"combined rate plot: {study.combined_svg}")
    else:
        results = (run_experiment(cfg, out_dir, args.workers),)

    failures = 0
    for result in results:
        print(f"{result.config.name}: summary {result.csv_path}")
        for s in result.summaries:
            if s.status != "ok":
                failures += 1
                print(f"  seed {s.seed}: {s.status}")
                continue
            top = ", ".join(
                f"{k}:{v}" for k, v in
                Counter(s.outcomes).most_common(3)
            )
            rc = f"{s.rc:.3f}" if s.rc is not None else "undefined"
            print(f"  seed {s.seed}: {top} | coordinated reward {rc}")
    return 1 if failures else 0


def _parse_joint(text: str) -> tuple[str, str]:
    parts = tuple(p.strip() for p in text.split(","))
    if len(parts) != 2 or any(u not in EQUIPMENT for u in parts):
        raise argparse.ArgumentTypeError(
            f"joint action must be two of {'/'.join(EQUIPMENT)}, e.g. A,A"
        )
    return parts


def _cmd_plot(args) -> int:
    records_path = Path(args.records)
    if not records_path.exists():
        print(f"error: no record file {records_path}", file=sys.stderr)
        return 2
    records = load_records(records_path)
    if not records:
        print("error: record stream is empty", file=sys.stderr)
        return 2
    out = (
        Path(args.out)
        if args.out
        else records_path.with_name(f"{records_path.stem}-{args.kind}.svg")
    )
    title = records[0].run_id

    if args.kind == "phase":
        window = min(args.window, len(records))
        dist = rolling_action_distribution(records, window)
        emit_phase_plot(dist.points, out, title=title)
    elif args.kind == "rate":
        window = min(args.window, len(records))
        rate = rolling_joint_outcome_rate(records, args.joint, window)
        u1, u2 = args.joint
        out.write_text(
            line_chart(
                {f"({u1},{u2})": rate},
                y_range=(0.0, 1.0),
                title=title,
                x_label="episode window",
                y_label="fraction of window",
            )
        )
    elif args.kind == "qvals":
        episodes = max(r.episode for r in records) + 1
        series = pickup_q_series(records, args.agent, episodes)
        if not any(np.isfinite(v).any() for v in series.values()):
            print(
                "error: no pickup Q-value probes in this stream "
                "(was the run configured with probe_pickup_q?)",
                file=sys.stderr,
            )
            return 2
        out.write_text(
            line_chart(
                series,
                title=f"{title} pickup Q-values (agent {args.agent + 1})",
                y_label="Q at pickup",
            )
        )
    else:  # scatter
        out.write_text(
            scatter_plot(
                [r.episode for r in records],
                [r.reward for r in records],
                classes=[outcome_bucket(r) for r in records],
                title=title,
                x_label="episode",
                y_label="episode return",
            )
        )
    print(out)
    return 0


# acceptance test functions are named test_ac<N>_...; group them per criterion
class _VerifyCollector:
    def __init__(self):
        self.outcomes: dict[str, str] = {}

    def pytest_runtest_logreport(self, report):
        if report.when == "call" or report.outcome == "failed":
            self.outcomes.setdefault(report.nodeid, report.outcome)
            if report.outcome == "failed":
                self.outcomes[report.nodeid] = "failed"


def _cmd_verify(args) -> int:
    import pytest

    path = Path(args.tests) / "test_acceptance.py"
    if not path.exists():
        print(
            f"error: {path} not found; run from a source checkout or pass "
            "--tests",
            file=sys.stderr,
        )
        return 2
    # repeated programmatic runs must not reuse a previously imported module
    sys.modules.pop("test_acceptance", None)
    collector = _VerifyCollector()
    code = pytest.main(
        ["-q", "-p", "no:cacheprovider", "--import-mode=importlib", str(path)],
        plugins=[collector],
    )

    criteria: dict[str, Counter] = {}
    for nodeid, outcome in sorted(collector.outcomes.items()):
        test_name = nodeid.rsplit("::", 1)[-1]
        key = "other"
        if test_name.startswith("test_ac"):
            digits = test_name[len("test_ac"):].split("_", 1)[0]
            if digits.isdigit():
                key = f"AC-{digits}"
        criteria.setdefault(key, Counter())[outcome] += 1

    width = max((len(k) for k in criteria), default=4)
    print()
    for key in sorted(criteria, key=lambda k: (len(k), k)):
        counts = criteria[key]
        ok = sum(v for o, v in counts.items() if o == "passed")
        total = sum(counts.values())
        status = "PASS" if ok == total else "FAIL"
        print(f"{key:<{width}}  {status}  ({ok}/{total} tests)")
    return int(code)


def _cmd_games_analyze(args) -> int:
    catalogue = load_catalogue(args.file)
    if args.game not in catalogue:
        print(
            f"error: unknown game {args.game!r}; have "
            f"{', '.join(sorted(catalogue))}",
            file=sys.stderr,
        )
        return 2
    report = analyze(catalogue[args.game])
    if args.json:
        print(json.dumps(report, indent=2))
        return 0

    labels = report["actions"]
    print(f"{report['game']}  (actions {', '.join(labels)})")
    print("\nexpected reward matrix:")
    print("      " + "".join(f"{u:>8}" for u in labels))
    for u, row in zip(labels, report["expected"]):
        print(f"   {u}  " + "".join(f"{v:8.2f}" for v in row))
    print("\naction quality (maximum / uniform-opponent average):")
    for u in labels:
        print(
            f"   {u}: {report['quality_max'][u]:.2f} / "
            f"{report['quality_average_uniform'][u]:.4f}"
        )
    joint = lambda pair: f"({pair[0]},{pair[1]})"
    print(
        "\npure Nash equilibria: "
        + (", ".join(joint(p) for p in report["pure_nash"]) or "none")
    )
    for entry in report["pareto_dominance"]:
        print(
            f"Pareto: {joint(entry['dominant'])} dominates "
            f"{joint(entry['dominated'])}"
        )
    for entry in report["shadowed"]:
        print(
            f"shadowed: {joint(entry['equilibrium'])} by {joint(entry['by'])}"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="firemen",
        description="Train independent learners on the firefighting "
        "gridworld and analyse the results.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a run config or preset")
    p_run.add_argument("config", help="JSON config path or shipped preset name")
    p_run.add_argument("--out", default="runs", help="output directory")
    p_run.add_argument(
        "--workers", type=int, default=None,
        help="worker processes (default: FIREMEN_WORKERS or 1)",
    )
    p_run.set_defaults(func=_cmd_run)

    p_plot = sub.add_parser("plot", help="render an SVG from a record stream")
    p_plot.add_argument("records", help="JSONL record file")
    p_plot.add_argument(
        "--kind", required=True, choices=("phase", "scatter", "rate", "qvals")
    )
    p_plot.add_argument("--out", default=None, help="output SVG path")
    p_plot.add_argument(
        "--window", type=int, default=1000,
        help="rolling window (phase/rate), capped at the stream length",
    )
    p_plot.add_argument(
        "--joint", type=_parse_joint, default=("A", "A"),
        help="joint action for --kind rate, e.g. A,A",
    )
    p_plot.add_argument(
        "--agent", type=int, default=0, choices=(0, 1),
        help="agent index for --kind qvals",
    )
    p_plot.set_defaults(func=_cmd_plot)

    p_verify = sub.add_parser(
        "verify", help="run the acceptance suite and tabulate criteria"
    )
    p_verify.add_argument(
        "--tests", default="tests", help="directory holding test_acceptance.py"
    )
    p_verify.set_defaults(func=_cmd_verify)

    p_games = sub.add_parser("games", help="strategic-form game tools")
    games_sub = p_games.add_subparsers(dest="games_command", required=True)
    p_analyze = games_sub.add_parser(
        "analyze", help="equilibrium / pathology report for one game"
    )
    p_analyze.add_argument("game", help="catalogue game name, e.g. Climb-DET")
    p_analyze.add_argument(
        "--file", default=None, help="alternative game catalogue file"
    )
    p_analyze.add_argument(
        "--json", action="store_true", help="machine-readable output"
    )
    p_analyze.set_defaults(func=_cmd_games_analyze)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
