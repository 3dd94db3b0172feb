"""Run driver: config codec, seeded execution, artifacts, failure isolation."""

import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from firemen.experiment import (
    AccessPointConfig,
    AgentSpec,
    RunConfig,
    load_preset,
    load_records,
    pickup_q_series,
    preflight,
    run_access_point_study,
    run_config_from_mapping,
    run_config_to_mapping,
    run_experiment,
    shipped_presets,
)
from firemen.learners import ExplorationSchedule, IntervalConfig, NuiConfig
from firemen.metrics import EpisodeRecord

RANDOM = ExplorationSchedule(1.0, 1.0, 1.0)

TINY_AGENT = AgentSpec(
    algorithm="ddqn",
    alpha=1e-3,
    batch_size=8,
    replay_period=8,
    target_sync=64,
    memory_capacity=2000,
    schedule=RANDOM,
)


def tiny_cfg(name, **overrides):
    base = dict(
        name=name,
        layout="layout-1-mini",
        game="AFG-DET",
        agents=(TINY_AGENT, TINY_AGENT),
        episodes=12,
        seeds=(0, 1),
        window=6,
        tail=6,
        rate_window=6,
        conv_kernels=(4, 8),
        fc_width=32,
        step_limit=90,
    )
    base.update(overrides)
    return RunConfig(**base)


class TestConfigValidation:
    def test_window_bounded_by_episodes(self):
        with pytest.raises(ValueError):
            tiny_cfg("w", window=13)
        with pytest.raises(ValueError):
            tiny_cfg("w", tail=0)

    def test_unknown_algorithm(self):
        with pytest.raises(ValueError):
            AgentSpec(algorithm="sarsa")

    def test_rate_plot_needs_track_joint(self):
        with pytest.raises(ValueError):
            tiny_cfg("r", plots=("rate",))
        tiny_cfg("r", plots=("rate",), track_joint=("A", "A"))

    def test_unknown_plot_kind(self):
        with pytest.raises(ValueError):
            tiny_cfg("p", plots=("histogram",))

    def test_bad_track_joint(self):
        with pytest.raises(ValueError):
            tiny_cfg("t", track_joint=("A", "D"))

    def test_name_is_filename_safe(self):
        with pytest.raises(ValueError):
            tiny_cfg("a/b")
        with pytest.raises(ValueError):
            tiny_cfg("")

    def test_duplicate_seeds(self):
        with pytest.raises(ValueError):
            tiny_cfg("s", seeds=(3, 3))


class TestJsonCodec:
    def test_round_trip(self):
        cfg = tiny_cfg(
            "round", plots=("phase", "rate"), track_joint=("A", "A")
        )
        text = json.dumps(run_config_to_mapping(cfg))
        assert run_config_from_mapping(json.loads(text)) == cfg

    def test_single_agent_block_configures_both(self):
        data = run_config_to_mapping(tiny_cfg("solo"))
        data["agents"] = data["agents"][:1]
        cfg = run_config_from_mapping(data)
        assert cfg.agents[0] == cfg.agents[1] == TINY_AGENT

    def test_unknown_keys_rejected(self):
        data = run_config_to_mapping(tiny_cfg("k"))
        data["episodez"] = 5
        with pytest.raises(ValueError, match="episodez"):
            run_config_from_mapping(data)
        data = run_config_to_mapping(tiny_cfg("k2"))
        data["agents"][0]["bogus"] = 1
        with pytest.raises(ValueError, match="bogus"):
            run_config_from_mapping(data)

    def test_preflight_rejects_missing_pieces(self):
        with pytest.raises(FileNotFoundError):
            preflight(tiny_cfg("l", layout="no-such-layout"))
        with pytest.raises(KeyError):
            preflight(tiny_cfg("g", game="Chess"))


class TestPresets:
    def test_all_shipped_presets_load_and_preflight(self):
        names = shipped_presets()
        assert set(names) >= {
            "afg-det-nui-desk",
            "afg-ps-nui-desk",
            "afg-det-hysteretic-desk",
            "afg-det-nui-full",
            "afg-det-lenient-full",
            "access-points-full",
            "access-points-desk",
        }
        for name in names:
            cfg = load_preset(name)
            runs = cfg.expand() if isinstance(cfg, AccessPointConfig) else [cfg]
            for run in runs:
                preflight(run)

    def test_access_point_full_enumerates_four_layouts_twenty_seeds(self):
        cfg = load_preset("access-points-full")
        runs = cfg.expand()
        assert len(runs) == 4
        assert all(len(r.seeds) == 20 for r in runs)
        assert all(r.track_joint == ("A", "A") for r in runs)

    def test_unknown_preset(self):
        with pytest.raises(FileNotFoundError):
            load_preset("afg-imaginary")


class TestRunExperiment:
    def test_artifact_accounting(self, tmp_path):
        cfg = tiny_cfg("acc")
        result = run_experiment(cfg, tmp_path, workers=1)
        assert result.failed_seeds == ()
        files = {p.name for p in tmp_path.iterdir()}
        assert files == {
            "acc-seed0.jsonl",
            "acc-seed1.jsonl",
            "acc-summary.csv",
            "acc-meta.json",
        }
        for s in result.summaries:
            lines = open(s.jsonl).read().splitlines()
            assert len(lines) == cfg.episodes
            assert sum(s.outcomes.values()) == cfg.episodes

        header, *rows = open(result.csv_path).read().splitlines()
        assert header.startswith("seed,status,episodes,AA,AB,AC")
        assert len(rows) == 2
        meta = json.loads(result.meta_path.read_text())
        assert meta["coordinated_reward_excludes"] == ["AB", "BA", "timeout"]
        assert meta["config"]["episodes"] == cfg.episodes

    def test_records_are_valid_and_scheduled(self, tmp_path):
        schedule = ExplorationSchedule(1.0, 0.9, 0.1)
        cfg = tiny_cfg(
            "sched",
            agents=(
                AgentSpec(
                    algorithm="ddqn", batch_size=8, replay_period=8,
                    target_sync=64, memory_capacity=2000, schedule=schedule,
                ),
            ) * 2,
            seeds=(0,),
            episodes=8,
            window=4, tail=4, rate_window=4,
        )
        result = run_experiment(cfg, tmp_path, workers=1)
        records = load_records(result.summaries[0].jsonl)
        for rec in records:
            assert rec.run_id == "sched-seed0"
            assert 1 <= rec.steps <= 90
            assert rec.epsilon == schedule.epsilon(rec.episode)
        assert [r.episode for r in records] == list(range(8))

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = tiny_cfg("det", episodes=8, window=4, tail=4, rate_window=4)
        run_experiment(cfg, tmp_path / "a", workers=1)
        run_experiment(cfg, tmp_path / "b", workers=1)
        for seed in cfg.seeds:
            a = (tmp_path / "a" / f"det-seed{seed}.jsonl").read_bytes()
            b = (tmp_path / "b" / f"det-seed{seed}.jsonl").read_bytes()
            assert a == b

    def test_parallel_matches_inline(self, tmp_path):
        cfg = tiny_cfg("par", episodes=6, window=3, tail=3, rate_window=3)
        run_experiment(cfg, tmp_path / "inline", workers=1)
        run_experiment(cfg, tmp_path / "pool", workers=2)
        for seed in cfg.seeds:
            a = (tmp_path / "inline" / f"par-seed{seed}.jsonl").read_bytes()
            b = (tmp_path / "pool" / f"par-seed{seed}.jsonl").read_bytes()
            assert a == b

    def test_failure_aborts_that_seed_only(self, tmp_path, monkeypatch):
        import firemen.experiment as mod

        real = mod._play_seed

        def flaky(cfg, seed, out_dir):
            if seed == 1:
                raise RuntimeError("injected")
            return real(cfg, seed, out_dir)

        monkeypatch.setattr(mod, "_play_seed", flaky)
        cfg = tiny_cfg("flaky", episodes=6, window=3, tail=3, rate_window=3)
        result = run_experiment(cfg, tmp_path, workers=1)
        assert result.failed_seeds == (1,)
        ok, bad = result.summaries
        assert ok.status == "ok"
        assert bad.status == "failed: RuntimeError: injected"
        rows = open(result.csv_path).read().splitlines()
        assert len(rows) == 3  # header + both seeds, the failed one included


class TestProbeAndPlots:
    def test_pickup_probe_recorded(self, tmp_path):
        cfg = tiny_cfg(
            "probe",
            episodes=10,
            seeds=(0,),
            window=5, tail=5, rate_window=5,
            step_limit=150,
            probe_pickup_q=True,
            plots=("phase", "qvals", "rate"),
            track_joint=("A", "A"),
        )
        result = run_experiment(cfg, tmp_path, workers=1)
        records = load_records(result.summaries[0].jsonl)
        probed = [r for r in records if r.pickup_q[0] is not None]
        assert probed, "random walks should reach the dispensers sometimes"
        for rec in probed:
            probe = rec.pickup_q[0]
            assert len(probe) == 3
            picked = rec.labels[0]
            assert probe[("A", "B", "C").index(picked)] is not None
        # agents without a pickup carry no probe
        for rec in records:
            if rec.labels[1] is None:
                assert rec.pickup_q[1] is None

        svgs = result.summaries[0].svgs
        assert {p.rsplit("-", 1)[-1] for p in svgs} <= {
            "phase.svg", "rate.svg", "qvals.svg"
        }
        assert len(svgs) == 3
        for p in svgs:
            ET.parse(p)

    def test_pickup_q_series_layout(self):
        rec = EpisodeRecord(
            run_id="x", episode=2, labels=("B", "A"), kind="extinguished",
            reward=0.8, steps=9, epsilon=0.5,
            pickup_q=((None, 1.5, None), None),
        )
        series = pickup_q_series([rec], agent=0, episodes=4)
        assert set(series) == {"equipment A", "equipment B", "equipment C"}
        assert series["equipment B"][2] == 1.5
        assert np.isnan(series["equipment B"][[0, 1, 3]]).all()
        assert np.isnan(series["equipment A"]).all()


class TestNuiRun:
    def test_exploration_then_intervals_in_records(self, tmp_path):
        nui_agent = AgentSpec(
            algorithm="nui",
            batch_size=8,
            replay_period=8,
            target_sync=64,
            memory_capacity=2000,
            schedule=ExplorationSchedule(0.5, 1.0, 0.5),
            intervals=IntervalConfig(window=10, decay_threshold=5),
            nui=NuiConfig(
                episodes_per_label=4, init_episodes=1, exploration_cap=6
            ),
        )
        cfg = tiny_cfg(
            "nui",
            agents=(nui_agent, nui_agent),
            episodes=10,
            seeds=(0,),
            window=5, tail=5, rate_window=5,
            step_limit=120,
        )
        result = run_experiment(cfg, tmp_path, workers=1)
        records = load_records(result.summaries[0].jsonl)
        assert records[0].epsilon == 1.0  # uniform exploration phase
        late = records[-1]
        assert late.intervals[0] is not None
        assert set(late.intervals[0]) == {"A", "B", "C"}
        snap = late.intervals[0]["A"]
        assert set(snap) == {"min", "max", "window"}


class TestAccessPointStudy:
    def test_micro_sweep(self, tmp_path):
        cfg = AccessPointConfig(
            name="micro",
            layouts=("layout-1ap", "layout-2ap"),
            episodes=6,
            seeds=(0,),
            window=3, tail=3, rate_window=3,
            conv_kernels=(4, 8),
            fc_width=32,
            step_limit=60,
            agent=TINY_AGENT,
        )
        study = run_access_point_study(cfg, tmp_path, workers=1)
        assert len(study.results) == 2
        for res in study.results:
            assert res.failed_seeds == ()
        assert study.combined_svg is not None
        root = ET.parse(study.combined_svg).getroot()
        ns = {"s": "http://www.w3.org/2000/svg"}
        names = {
            e.get("data-name")
            for e in root.findall(".//s:polyline", ns)
            if e.get("class") == "series"
        }
        assert names == {"layout-1ap", "layout-2ap"}
