"""Metrics over episode records: simplex windows, coordinated-reward
averages, joint-outcome rates, and the record type itself."""

import numpy as np
import pytest

from firemen.metrics import (
    CoordinatedReward,
    EpisodeRecord,
    average_coordinated_reward,
    count_outcomes,
    is_miscoordination,
    outcome_bucket,
    rolling_action_distribution,
    rolling_joint_outcome_rate,
)


def rec(i, labels, kind="extinguished", reward=0.0, **kw):
    return EpisodeRecord(
        run_id="r0", episode=i, labels=labels, kind=kind,
        reward=reward, steps=5, epsilon=0.1, **kw,
    )


class TestEpisodeRecord:
    def test_validation(self):
        with pytest.raises(ValueError):
            rec(0, ("A", "A"), kind="exploded")
        with pytest.raises(ValueError):
            rec(0, ("A", "D"))
        with pytest.raises(ValueError):
            rec(0, ("A", None))  # extinguishing needs both equipped
        with pytest.raises(ValueError):
            rec(0, ("A", "A"), reward=float("nan"))
        with pytest.raises(ValueError):
            EpisodeRecord(
                run_id="r", episode=0, labels=("A", "A"),
                kind="extinguished", reward=0.0, steps=0, epsilon=0.1,
            )
        with pytest.raises(ValueError):
            EpisodeRecord(
                run_id="r", episode=0, labels=("A", "A"),
                kind="extinguished", reward=0.0, steps=5, epsilon=1.5,
            )

    def test_timeout_may_carry_partial_labels(self):
        r = rec(3, ("B", None), kind="timeout", reward=-1.0)
        assert r.labels == ("B", None)

    def test_json_round_trip(self):
        r = rec(
            7, ("A", "B"), reward=-1.0,
            intervals=({"A": {"min": 0.1, "max": 0.8, "window": 3}}, None),
            pickup_q=((0.1, 0.2, 0.3, 0.4, 0.5), None),
        )
        back = EpisodeRecord.from_json(r.to_json())
        assert back == r

    def test_json_is_stable(self):
        r = rec(1, ("C", "C"), reward=0.4)
        assert r.to_json() == r.to_json()
        assert r.to_json().index('"run_id"') < r.to_json().index('"episode"')


class TestOutcomeClassification:
    def test_miscoordination_set(self):
        assert is_miscoordination(rec(0, ("A", "B"), reward=-1.0))
        assert is_miscoordination(rec(0, ("B", "A"), reward=-1.0))
        assert is_miscoordination(rec(0, (None, None), kind="timeout"))
        assert is_miscoordination(rec(0, ("A", "A"), kind="timeout"))
        assert not is_miscoordination(rec(0, ("A", "A"), reward=0.8))
        # mixed-but-unpunished pairs are poor coordination, not
        # miscoordination
        assert not is_miscoordination(rec(0, ("A", "C")))
        assert not is_miscoordination(rec(0, ("B", "C"), reward=0.5))

    def test_buckets_partition_episodes(self):
        records = [
            rec(0, ("A", "A"), reward=0.8),
            rec(1, ("A", "B"), reward=-1.0),
            rec(2, ("B", "A"), reward=-1.0),
            rec(3, ("C", None), kind="timeout", reward=-1.0),
            rec(4, ("A", "A"), reward=0.8),
        ]
        assert outcome_bucket(records[0]) == "AA"
        assert outcome_bucket(records[1]) == "AB"
        assert outcome_bucket(records[3]) == "timeout"
        counts = count_outcomes(records)
        assert counts == {"AA": 2, "AB": 1, "BA": 1, "timeout": 1}
        assert sum(counts.values()) == len(records)


class TestRollingActionDistribution:
    def test_all_a_is_the_corner(self):
        records = [rec(i, ("A", "A"), reward=0.8) for i in range(50)]
        dist = rolling_action_distribution(records, window=10)
        assert dist.points.shape == (41, 2, 3)
        assert np.array_equal(
            dist.points, np.tile([1.0, 0.0, 0.0], (41, 2, 1))
        )
        assert not dist.unclassified.any()

    def test_alternating_a_b_with_window_1000(self):
        records = [
            rec(i, ("A", "A") if i % 2 == 0 else ("B", "B"))
            for i in range(2000)
        ]
        dist = rolling_action_distribution(records, window=1000)
        assert np.allclose(dist.points[:, :, 0], 0.5)
        assert np.allclose(dist.points[:, :, 1], 0.5)
        assert np.all(dist.points[:, :, 2] == 0.0)

    def test_unclassified_excluded_but_counted(self):
        records = [
            rec(0, ("A", "C")),
            rec(1, (None, "C"), kind="timeout"),
            rec(2, ("A", "C")),
            rec(3, (None, "C"), kind="timeout"),
        ]
        dist = rolling_action_distribution(records, window=4)
        assert np.array_equal(dist.points[0, 0], [1.0, 0.0, 0.0])
        assert np.array_equal(dist.points[0, 1], [0.0, 0.0, 1.0])
        assert np.array_equal(dist.unclassified, [[2, 0]])

    def test_fully_unclassified_window_is_nan(self):
        records = [
            rec(i, (None, None), kind="timeout") for i in range(5)
        ]
        dist = rolling_action_distribution(records, window=5)
        assert np.isnan(dist.points).all()
        assert np.array_equal(dist.unclassified, [[5, 5]])

    def test_simplex_rows_sum_to_one(self):
        rng = np.random.default_rng(0)
        labels = ["A", "B", "C", None]
        records = [
            rec(
                i,
                (labels[rng.integers(4)], labels[rng.integers(3)]),
                kind="timeout",
            )
            for i in range(300)
        ]
        dist = rolling_action_distribution(records, window=40)
        sums = dist.points.sum(axis=2)
        defined = ~np.isnan(sums)
        assert np.abs(sums[defined] - 1.0).max() < 1e-9
        # first-window unclassified count matches a direct recount
        direct = sum(1 for r in records[:40] if r.labels[0] is None)
        assert dist.unclassified[0, 0] == direct

    def test_window_validation(self):
        records = [rec(i, ("A", "A")) for i in range(5)]
        with pytest.raises(ValueError):
            rolling_action_distribution(records, window=6)
        with pytest.raises(ValueError):
            rolling_action_distribution(records, window=0)

    def test_final_point_accessor(self):
        records = [rec(i, ("A", "B")) for i in range(10)]
        dist = rolling_action_distribution(records, window=10)
        assert np.array_equal(dist.final_point(0), [1.0, 0.0, 0.0])
        assert np.array_equal(dist.final_point(1), [0.0, 1.0, 0.0])


class TestAverageCoordinatedReward:
    def test_det_optimal_tail_scores_exactly(self):
        records = [rec(i, ("A", "A"), reward=0.8) for i in range(1500)]
        rc = average_coordinated_reward(records, tail=1000)
        assert rc.value == 0.8
        assert rc.defined and rc.available == 1000

    def test_shadow_tail_scores_exactly(self):
        records = [rec(i, ("C", "C"), reward=0.4) for i in range(1200)]
        assert average_coordinated_reward(records).value == 0.4

    def test_mixed_halves(self):
        records = []
        for i in range(500):
            records.append(rec(2 * i, ("A", "A"), reward=0.8))
            records.append(rec(2 * i + 1, ("B", "C"), reward=0.5))
        rc = average_coordinated_reward(records, tail=1000)
        assert rc.value == pytest.approx(0.65, abs=1e-12)

    def test_miscoordination_is_skipped_not_averaged(self):
        records = [rec(i, ("A", "A"), reward=0.8) for i in range(1000)]
        records += [
            rec(1000 + i, ("A", "B"), reward=-1.0) for i in range(40)
        ]
        records += [
            rec(1040 + i, (None, None), kind="timeout", reward=-1.0)
            for i in range(40)
        ]
        rc = average_coordinated_reward(records, tail=1000)
        assert rc.value == 0.8

    def test_scan_reaches_back_past_the_window(self):
        records = [rec(i, ("C", "C"), reward=0.5) for i in range(600)]
        records += [rec(600 + i, ("A", "A"), reward=0.8) for i in range(700)]
        records += [rec(1300 + i, ("B", "A"), reward=-1.0) for i in range(300)]
        rc = average_coordinated_reward(records, tail=1000)
        assert rc.value == pytest.approx((700 * 0.8 + 300 * 0.5) / 1000, abs=1e-12)

    def test_insufficient_coordination_is_undefined_with_count(self):
        records = [rec(i, ("A", "A"), reward=0.8) for i in range(800)]
        records += [rec(800 + i, ("A", "B"), reward=-1.0) for i in range(400)]
        rc = average_coordinated_reward(records, tail=1000)
        assert rc.value is None
        assert not rc.defined
        assert rc.requested == 1000
        assert rc.available == 800

    def test_tail_validation(self):
        with pytest.raises(ValueError):
            average_coordinated_reward([], tail=0)


class TestRollingJointOutcomeRate:
    def test_all_and_none(self):
        aa = [rec(i, ("A", "A"), reward=0.8) for i in range(40)]
        assert np.array_equal(
            rolling_joint_outcome_rate(aa, ("A", "A"), window=10),
            np.ones(31),
        )
        assert np.array_equal(
            rolling_joint_outcome_rate(aa, ("B", "B"), window=10),
            np.zeros(31),
        )

    def test_alternating_pairs(self):
        records = [
            rec(i, ("A", "A") if i % 2 == 0 else ("B", "B"))
            for i in range(300)
        ]
        rate = rolling_joint_outcome_rate(records, ("A", "A"), window=100)
        assert np.allclose(rate, 0.5)

    def test_timeouts_never_match(self):
        records = [
            rec(i, ("A", "A"), kind="timeout", reward=-1.0) for i in range(20)
        ]
        rate = rolling_joint_outcome_rate(records, ("A", "A"), window=5)
        assert np.array_equal(rate, np.zeros(16))

    def test_short_input_yields_empty(self):
        records = [rec(0, ("A", "A"))]
        assert rolling_joint_outcome_rate(records, ("A", "A"), window=5).size == 0

    def test_bad_joint_action(self):
        with pytest.raises(ValueError):
            rolling_joint_outcome_rate([], ("A", "Z"), window=5)


class TestCoordinatedRewardType:
    def test_defined_flag(self):
        assert CoordinatedReward(0.5, 10, 10).defined
        assert not CoordinatedReward(None, 10, 3).defined
