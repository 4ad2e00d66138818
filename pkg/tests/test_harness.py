import random

import numpy as np
import pytest

from voiclarify.engine import CostModel
from voiclarify.estimators.exact import ExactEstimator
from voiclarify.harness import (
    COMPARISON_COLUMNS,
    SUMMARY_COLUMNS,
    CalibrationBin,
    SummaryRow,
    SweepConfig,
    calibration_report,
    check_cost_monotonicity,
    compare_baselines,
    format_table,
    make_estimator,
    net_utility,
    run_episode,
    run_sweep,
    summarize,
    utility_curves,
)
from voiclarify.policies import PolicyConfig
from voiclarify.tasks import build_task, medical_task, toy_task

EST = ExactEstimator()


class TestNetUtility:
    def test_examples(self):
        assert net_utility(10, 8, 0.05) == pytest.approx(9.6)
        assert net_utility(1, 0, 0.2) == 1
        assert net_utility(1, 20, 0.1) == pytest.approx(-1.0)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            net_utility(1, -1, 0.1)


def small_config(**kw):
    base = dict(
        tasks=("medical",),
        policies=(PolicyConfig("voi"), PolicyConfig("fixed_round", k=2), PolicyConfig("confidence", tau=0.7)),
        costs=(0.05, 0.2),
        seeds=tuple(range(6)),
    )
    base.update(kw)
    return SweepConfig(**base)


class TestSweep:
    def test_single_cell_matches_episodes(self):
        cfg = SweepConfig(tasks=("medical",), policies=(PolicyConfig("voi"),), costs=(0.05,), seeds=(4,))
        res = run_sweep(cfg)
        log = run_episode(PolicyConfig("voi"), medical_task(), EST, 0.05, seed=4)
        assert res.logs[0].to_json() == log.to_json()
        (row,) = res.rows
        assert row.mean_net == log.net_utility and row.mean_turns == log.n_turns and row.episodes == 1

    def test_rows_are_cell_means(self):
        res = run_sweep(small_config())
        for row in res.rows:
            mine = [l for l in res.logs if l.task == row.task and l.policy_label == row.policy and l.cost == row.cost]
            assert row.episodes == len(mine) == 6
            assert row.mean_net == pytest.approx(np.mean([l.net_utility for l in mine]))
            assert row.mean_net == pytest.approx(row.mean_raw - row.mean_turns * row.cost)

    def test_order_independent(self):
        res = run_sweep(small_config())
        shuffled = list(res.logs)
        random.Random(0).shuffle(shuffled)
        assert summarize(shuffled) == res.rows

    def test_parallel_equals_serial(self):
        cfg = small_config(seeds=(0, 1, 2))
        a, b = run_sweep(cfg), run_sweep(cfg, workers=2)
        assert [l.to_json() for l in a.logs] == [l.to_json() for l in b.logs]

    def test_config_hash(self):
        cfg = small_config()
        again = SweepConfig.from_dict(cfg.to_dict())
        assert again == cfg and again.config_hash() == cfg.config_hash()
        assert small_config(costs=(0.05,)).config_hash() != cfg.config_hash()

    def test_common_seeds_across_policies(self):
        res = run_sweep(small_config())
        truths = {(l.seed, l.truth) for l in res.logs}
        assert len(truths) == 6

    def test_failed_cell_recorded(self):
        class Exploding(ExactEstimator):
            def prior(self, task):
                if task.name == "medical":
                    raise RuntimeError("boom")
                return super().prior(task)

        cfg = small_config(tasks=("mixed20q",), policies=(PolicyConfig("voi"),), costs=(0.1,), seeds=(0, 1))
        res = run_sweep(cfg, estimator=Exploding())
        assert len(res.failures) == 1 and res.failures[0].task == "medical"
        assert "boom" in res.failures[0].error
        assert {l.task for l in res.logs} == {"animal"}
        # no composite row without every part
        assert {r.task for r in res.rows} == {"animal"}

    def test_composite_row(self):
        cfg = SweepConfig(tasks=("mixed20q",), policies=(PolicyConfig("fixed_round", k=1),), costs=(0.1,), seeds=(0, 1, 2))
        rows = {r.task: r for r in run_sweep(cfg).rows}
        assert rows["mixed20q"].mean_net == pytest.approx(rows["animal"].mean_net + rows["medical"].mean_net)
        assert rows["mixed20q"].mean_turns == pytest.approx(2.0)
        assert rows["mixed20q"].accuracy == pytest.approx((rows["animal"].accuracy + rows["medical"].accuracy) / 2)

    def test_validation(self):
        with pytest.raises(ValueError):
            small_config(tasks=("chess",))
        with pytest.raises(ValueError):
            small_config(costs=())
        with pytest.raises(ValueError):
            small_config(costs=(-0.1,))

    def test_progress_callback(self):
        seen = []
        run_sweep(small_config(seeds=(0,)), progress=lambda i, n: seen.append((i, n)))
        assert seen[-1] == (6, 6)


def row(policy, kind, net, cost=0.1, param=None):
    return SummaryRow("t", policy, kind, param, cost, 10, 0.5, 1.0, net + 0.1, net, 0.0)


class TestComparisons:
    def test_best_and_second(self):
        rows = [row("a", "fixed_round", 0.3, param=1.0), row("b", "confidence", 0.5, param=0.5), row("c", "no_question", 0.1), row("voi", "voi", 0.45)]
        (cmp,) = compare_baselines(rows, "t")
        assert (cmp.best, cmp.second) == ("b", "a")
        assert cmp.delta_max == pytest.approx(-0.05) and cmp.delta_second == pytest.approx(0.15)

    def test_without_voi(self):
        (cmp,) = compare_baselines([row("a", "fixed_round", 0.3)], "t")
        assert cmp.r_voi is None and cmp.second == "a"

    def test_curves(self):
        rows = [row("a", "fixed_round", 0.3), row("b", "fixed_round", 0.1)]
        assert utility_curves(rows, "t", 0.1) == {"fixed_round": [(1.0, 0.1), (1.0, 0.3)]}

    def test_table(self):
        text = format_table([row("a", "fixed_round", 0.3)], SUMMARY_COLUMNS)
        header, line = text.strip().split("\n")
        assert header.split("\t") == list(SUMMARY_COLUMNS)
        assert line.split("\t")[2] == "NA" and "0.300000" in line

    def test_comparison_table_na(self):
        (cmp,) = compare_baselines([row("a", "fixed_round", 0.3)], "t")
        assert format_table([cmp], COMPARISON_COLUMNS).count("NA") == 3


class TestCalibration:
    def test_empty_bin_is_none(self):
        logs = [run_episode(PolicyConfig("no_question"), toy_task(), EST, 0.0, seed=s) for s in range(10)]
        bins = calibration_report(logs, 0.2)
        assert [b.count for b in bins] == [0, 0, 10, 0, 0]
        assert bins[0].accuracy is None and bins[0].gap is None

    def test_noiseless_point_mass(self):
        logs = [run_episode(PolicyConfig("fixed_round", k=1), toy_task(), EST, 0.0, seed=s) for s in range(20)]
        last = calibration_report(logs)[-1]
        assert last == CalibrationBin(0.8, 1.0, 20, 1.0, 1.0)

    def test_skips_failures(self):
        logs = [run_episode(PolicyConfig("adaptive"), toy_task(), EST, 0.0, seed=0)]
        assert sum(b.count for b in calibration_report(logs)) == 0

    def test_bin_width(self):
        with pytest.raises(ValueError):
            calibration_report([], 0.3)
        assert len(calibration_report([], 0.1)) == 10


def test_cost_monotonicity_on_medical():
    assert check_cost_monotonicity(medical_task(), EST, [0.01, 0.05, 0.2], range(10)) == []


def test_monotonicity_detects_violation(monkeypatch):
    import voiclarify.harness as harness

    real = harness.run_episode

    def fake(policy, task, est, c, k_max, seed):
        log = real(policy, task, est, c, k_max, seed)
        return log if c < 0.1 else real(PolicyConfig("fixed_round", k=3), task, est, c, k_max, seed)

    monkeypatch.setattr(harness, "run_episode", fake)
    assert harness.check_cost_monotonicity(toy_task(uninformative=True), EST, [0.05, 0.6], [0])


def test_make_estimator():
    assert make_estimator("exact").name == "exact"
    with pytest.raises(ValueError):
        make_estimator("oracle")


def test_run_episode_accepts_cost_model():
    a = run_episode(PolicyConfig("voi"), medical_task(), EST, CostModel(0.05), seed=1)
    b = run_episode(PolicyConfig("voi"), medical_task(), EST, 0.05, seed=1)
    assert a.to_json() == b.to_json()


def test_noise_override_reaches_tasks():
    task = build_task("medical", 0, 0.0)
    assert task.manifest["noise"] == 0.0 and set(np.unique(task.likelihood.table(1))) <= {0.0, 0.5, 1.0}
