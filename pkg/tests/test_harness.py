import csv
import json

import numpy as np
import pytest

from cryoplan.atlas import new_episode
from cryoplan.classifier import ClassifierModel, predict_all
from cryoplan.datagen import generate, y1_config
from cryoplan.harness import (
    GaRunner,
    GreedyRunner,
    RandomRunner,
    SaRunner,
    canonical_digest,
    compare,
    export_visit_graph,
    run_trials,
    write_curves_csv,
    write_report_csv,
    write_report_json,
    write_visits_csv,
)
from cryoplan.baselines import GaConfig, SaConfig

from conftest import build_dataset


@pytest.fixture(scope="module")
def y1_world():
    ds = generate(y1_config(3))
    pt = predict_all(ds, ClassifierModel.from_preset("gt"))
    return ds, pt


class TestRunTrials:
    def test_random_precision_near_base_rate(self, y1_world):
        ds, pt = y1_world
        report, _ = run_trials(RandomRunner(), ds, pt, budgets=[240.0], trials=50, seed=1)
        base = float(ds.is_low().mean())
        assert report.result_at(240.0).precision == pytest.approx(base, abs=0.05)

    def test_single_trial_zero_std(self, y1_world):
        ds, pt = y1_world
        report, _ = run_trials(GreedyRunner(), ds, pt, budgets=[120.0], trials=1, seed=2)
        assert report.result_at(120.0).std_lctf == 0.0

    def test_mean_std_match_recount(self, y1_world):
        ds, pt = y1_world
        report, _ = run_trials(RandomRunner(), ds, pt, budgets=[120.0], trials=10, seed=3)
        res = report.result_at(120.0)
        assert res.mean_lctf == pytest.approx(np.mean(res.lctf_per_trial))
        assert res.std_lctf == pytest.approx(np.std(res.lctf_per_trial))
        assert res.mean_visited == pytest.approx(np.mean(res.visited_per_trial))

    def test_curves_monotone_time_and_bounded(self, y1_world):
        ds, pt = y1_world
        report, _ = run_trials(GreedyRunner(), ds, pt, budgets=[120.0], trials=5, seed=4)
        curve = report.result_at(120.0).curve
        minutes = [m for m, _ in curve]
        fracs = [f for _, f in curve]
        assert minutes == sorted(minutes)
        assert all(0.0 <= f <= 1.0 for f in fracs)

    def test_deterministic_modulo_runtime(self, y1_world):
        ds, pt = y1_world
        r1, _ = run_trials(RandomRunner(), ds, pt, budgets=[120.0], trials=5, seed=5)
        r2, _ = run_trials(RandomRunner(), ds, pt, budgets=[120.0], trials=5, seed=5)
        assert r1.result_at(120.0).lctf_per_trial == r2.result_at(120.0).lctf_per_trial


class TestCompare:
    def test_paired_seeding_same_policy_identical_rows(self, y1_world):
        ds, pt = y1_world
        class Greedy2(GreedyRunner):
            name = "greedy2"

        result = compare(
            [GreedyRunner(), Greedy2()], ds, pt, budgets=[120.0], trials=5, seed=6
        )
        a, b = result.reports
        assert a.result_at(120.0).lctf_per_trial == b.result_at(120.0).lctf_per_trial

    def test_sorted_by_final_budget_yield(self, y1_world):
        ds, pt = y1_world
        result = compare(
            [RandomRunner(), GreedyRunner()], ds, pt, budgets=[60.0, 120.0], trials=5, seed=7
        )
        means = [r.result_at(120.0).mean_lctf for r in result.reports]
        assert means == sorted(means, reverse=True)

    def test_empty_policy_list_rejected(self, y1_world):
        ds, pt = y1_world
        with pytest.raises(ValueError):
            compare([], ds, pt)

    def test_json_and_csv_numbers_identical(self, y1_world, tmp_path):
        ds, pt = y1_world
        result = compare([GreedyRunner(), RandomRunner()], ds, pt, budgets=[60.0], trials=3, seed=8)
        jp, cp_ = tmp_path / "report.json", tmp_path / "report.csv"
        write_report_json(result, jp)
        write_report_csv(result, cp_)
        blob = json.loads(jp.read_text())
        by_policy = {p["policy"]: p for p in blob["policies"]}
        with cp_.open() as fh:
            for row in csv.DictReader(fh):
                jrow = by_policy[row["policy"]]["budgets"][0]
                assert float(row["mean_lctf"]) == jrow["mean_lctf"]
                assert float(row["std_lctf"]) == jrow["std_lctf"]
                assert float(row["precision"]) == jrow["precision"]

    def test_ga_sa_runners_integrate(self):
        ds = build_dataset(
            {
                "G0": {"S0": {"P0": [4.0, 4.1, 9.0], "P1": [4.2, 4.3, 4.4]}},
                "G1": {"S0": {"P0": [4.5, 9.1, 9.2]}},
            }
        )
        pt = predict_all(ds, ClassifierModel.from_preset("gt"))
        result = compare(
            [GaRunner(GaConfig(generations=5, seed=1)), SaRunner(SaConfig(seed=1))],
            ds,
            pt,
            budgets=[20.0],
            trials=3,
            seed=9,
        )
        for report in result.reports:
            assert report.result_at(20.0).mean_lctf > 0


class TestVisitGraph:
    def test_single_patch_trajectory_no_pairs(self, two_patch_dataset):
        ds = two_patch_dataset
        st = new_episode(ds, "G0-S0-P0-H00", 10.0)
        st.step("G0-S0-P0-H01")
        st.step("G0-S0-P0-H02")
        graph = export_visit_graph([st])
        assert graph.edges == {}

    def test_alternating_patches_weight_two(self, two_patch_dataset):
        ds = two_patch_dataset
        st = new_episode(ds, "G0-S0-P0-H00", 30.0)
        st.step("G0-S0-P0-H01")   # stay in P0
        st.step("G0-S0-P1-H00")   # -> P1
        st.step("G0-S0-P0-H02")   # -> P0
        graph = export_visit_graph([st])
        assert graph.edges == {("G0-S0-P0", "G0-S0-P1"): 2}

    def test_weights_symmetric_by_construction(self, two_patch_dataset):
        ds = two_patch_dataset
        st = new_episode(ds, "G0-S0-P0-H00", 30.0)
        st.step("G0-S0-P1-H00")
        st.step("G0-S0-P0-H01")
        graph = export_visit_graph([st])
        (a, b), = graph.edges.keys()
        assert a <= b

    def test_node_quality_is_true_low_count(self, two_patch_dataset):
        ds = two_patch_dataset
        st = new_episode(ds, "G0-S0-P0-H00", 10.0)
        st.step("G0-S0-P0-H01")
        graph = export_visit_graph([st])
        assert graph.node_low_counts == {"G0-S0-P0": 3, "G0-S0-P1": 3}

    def test_visits_csv_format(self, two_patch_dataset, tmp_path):
        ds = two_patch_dataset
        st = new_episode(ds, "G0-S0-P0-H00", 30.0)
        st.step("G0-S0-P1-H00")
        st.step("G0-S0-P0-H01")
        st.step("G0-S0-P1-H01")
        path = tmp_path / "visits.csv"
        write_visits_csv(export_visit_graph([st]), path)
        rows = path.read_text().splitlines()
        assert rows[0] == "patch_a,patch_b,weight"
        assert rows[1] == "G0-S0-P0,G0-S0-P1,2"


class TestCanonicalDigest:
    def test_ignores_runtime_fields(self, y1_world):
        ds, pt = y1_world
        r1 = compare([RandomRunner()], ds, pt, budgets=[60.0], trials=3, seed=10)
        r2 = compare([RandomRunner()], ds, pt, budgets=[60.0], trials=3, seed=10)
        d1, d2 = r1.to_dict(), r2.to_dict()
        # Wall clock differs between the runs; the digest must not.
        assert d1["policies"][0]["budgets"][0]["runtime_seconds"] != d2["policies"][0]["budgets"][0]["runtime_seconds"]
        assert canonical_digest(d1) == canonical_digest(d2)

    def test_sensitive_to_results(self, y1_world):
        ds, pt = y1_world
        r1 = compare([RandomRunner()], ds, pt, budgets=[60.0], trials=3, seed=10)
        r2 = compare([RandomRunner()], ds, pt, budgets=[60.0], trials=3, seed=11)
        assert canonical_digest(r1.to_dict()) != canonical_digest(r2.to_dict())

    def test_curves_csv_written(self, y1_world, tmp_path):
        ds, pt = y1_world
        result = compare([RandomRunner()], ds, pt, budgets=[60.0], trials=2, seed=12)
        path = tmp_path / "curve.csv"
        write_curves_csv(result, path)
        header = path.read_text().splitlines()[0]
        assert header == "policy,budget,elapsed_minute,cumulative_low_fraction"
