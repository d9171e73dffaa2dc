import csv

import numpy as np
import pytest

from clusterreg import CGrid, MethodSpec, SimDesign, gen_dataset, make_design, run_study, summarize
from clusterreg.simulation import (
    AGGREGATE_COLUMNS,
    INTERCEPTS,
    REPLICATION_COLUMNS,
    SCENARIOS,
    SimResult,
    list_scenarios,
)

SMALL_GRID = CGrid.of([0.1, 1.0])


class TestSimDesign:
    def test_validation(self):
        with pytest.raises(ValueError):
            SimDesign(100, (0.5, 0.6), (4.0, 9.0))
        with pytest.raises(ValueError):
            SimDesign(100, (0.5, 0.5), (4.0,))
        with pytest.raises(ValueError):
            SimDesign(15, (0.5, 0.5), (4.0, 9.0))

    def test_twelve_named_scenarios(self):
        entries = list_scenarios()
        assert len(entries) == 12  # 6 proportion vectors x 2 sample sizes
        assert len(SCENARIOS) == 6
        names = {e["scenario"] for e in entries}
        assert "g2-even-n100" in names and "g4-uneven-n200" in names

    def test_make_design(self):
        design = make_design("g3-b", 200, replications=7, seed=3)
        assert design.proportions == (0.2, 0.3, 0.5)
        assert design.intercepts == (4.0, 9.0, 16.0)
        assert design.scenario == "g3-b-n200"
        assert design.replications == 7


class TestGenDataset:
    def test_bitwise_reproducible(self):
        design = make_design("g2-even", 100, seed=9)
        d1, p1, l1 = gen_dataset(design, 5)
        d2, p2, l2 = gen_dataset(design, 5)
        np.testing.assert_array_equal(d1.y, d2.y)
        np.testing.assert_array_equal(d1.X, d2.X)
        np.testing.assert_array_equal(p1.coefficients, p2.coefficients)
        np.testing.assert_array_equal(l1, l2)
        d3, _, _ = gen_dataset(design, 6)
        assert not np.array_equal(d1.y, d3.y)

    def test_intercepts_fixed_by_scenario(self):
        design = make_design("g3-a", 100, seed=1)
        _, params, _ = gen_dataset(design, 0)
        np.testing.assert_array_equal(params.coefficients[:, 0], [4.0, 9.0, 16.0])
        assert params.coefficients.shape == (3, 4)  # intercept + 3 regressors

    def test_class_shares_follow_proportions(self):
        design = SimDesign(100_000, (0.5, 0.5), (4.0, 9.0), seed=2)
        _, _, labels = gen_dataset(design, 0)
        assert np.bincount(labels, minlength=2)[0] / 100_000 == pytest.approx(0.5, abs=0.01)

    def test_variance_draws_have_inverse_gamma_mean(self):
        # Inv-Gamma(3, 1) mean = scale / (shape - 1) = 0.5
        design = SimDesign(40, (0.25, 0.25, 0.25, 0.25), (4.0, 9.0, 16.0, 25.0), seed=7)
        draws = np.concatenate(
            [gen_dataset(design, rep)[1].variances for rep in range(20_000)]
        )
        assert draws.mean() == pytest.approx(0.5, abs=0.02)

    def test_labels_match_generating_component(self):
        # intercept gaps of 100 dwarf every other term: the generating
        # component must give the smallest residual pointwise
        design = SimDesign(60, (0.3, 0.3, 0.4), (0.0, 100.0, 200.0), seed=5)
        data, params, labels = gen_dataset(design, 3)
        resid = np.abs(data.y[:, None] - data.X @ params.coefficients.T)
        np.testing.assert_array_equal(np.argmin(resid, axis=1), labels)

    def test_slopes_within_uniform_range(self):
        design = make_design("g2-even", 100, seed=4)
        _, params, _ = gen_dataset(design, 0)
        slopes = params.coefficients[:, 1:]
        assert np.all(slopes >= -1.5) and np.all(slopes <= 1.5)


def tiny_design(reps=2, n=60, seed=0):
    return SimDesign(n, (0.5, 0.5), (4.0, 9.0), replications=reps, n_starts=3, seed=seed, scenario="tiny")


class TestRunStudy:
    def test_record_count_and_columns(self):
        result = run_study([tiny_design(reps=2)], [MethodSpec("hom")], mode="fixed")
        assert len(result.records) == 2
        for rec in result.records:
            assert rec["method"] == "HomN"
            assert rec["mse_beta"] is not None
            assert rec["adj_rand"] is not None
            assert rec["chosen_g"] is None
            assert rec["c"] is None

    def test_aggregate_is_arithmetic_mean(self):
        result = run_study([tiny_design(reps=3)], [MethodSpec("het")], mode="fixed")
        agg = result.aggregate()[0]
        assert agg["mse_beta"] == pytest.approx(np.mean([r["mse_beta"] for r in result.records]))
        assert agg["adj_rand"] == pytest.approx(np.mean([r["adj_rand"] for r in result.records]))
        assert agg["replications"] == 3

    def test_multiple_methods_interleave(self):
        result = run_study([tiny_design(reps=2)], [MethodSpec("hom"), MethodSpec("het")], mode="fixed")
        assert len(result.records) == 4
        assert [r["method"] for r in result.records] == ["HomN", "HetN", "HomN", "HetN"]

    def test_select_mode_records_chosen_g(self):
        result = run_study([tiny_design(reps=2, n=80)], [MethodSpec("het")], mode="select")
        for rec in result.records:
            assert rec["chosen_g"] in {1, 2, 3, 4}
            if rec["chosen_g"] != 2:
                assert rec["mse_beta"] is None

    def test_thread_invariance_modulo_wall_time(self):
        design = tiny_design(reps=3)
        a = run_study([design], [MethodSpec("hom"), MethodSpec("conk")], mode="fixed", grid=SMALL_GRID)
        b = run_study([design], [MethodSpec("hom"), MethodSpec("conk")], mode="fixed", grid=SMALL_GRID, threads=2)
        for ra, rb in zip(a.records, b.records):
            for key in ra:
                if key == "time_s":
                    continue
                assert ra[key] == rb[key], key

    def test_csv_outputs(self, tmp_path):
        design = tiny_design(reps=2)
        run_study([design], [MethodSpec("hom"), MethodSpec("het")], mode="fixed", out_dir=tmp_path)
        with open(tmp_path / "replications.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == REPLICATION_COLUMNS
        assert len(rows) == 1 + 4
        with open(tmp_path / "aggregate.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == AGGREGATE_COLUMNS
        assert len(rows) == 1 + 2

    def test_replication_failure_recorded_not_raised(self, monkeypatch):
        from clusterreg import simulation as sim_mod

        def boom(*a, **k):
            raise RuntimeError("synthetic crash")

        monkeypatch.setattr(sim_mod, "fit_method", boom)
        result = run_study([tiny_design(reps=2)], [MethodSpec("hom")], mode="fixed")
        assert len(result.records) == 2
        assert all("synthetic crash" in r["error"] for r in result.records)
        assert all(r["adj_rand"] is None for r in result.records)


class TestSummarize:
    def test_empty_result(self):
        assert summarize(SimResult([])) == "\n"

    def test_single_record_aggregates_to_itself(self):
        result = run_study([tiny_design(reps=1)], [MethodSpec("hom")], mode="fixed")
        agg = result.aggregate()[0]
        rec = result.records[0]
        assert agg["mse_beta"] == rec["mse_beta"]
        assert agg["adj_rand"] == rec["adj_rand"]
        text = summarize(result)
        assert "tiny" in text and "HomN" in text

    def test_correct_g_proportion_hand_count(self):
        records = []
        for rep, chosen in enumerate([2, 2, 3, 2, 1]):
            records.append(
                {
                    "scenario": "s",
                    "rep": rep,
                    "method": "HetN",
                    "mse_beta": None,
                    "mse_sigma2": None,
                    "adj_rand": 0.9,
                    "time_s": 0.1,
                    "c": None,
                    "chosen_g": chosen,
                    "g_true": 2,
                }
            )
        result = SimResult(records)
        assert result.aggregate()[0]["prop_correct_g"] == pytest.approx(3 / 5)
        assert result.g_histogram()[("s", "HetN")] == {1: 1, 2: 3, 3: 1}
