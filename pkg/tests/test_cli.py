import csv
import json
import re
import subprocess
import sys

import numpy as np
import pytest

from clusterreg.cli import main

from conftest import two_group_data


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return str(path)


@pytest.fixture
def two_group_csv(tmp_path):
    data, _, _ = two_group_data(n=120, seed=44)
    rows = [[y, x] for y, x in zip(data.y, data.X[:, 1])]
    return write_csv(tmp_path / "groups.csv", ["outcome", "x1"], rows)


def run_cli(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestFit:
    def test_hom_g1_exact_line_hits_floor(self, tmp_path, capsys):
        path = write_csv(tmp_path / "line.csv", ["y", "x"], [[1.0, 0.0], [3.0, 1.0], [5.0, 2.0]])
        code, out, _ = run_cli(capsys, ["fit", path, "--response", "y", "--method", "hom", "--g", "1"])
        assert code == 0
        payload = json.loads(out)
        assert payload["coefficients"][0] == pytest.approx([1.0, 2.0], abs=1e-6)
        assert payload["variances"][0] < 1e-10  # at the degeneracy floor
        assert payload["degenerate"] is True

    def test_conk_byte_identical_across_runs_and_threads(self, two_group_csv, capsys):
        argv = ["fit", two_group_csv, "--response", "outcome", "--method", "conk",
                "--g", "2", "--k", "n5", "--seed", "7", "--grid", "0.1,0.5,1.0"]
        _, out1, _ = run_cli(capsys, argv)
        _, out2, _ = run_cli(capsys, argv)
        _, out8, _ = run_cli(capsys, argv + ["--threads", "8"])
        assert out1 == out2 == out8

    def test_conc_on_seven_covariate_data_gives_2x8_matrix(self, tmp_path, capsys):
        rng = np.random.default_rng(3)
        n = 80
        X = rng.standard_normal((n, 7))
        y = 20.0 + X @ rng.uniform(-1, 1, 7) + rng.normal(size=n)
        y[: n // 2] -= 12.0
        header = ["mpg", "acceleration", "cylinders", "displacement", "horsepower", "model_year", "weight", "origin"]
        path = write_csv(tmp_path / "mpg.csv", header, np.column_stack([y, X]).tolist())
        code, out, _ = run_cli(
            capsys,
            ["fit", path, "--response", "mpg", "--method", "conc", "--g", "2",
             "--grid", "0.3,1.0", "--cv-m", "3", "--starts", "3"],
        )
        assert code == 0
        payload = json.loads(out)
        coef = np.asarray(payload["coefficients"])
        assert coef.shape == (2, 8)
        assert payload["regressors"] == header[1:]

    def test_posteriors_flag(self, two_group_csv, capsys):
        argv = ["fit", two_group_csv, "--response", "outcome", "--method", "het", "--g", "2", "--posteriors"]
        code, out, _ = run_cli(capsys, argv)
        post = np.asarray(json.loads(out)["posteriors"])
        assert post.shape == (120, 2)
        np.testing.assert_allclose(post.sum(axis=1), 1.0, atol=1e-9)

    def test_round_trip_params_in_reproduces_loglik(self, two_group_csv, tmp_path, capsys):
        argv = ["fit", two_group_csv, "--response", "outcome", "--method", "het", "--g", "2",
                "--out", str(tmp_path / "fit.json")]
        assert run_cli(capsys, argv)[0] == 0
        with open(tmp_path / "fit.json") as fh:
            fitted = json.load(fh)
        code, out, _ = run_cli(
            capsys,
            ["fit", two_group_csv, "--response", "outcome", "--params-in", str(tmp_path / "fit.json")],
        )
        assert code == 0
        evaluated = json.loads(out)
        assert evaluated["method"] == "eval"
        assert abs(evaluated["loglik"] - fitted["loglik"]) < 1e-10
        assert evaluated["labels"] == fitted["labels"]

    def test_missing_response_column_fails_cleanly(self, two_group_csv, capsys):
        code, out, err = run_cli(capsys, ["fit", two_group_csv, "--response", "nope", "--g", "2"])
        assert code == 1
        assert out == ""
        assert "nope" in err

    def test_unknown_flag_rejected(self, two_group_csv):
        with pytest.raises(SystemExit) as exc:
            main(["fit", two_group_csv, "--response", "outcome", "--g", "2", "--frobnicate"])
        assert exc.value.code == 2


class TestTune:
    def test_single_point_grid_chooses_it(self, two_group_csv, capsys):
        code, out, _ = run_cli(
            capsys,
            ["tune", two_group_csv, "--response", "outcome", "--method", "conk", "--g", "2", "--grid", "1.0"],
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["chosen_c"] == 1.0
        assert len(payload["criterion_curve"]) == 1

    def test_curve_length_matches_grid(self, two_group_csv, capsys):
        code, out, _ = run_cli(
            capsys,
            ["tune", two_group_csv, "--response", "outcome", "--method", "conk", "--g", "2",
             "--grid", "0.05,0.2,0.7,1.0"],
        )
        payload = json.loads(out)
        assert [c for c, _ in payload["criterion_curve"]] == [0.05, 0.2, 0.7, 1.0]

    def test_conk_faster_than_conc_on_same_data(self, two_group_csv, capsys):
        def wall_time(argv):
            code, _, err = run_cli(capsys, argv)
            assert code == 0
            return float(re.search(r"completed in ([0-9.]+)s", err).group(1))

        base = ["tune", two_group_csv, "--response", "outcome", "--g", "2", "--grid", "0.1,0.5,1.0", "--starts", "3"]
        t_conc = wall_time(base + ["--method", "conc"])
        t_conk = wall_time(base + ["--method", "conk"])
        assert 0.0 < t_conk < t_conc


class TestSelect:
    def test_degenerate_range(self, two_group_csv, capsys):
        code, out, _ = run_cli(
            capsys,
            ["select", two_group_csv, "--response", "outcome", "--method", "het", "--g-range", "2..2"],
        )
        payload = json.loads(out)
        assert payload["chosen_g"] == 2
        assert len(payload["candidates"]) == 1

    def test_constrained_select_reports_both_bics(self, two_group_csv, capsys):
        code, out, _ = run_cli(
            capsys,
            ["select", two_group_csv, "--response", "outcome", "--method", "conk", "--g-range", "1..3",
             "--grid", "0.2,1.0", "--starts", "3"],
        )
        payload = json.loads(out)
        assert payload["chosen_g"] == 2
        for cand in payload["candidates"]:
            assert set(cand["bic"]) == {"constrained", "modified"}

    def test_ceo_shaped_conc_scan(self, tmp_path, capsys):
        rng = np.random.default_rng(59)
        n = 59
        age = rng.uniform(30, 70, n)
        group = rng.random(n) < 0.5
        salary = np.where(group, 200 + 9.0 * age, 700 + 2.0 * age) + rng.normal(size=n) * 40
        path = write_csv(tmp_path / "ceo.csv", ["salary", "age"], np.column_stack([salary, age]).tolist())
        code, out, _ = run_cli(
            capsys,
            ["select", path, "--response", "salary", "--method", "conc", "--g-range", "2..5",
             "--grid", "0.1,0.5,1.0", "--cv-m", "3", "--starts", "3"],
        )
        assert code == 0
        payload = json.loads(out)
        assert [cand["g"] for cand in payload["candidates"]] == [2, 3, 4, 5]
        assert payload["g_range"] == [2, 5]


class TestSimulate:
    def test_list_scenarios(self, capsys):
        code, out, _ = run_cli(capsys, ["simulate", "--list-scenarios"])
        assert code == 0
        lines = [line for line in out.splitlines() if line.strip()]
        assert len(lines) == 12
        assert any(line.startswith("g2-even-n100") for line in lines)

    def test_two_reps_two_methods(self, tmp_path, capsys):
        code, _, _ = run_cli(
            capsys,
            ["simulate", "--scenario", "g2-even", "--n", "100", "--reps", "2",
             "--methods", "hom,het", "--out", str(tmp_path), "--seed", "5"],
        )
        assert code == 0
        with open(tmp_path / "replications.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert len(rows) == 1 + 2 * 2

    def test_seeded_csv_stable_modulo_wall_time(self, tmp_path, capsys):
        argv = ["simulate", "--scenario", "g2-even", "--n", "100", "--reps", "2",
                "--methods", "hom", "--seed", "5"]
        run_cli(capsys, argv + ["--out", str(tmp_path / "a")])
        run_cli(capsys, argv + ["--out", str(tmp_path / "b"), "--threads", "8"])
        for name in ("replications.csv", "aggregate.csv"):
            with open(tmp_path / "a" / name, newline="") as fh:
                rows_a = list(csv.reader(fh))
            with open(tmp_path / "b" / name, newline="") as fh:
                rows_b = list(csv.reader(fh))
            assert rows_a[0] == rows_b[0]
            time_col = rows_a[0].index("time_s")
            for ra, rb in zip(rows_a[1:], rows_b[1:]):
                ra[time_col] = rb[time_col] = ""
                assert ra == rb

    def test_missing_scenario_errors(self, capsys):
        code, out, err = run_cli(capsys, ["simulate"])
        assert code == 1 and "scenario" in err


def test_console_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "clusterreg.cli", "--help"], capture_output=True, text=True
    )
    assert proc.returncode == 0
    assert "clusterwise" in proc.stdout.lower()
