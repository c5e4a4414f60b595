"""コマンドラインのテスト"""
import json
import sys

import numpy as np
import pytest
from loguru import logger

import fair_css
from faircss.baselines import greedy_minmax
from faircss.dataset import GroupedData, read_matrix_csv
from faircss.errors import ExitCode
from faircss.evaluation import GroupEvaluator
from faircss.fair_rrqr import fair_high_rrqr, fair_low_rrqr
from faircss.leverage import leverage_pairs
from faircss.oracle import brute_force_fair_minmax
from faircss.reports import read_results_csv


@pytest.fixture(autouse=True)
def _restore_logger():
    yield
    # run() は capsys の stderr にハンドラを付け替えるので元に戻す
    logger.remove()
    logger.add(sys.__stderr__, level="WARNING")


def _write_matrix(path, values):
    np.savetxt(path, values, delimiter=",")
    return str(path)


def _json_out(capsys):
    return json.loads(capsys.readouterr().out)["data"]


def test_brute_css_on_diagonal(tmp_path, capsys):
    matrix = _write_matrix(tmp_path / "diag.csv", np.diag([3.0, 2.0, 1.0]))
    code = fair_css.run(["brute", "--objective", "css", "--raw-matrix", matrix, "--k", "2", "--quiet"])
    assert code == ExitCode.OK
    data = _json_out(capsys)
    assert data["columns"] == [0, 1]
    assert data["value"] == pytest.approx(1.0)


def test_leverage_csv_sums_to_k(tmp_path, rng):
    matrix = _write_matrix(tmp_path / "m.csv", rng.standard_normal((12, 6)))
    out = tmp_path / "lev.csv"
    code = fair_css.run(["leverage", "--raw-matrix", matrix, "--split", "6", "--k", "2", "--out", str(out), "--quiet"])
    assert code == ExitCode.OK
    frame = read_results_csv(out)
    assert frame["alpha"].sum() == pytest.approx(2.0, abs=1e-8)
    assert frame["beta"].sum() == pytest.approx(2.0, abs=1e-8)


def test_greedy_matches_library(tmp_path, rng, capsys):
    path = tmp_path / "m.csv"
    values = rng.standard_normal((14, 7))
    matrix = _write_matrix(path, values)
    code = fair_css.run(["greedy", "--raw-matrix", matrix, "--split", "8", "--k", "3", "--quiet"])
    assert code == ExitCode.OK
    expected = greedy_minmax(GroupedData(read_matrix_csv(path), tuple(range(8)), tuple(range(8, 14))), 3)
    assert tuple(_json_out(capsys)["columns"]) == expected


def _split_data(path, split):
    matrix = read_matrix_csv(path)
    return GroupedData(matrix, tuple(range(split)), tuple(range(split, matrix.rows)))


def test_greedy_reports_column_count_and_target_rank(tmp_path, rng, capsys):
    path = tmp_path / "m.csv"
    matrix = _write_matrix(path, rng.standard_normal((14, 7)))
    code = fair_css.run(["greedy", "--raw-matrix", matrix, "--split", "8", "--k", "3", "--target-rank", "2", "--quiet"])
    assert code == ExitCode.OK
    data = _json_out(capsys)
    assert data["k"] == 3
    assert data["target_rank"] == 2
    assert len(data["columns"]) == 3
    evaluator = GroupEvaluator(_split_data(path, 8), 2)
    assert tuple(data["columns"]) == greedy_minmax(_split_data(path, 8), 3, evaluator=evaluator)
    assert data["minmax"] == pytest.approx(evaluator.minmax(data["columns"]), rel=1e-12)


@pytest.mark.parametrize("variant, select", [("low", fair_low_rrqr), ("high", fair_high_rrqr)])
def test_rrqr_matches_library(tmp_path, rng, capsys, variant, select):
    path = tmp_path / "m.csv"
    matrix = _write_matrix(path, rng.standard_normal((14, 7)))
    code = fair_css.run(["rrqr", "--raw-matrix", matrix, "--split", "8", "--k", "3", "--variant", variant, "--quiet"])
    assert code == ExitCode.OK
    data = _json_out(capsys)
    columns, state = select(_split_data(path, 8), 3)
    assert tuple(data["columns"]) == columns
    assert data["steps"] == state.step


def test_leverage_matches_library(tmp_path, rng):
    path = tmp_path / "m.csv"
    matrix = _write_matrix(path, rng.standard_normal((12, 6)))
    out = tmp_path / "lev.csv"
    assert fair_css.run(["leverage", "--raw-matrix", matrix, "--split", "5", "--k", "3", "--out", str(out), "--quiet"]) == ExitCode.OK
    pairs = leverage_pairs(_split_data(path, 5), 3)
    frame = read_results_csv(out)
    np.testing.assert_allclose(frame["alpha"], pairs.alphas, rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(frame["beta"], pairs.betas, rtol=1e-12, atol=1e-15)


def test_eval_matches_library(tmp_path, rng, capsys):
    path = tmp_path / "m.csv"
    matrix = _write_matrix(path, rng.standard_normal((14, 7)))
    code = fair_css.run(["eval", "--raw-matrix", matrix, "--split", "8", "--k", "2", "--columns", "4 1", "--quiet"])
    assert code == ExitCode.OK
    data = _json_out(capsys)
    nloss_a, nloss_b = GroupEvaluator(_split_data(path, 8), 2).losses([1, 4])
    assert data["columns"] == [1, 4]
    assert data["nloss_a"] == pytest.approx(nloss_a, rel=1e-12)
    assert data["nloss_b"] == pytest.approx(nloss_b, rel=1e-12)


def test_brute_fair_minmax_matches_library(tmp_path, rng, capsys):
    path = tmp_path / "m.csv"
    matrix = _write_matrix(path, rng.standard_normal((14, 7)))
    code = fair_css.run(["brute", "--objective", "fair-minmax", "--raw-matrix", matrix, "--split", "8", "--k", "2", "--quiet"])
    assert code == ExitCode.OK
    data = _json_out(capsys)
    expected = brute_force_fair_minmax(_split_data(path, 8), 2)
    assert tuple(data["columns"]) == expected.columns
    assert data["value"] == pytest.approx(expected.value, rel=1e-12)


def test_eval_axis_columns(tmp_path, capsys):
    twins = np.vstack([np.diag([5.0, 4.0, 3.0, 2.0, 1.0])] * 2)
    matrix = _write_matrix(tmp_path / "twins.csv", twins)
    code = fair_css.run(["eval", "--raw-matrix", matrix, "--split", "5", "--k", "2", "--columns", "0,1", "--quiet"])
    assert code == ExitCode.OK
    data = _json_out(capsys)
    assert data["nloss_a"] == pytest.approx(1.0)
    assert data["minmax"] == pytest.approx(1.0)


@pytest.mark.parametrize("argv, expected", [
    (["brute", "--bogus"], ExitCode.USAGE),
    (["greedy", "--raw-matrix", "missing.csv", "--split", "2", "--k", "1"], ExitCode.IO),
])
def test_exit_codes_without_data(argv, expected):
    assert fair_css.run(argv + ["--quiet"]) == expected


def test_rank_violation_exit_code(tmp_path, rng):
    matrix = _write_matrix(tmp_path / "m.csv", rng.standard_normal((4, 6)))
    assert fair_css.run(["greedy", "--raw-matrix", matrix, "--split", "2", "--k", "2", "--quiet"]) == ExitCode.PRECONDITION


def test_budget_exit_code(tmp_path, rng):
    matrix = _write_matrix(tmp_path / "m.csv", rng.standard_normal((4, 10)))
    argv = ["brute", "--objective", "css", "--raw-matrix", matrix, "--k", "5", "--budget", "100", "--quiet"]
    assert fair_css.run(argv) == ExitCode.BUDGET


def test_stage_one_shortfall_exit_code(tmp_path, rng):
    matrix = _write_matrix(tmp_path / "m.csv", rng.standard_normal((20, 10)))
    argv = ["two-stage", "--raw-matrix", matrix, "--split", "10", "--k", "3",
            "--theta-a", "0.05", "--theta-b", "0.05", "--quiet"]
    assert fair_css.run(argv) == ExitCode.INFEASIBLE


def _sweep_file(tmp_path, m_a=9):
    config = {
        "name": "cli-sweep",
        "kind": "table2",
        "datasets": [{"name": "toy", "synthetic": {"kind": "random", "m_a": m_a, "m_b": 8, "n": 6, "seed": 4}}],
        "k": [2],
        "algorithms": ["greedy", "s-greedy"],
        "theta_presets": ["k-minus-half"],
    }
    path = tmp_path / "sweep.json"
    path.write_text(json.dumps(config), encoding="utf-8")
    return str(path)


def test_experiment_writes_reports(tmp_path):
    out = tmp_path / "table.csv"
    html = tmp_path / "report.html"
    argv = ["experiment", _sweep_file(tmp_path), "--no-history", "--out", str(out), "--html", str(html), "--quiet"]
    assert fair_css.run(argv) == ExitCode.OK
    frame = read_results_csv(out)
    assert list(frame.columns) == ["dataset", "c", "k", "theta", "greedy", "s-greedy"]
    assert "cli-sweep" in html.read_text(encoding="utf-8")


def test_experiment_ci_mode_reports_failures(tmp_path):
    argv = ["experiment", _sweep_file(tmp_path, m_a=2), "--no-history", "--out", str(tmp_path / "t.csv"), "--ci", "--quiet"]
    assert fair_css.run(argv) == ExitCode.UNKNOWN


def test_version(capsys):
    assert fair_css.run(["--version"]) == ExitCode.OK
    assert "0.4.0" in capsys.readouterr().out


def test_report_from_saved_results(tmp_path, rng):
    matrix = _write_matrix(tmp_path / "m.csv", rng.standard_normal((14, 7)))
    saved = tmp_path / "greedy.json"
    argv = ["greedy", "--raw-matrix", matrix, "--split", "8", "--k", "2", "--out", str(saved), "--quiet"]
    assert fair_css.run(argv) == ExitCode.OK
    html = tmp_path / "report.html"
    pdf = tmp_path / "report.pdf"
    argv = ["report", str(saved), "--html", str(html), "--pdf", str(pdf), "--out", str(tmp_path / "written.json"), "--quiet"]
    assert fair_css.run(argv) == ExitCode.OK
    text = html.read_text(encoding="utf-8")
    assert "greedy" in text
    assert "nloss_a" in text
    assert pdf.read_bytes().startswith(b"%PDF")


def test_report_from_experiment_csv(tmp_path, capsys):
    table = tmp_path / "table.csv"
    argv = ["experiment", _sweep_file(tmp_path), "--no-history", "--out", str(table), "--quiet"]
    assert fair_css.run(argv) == ExitCode.OK
    html = tmp_path / "table.html"
    assert fair_css.run(["report", str(table), "--html", str(html), "--quiet"]) == ExitCode.OK
    data = _json_out(capsys)
    assert data["rows"] == 1
    assert data["sections"] == ["results"]
    assert "s-greedy" in html.read_text(encoding="utf-8")


def test_report_needs_an_output(tmp_path):
    assert fair_css.run(["report", str(tmp_path / "x.json"), "--quiet"]) == ExitCode.PRECONDITION
