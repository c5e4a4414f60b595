#!/usr/bin/env python3
"""
公平な列部分集合選択ツール（コマンドライン）

各サブコマンドはライブラリ（faircss パッケージ）の処理を呼ぶだけの薄いラッパーです。
結果は標準出力または --out、進捗ログは標準エラーに出力します。

例:
    python fair_css.py leverage --k 5 --data data/heart.csv --spec dataset_specs/heart.json
    python fair_css.py two-stage --k 10 --data data/german.csv --spec dataset_specs/german.json \\
        --theta-preset k-minus-half --refiner low-qr
    python fair_css.py experiment experiments/table2.json --html reports/table2.html
"""
import argparse
import dataclasses
import sys
import time
from pathlib import Path
from typing import List, Optional

from loguru import logger

from faircss import __version__
from faircss.baselines import RandomConfig, greedy_minmax, random_subsets, single_group_sample
from faircss.config import Settings, load_settings
from faircss.dataset import (
    GroupedData,
    PreprocessSpec,
    load_csv,
    load_grouped,
    read_matrix_csv,
    save_grouped,
)
from faircss.errors import ExitCode, PreconditionError, exit_code_for
from faircss.evaluation import GroupEvaluator, evaluate_selection
from faircss.experiment import SweepConfig, run_experiment, summarize
from faircss.fair_rrqr import fair_high_rrqr, fair_low_rrqr
from faircss.fair_sampler import THETA_PRESETS, SamplerConfig, cardinality_certificate, fair_scores_sample
from faircss.leverage import leverage_pairs, leverage_table
from faircss.log import configure_logging
from faircss.matrix_core import numeric_rank
from faircss.oracle import brute_force_css, brute_force_fair_minmax, brute_force_min_fairness_scores
from faircss.reports import (
    HTMLReportGenerator,
    PDFReportGenerator,
    read_results_csv,
    read_results_json,
    save_history,
    sections_from_results,
    write_results_csv,
    write_results_json,
)
from faircss.two_stage import two_stage_select

REPO_ROOT = Path(__file__).resolve().parent


class CIIntegration:
    """CIパイプライン統合クラス"""

    @staticmethod
    def get_exit_code(outcome_failures: List[dict]) -> int:
        """失敗したセルがあれば非0"""
        return int(ExitCode.UNKNOWN) if outcome_failures else int(ExitCode.OK)

    @staticmethod
    def generate_ci_summary(name: str, frame, failures: List[dict]) -> str:
        summary = [f"## 実験結果: {name}", f"- 行数: {len(frame)}", f"- 失敗したセル: {len(failures)}件"]
        for failure in failures:
            summary.append(f"  - {failure['dataset']} / {failure['algorithm']} / k={failure['k']}: {failure['error']}")
        return "\n".join(summary)


# --- 入力 ---

def load_data(args) -> GroupedData:
    """--matrix / --data + --spec / --raw-matrix + --split のいずれかから GroupedData を作る"""
    if args.matrix:
        return load_grouped(args.matrix)
    if args.data:
        if not args.spec:
            raise PreconditionError("--data には --spec（前処理設定）が必要です")
        return load_csv(args.data, PreprocessSpec.from_json(args.spec))
    if args.raw_matrix:
        if args.split is None:
            raise PreconditionError("--raw-matrix には --split（グループ A の行数）が必要です")
        matrix = read_matrix_csv(args.raw_matrix)
        if not 0 < args.split < matrix.rows:
            raise PreconditionError(f"--split は 1 以上 {matrix.rows - 1} 以下です: {args.split}")
        return GroupedData(
            matrix=matrix,
            group_a_rows=tuple(range(args.split)),
            group_b_rows=tuple(range(args.split, matrix.rows)),
            name=Path(args.raw_matrix).stem,
        )
    raise PreconditionError("入力データを --matrix, --data, --raw-matrix のいずれかで指定してください")


def sampler_config(args, k: int) -> SamplerConfig:
    if args.theta_a is not None or args.theta_b is not None:
        if args.theta_a is None or args.theta_b is None:
            raise PreconditionError("--theta-a と --theta-b は両方指定してください")
        return SamplerConfig(theta_a=args.theta_a, theta_b=args.theta_b)
    return SamplerConfig.from_preset(args.theta_preset, k)


def emit(args, payload, kind: str, tabular: bool = False) -> None:
    fmt = args.format or ("csv" if tabular else "json")
    if fmt == "csv":
        write_results_csv(payload, args.out)
    else:
        write_results_json(payload, kind, args.out)


def _selection_payload(data: GroupedData, columns, k: int, algorithm: str, started: float, evaluator=None, **extra) -> dict:
    result = evaluate_selection(
        data, columns, k, algorithm, c=extra.pop("c", None), wall_time=time.perf_counter() - started, evaluator=evaluator
    )
    payload = result.to_dict()
    payload.update(extra)
    return payload


# --- サブコマンド ---

def cmd_preprocess(args, settings: Settings) -> int:
    data = load_data(args)
    if not args.npz:
        raise PreconditionError("preprocess には --npz（保存先）が必要です")
    saved = save_grouped(data, args.npz)
    payload = {
        "dataset": data.name,
        "n": data.n,
        "m_a": len(data.group_a_rows),
        "m_b": len(data.group_b_rows),
        "rank_a": numeric_rank(data.group_array("A")),
        "rank_b": numeric_rank(data.group_array("B")),
        "fingerprint": data.fingerprint,
        "npz": saved,
        "columns": list(data.column_names),
    }
    emit(args, payload, "preprocess")
    return 0


def cmd_leverage(args, settings: Settings) -> int:
    data = load_data(args)
    pairs = leverage_pairs(data, args.k)
    if args.decay:
        rows = leverage_table(pairs)
    else:
        rows = [
            {"index": j, "column": data.column_names[j], "alpha": float(pairs.alphas[j]), "beta": float(pairs.betas[j])}
            for j in range(pairs.n)
        ]
    emit(args, rows, "leverage", tabular=True)
    return 0


def cmd_sample(args, settings: Settings) -> int:
    data = load_data(args)
    started = time.perf_counter()
    pairs = leverage_pairs(data, args.k)
    config = sampler_config(args, args.k)
    columns, trace = fair_scores_sample(pairs, config)
    extra = {
        "theta_a": config.theta_a,
        "theta_b": config.theta_b,
        "alpha_mass": float(pairs.alphas[list(columns)].sum()),
        "beta_mass": float(pairs.betas[list(columns)].sum()),
        "satisfied_first": trace.satisfied_first,
    }
    if args.certify:
        oracle = brute_force_min_fairness_scores(pairs, config.theta_a, config.theta_b, budget=settings.enumeration_budget)
        extra["certificate"] = dataclasses.asdict(cardinality_certificate(pairs, config, columns, oracle.size))
    if args.trace:
        write_results_csv(trace.rows(), args.trace)
    emit(args, _selection_payload(data, columns, args.k, "fair-sampler", started, **extra), "sample")
    return 0


def cmd_rrqr(args, settings: Settings) -> int:
    data = load_data(args)
    started = time.perf_counter()
    select = fair_low_rrqr if args.variant == "low" else fair_high_rrqr
    columns, state = select(data, args.k)
    if args.pivot_log:
        write_results_csv(state.pivot_log, args.pivot_log)
    payload = _selection_payload(data, columns, args.k, f"{args.variant}-qr", started, steps=state.step)
    emit(args, payload, "rrqr")
    return 0


def cmd_greedy(args, settings: Settings) -> int:
    data = load_data(args)
    started = time.perf_counter()
    target = args.target_rank if args.target_rank is not None else args.k
    evaluator = GroupEvaluator(data, target)
    columns = greedy_minmax(data, args.k, target_rank=target, evaluator=evaluator, n_jobs=settings.workers)
    payload = _selection_payload(data, columns, args.k, "greedy", started, evaluator=evaluator, target_rank=target)
    emit(args, payload, "greedy")
    return 0


def cmd_random(args, settings: Settings) -> int:
    data = load_data(args)
    reps = args.reps if args.reps is not None else settings.random_repetitions
    summary = random_subsets(data, args.k, RandomConfig(repetitions=reps, seed=settings.seed))
    payload = dataclasses.asdict(summary)
    payload["k"] = args.k
    payload["median_subset"] = list(summary.median_subset())
    emit(args, payload, "random")
    return 0


def cmd_two_stage(args, settings: Settings) -> int:
    data = load_data(args)
    started = time.perf_counter()
    columns, report = two_stage_select(data, args.k, sampler_config(args, args.k), refiner=args.refiner, n_jobs=settings.workers)
    payload = _selection_payload(
        data, columns, args.k, f"s-{args.refiner.replace('_', '-')}", started,
        c=report.c, stage_one=list(report.stage_one), timings=report.timings,
    )
    emit(args, payload, "two-stage")
    return 0


def cmd_brute(args, settings: Settings) -> int:
    budget = args.budget if args.budget is not None else settings.enumeration_budget
    if args.objective == "css":
        matrix = read_matrix_csv(args.raw_matrix) if args.raw_matrix and args.split is None else load_data(args).matrix
        result = brute_force_css(matrix, args.k, budget=budget, n_jobs=settings.workers)
        payload = dataclasses.asdict(result)
    elif args.objective == "fair-minmax":
        result = brute_force_fair_minmax(load_data(args), args.k, budget=budget, n_jobs=settings.workers)
        payload = dataclasses.asdict(result)
    else:
        data = load_data(args)
        pairs = leverage_pairs(data, args.k)
        config = sampler_config(args, args.k)
        result = brute_force_min_fairness_scores(pairs, config.theta_a, config.theta_b, budget=budget)
        payload = dataclasses.asdict(result)
        payload["single_group_sizes"] = {
            "A": len(single_group_sample(pairs.alphas, config.theta_a)),
            "B": len(single_group_sample(pairs.betas, config.theta_b)),
        }
    payload["objective"] = args.objective
    payload["k"] = args.k
    emit(args, payload, "brute")
    return 0


def cmd_eval(args, settings: Settings) -> int:
    data = load_data(args)
    columns = [int(j) for j in args.columns.replace(",", " ").split()]
    result = evaluate_selection(data, columns, args.k, args.label)
    emit(args, result.to_dict(), "eval")
    return 0


def _table2_config(args) -> SweepConfig:
    """--table2 --dataset NAME 形式を SweepConfig に変換"""
    if not args.dataset or not args.k:
        raise PreconditionError("--table2 には --dataset と --k が必要です")
    spec = REPO_ROOT / "dataset_specs" / f"{args.dataset}.json"
    csv_path = Path(args.data) if args.data else REPO_ROOT / "data" / f"{args.dataset}.csv"
    return SweepConfig.from_dict({
        "name": f"table2-{args.dataset}",
        "kind": "table2",
        "datasets": [{"name": args.dataset, "csv": str(csv_path), "spec": str(args.spec or spec)}],
        "k": [args.k],
        "algorithms": ["s-low-qr", "s-high-qr", "s-greedy", "greedy", "random"],
        "theta_presets": [args.theta_preset],
    })


def cmd_experiment(args, settings: Settings) -> int:
    if args.table2:
        config = _table2_config(args)
    elif args.config:
        config = SweepConfig.from_json(args.config)
    else:
        raise PreconditionError("実験設定ファイルか --table2 を指定してください")
    frame, outcome = run_experiment(config, settings)
    emit(args, frame, f"experiment:{config.kind}", tabular=True)
    sections = {config.name: frame}
    if outcome.results:
        sections["cells"] = outcome.frame()
    if outcome.failures:
        sections["failures"] = outcome.failures
    if args.html:
        HTMLReportGenerator.generate_html_report(f"実験レポート: {config.name}", sections, args.html, summary=summarize(frame))
    if args.pdf:
        PDFReportGenerator.generate_pdf_report(f"Experiment report: {config.name}", sections, args.pdf)
    if not args.no_history:
        history = {"config": config.name, "kind": config.kind, "table": frame, "failures": outcome.failures}
        save_history(history, settings.org, config.name, settings.history_dir)
    if args.ci:
        print(CIIntegration.generate_ci_summary(config.name, frame, outcome.failures), file=sys.stderr)
        return CIIntegration.get_exit_code(outcome.failures)
    return 0


def _report_rows(path: str) -> list:
    if path.lower().endswith(".csv"):
        return read_results_csv(path).to_dict(orient="records")
    data = read_results_json(path)["data"]
    if isinstance(data, dict):
        # 実行履歴は table に表が入っている
        return list(data.get("table") or [data])
    return list(data)


def cmd_report(args, settings: Settings) -> int:
    """保存済みの結果（CSV / JSON）から HTML / PDF レポートを作り直す"""
    if not (args.html or args.pdf):
        raise PreconditionError("report には --html か --pdf が必要です")
    rows = _report_rows(args.results)
    sections = sections_from_results(rows)
    title = Path(args.results).stem
    written = {}
    if args.html:
        written["html"] = HTMLReportGenerator.generate_html_report(f"結果レポート: {title}", sections, args.html)
    if args.pdf:
        written["pdf"] = PDFReportGenerator.generate_pdf_report(f"Results report: {title}", sections, args.pdf)
    emit(args, {"results": args.results, "rows": len(rows), "sections": list(sections), **written}, "report")
    return 0


COMMANDS = {
    "preprocess": cmd_preprocess,
    "leverage": cmd_leverage,
    "sample": cmd_sample,
    "rrqr": cmd_rrqr,
    "greedy": cmd_greedy,
    "random": cmd_random,
    "two-stage": cmd_two_stage,
    "brute": cmd_brute,
    "eval": cmd_eval,
    "experiment": cmd_experiment,
    "report": cmd_report,
}


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", help="入力CSV（--spec と併用）")
    p.add_argument("--spec", help="前処理設定JSON（dataset_specs/*.json）")
    p.add_argument("--matrix", help="preprocess で保存した .npz")
    p.add_argument("--raw-matrix", help="ヘッダなしの数値CSV")
    p.add_argument("--split", type=int, help="--raw-matrix の先頭何行をグループ A とするか")


def _add_theta_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--theta-preset", default="k-minus-half", choices=sorted(THETA_PRESETS) + ["k-1/2", "3k/4"], help="しきい値のプリセット")
    p.add_argument("--theta-a", type=float, help="グループ A のしきい値（--theta-b と併用）")
    p.add_argument("--theta-b", type=float, help="グループ B のしきい値")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fair_css.py", description="公平な列部分集合選択ツール")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="結果の出力先（省略時は標準出力）")
    common.add_argument("--format", choices=["csv", "json"], help="出力形式")
    common.add_argument("--seed", type=int, help="乱数シード（settings.json より優先）")
    common.add_argument("--budget", type=int, help="全探索の上限（部分集合の数）")
    common.add_argument("--workers", type=int, help="並列ワーカー数（-1 で全コア）")
    common.add_argument("--settings", help="設定ファイル（既定: settings.json）")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", action="store_true", help="DEBUG ログを表示")
    verbosity.add_argument("--quiet", action="store_true", help="WARNING 以上のみ表示")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", parents=[common], help="CSV を前処理して .npz に保存")
    _add_data_args(p)
    p.add_argument("--npz", help="保存先 .npz")

    p = sub.add_parser("leverage", parents=[common], help="グループ別レバレッジスコア")
    _add_data_args(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--decay", action="store_true", help="グループ別に降順ソートした表を出力")

    p = sub.add_parser("sample", parents=[common], help="FairScoresSampler")
    _add_data_args(p)
    _add_theta_args(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--trace", help="選択過程のCSV出力先")
    p.add_argument("--certify", action="store_true", help="全探索で基数保証を確認")

    p = sub.add_parser("rrqr", parents=[common], help="Fair High-/Low-RRQR")
    _add_data_args(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--variant", choices=["low", "high"], default="low")
    p.add_argument("--pivot-log", help="ピボット履歴CSVの出力先")

    p = sub.add_parser("greedy", parents=[common], help="Greedy MinMax")
    _add_data_args(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--target-rank", type=int, help="Nloss の分母のランク（既定は k）")

    p = sub.add_parser("random", parents=[common], help="ランダムな k 列部分集合")
    _add_data_args(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--reps", type=int, help="繰り返し回数（既定は settings.json）")

    p = sub.add_parser("two-stage", parents=[common], help="2段階サンプリング")
    _add_data_args(p)
    _add_theta_args(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--refiner", choices=["low-qr", "high-qr", "greedy", "low_qr", "high_qr"], default="low-qr")

    p = sub.add_parser("brute", parents=[common], help="全探索オラクル")
    _add_data_args(p)
    _add_theta_args(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--objective", choices=["css", "fair-minmax", "min-scores"], default="css")

    p = sub.add_parser("eval", parents=[common], help="列集合の Nloss / MinMax")
    _add_data_args(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--columns", required=True, help="列番号（空白またはカンマ区切り）")
    p.add_argument("--label", default="manual", help="結果に記録するアルゴリズム名")

    p = sub.add_parser("experiment", parents=[common], help="実験スイープ（experiments/*.json）")
    p.add_argument("config", nargs="?", help="実験設定JSON")
    p.add_argument("--table2", action="store_true", help="1データセット分の比較表（各アルゴリズムの MinMax 値）を作る")
    p.add_argument("--dataset", help="--table2 のデータセット名（dataset_specs/<名前>.json, data/<名前>.csv）")
    p.add_argument("--data", help="--table2 の入力CSV（既定: data/<名前>.csv）")
    p.add_argument("--spec", help="--table2 の前処理設定（既定: dataset_specs/<名前>.json）")
    p.add_argument("--k", type=int)
    p.add_argument("--theta-preset", default="k-minus-half", choices=sorted(THETA_PRESETS) + ["k-1/2", "3k/4"])
    p.add_argument("--html", help="HTMLレポート出力先")
    p.add_argument("--pdf", help="PDFレポート出力先")
    p.add_argument("--no-history", action="store_true", help="history/ に結果を保存しない")
    p.add_argument("--ci", action="store_true", help="CIモード（失敗セルがあれば終了コード1）")

    p = sub.add_parser("report", parents=[common], help="保存済みの結果から HTML / PDF レポートを作る")
    p.add_argument("results", help="結果ファイル（CSV または JSON）")
    p.add_argument("--html", help="HTMLレポート出力先")
    p.add_argument("--pdf", help="PDFレポート出力先")
    return parser


def resolve_settings(args) -> Settings:
    settings = load_settings(args.settings)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.budget is not None:
        overrides["enumeration_budget"] = args.budget
    if args.workers is not None:
        overrides["workers"] = args.workers
    return dataclasses.replace(settings, **overrides) if overrides else settings


def run(argv: Optional[List[str]] = None) -> int:
    """コマンドを実行して終了コードを返す"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else int(ExitCode.USAGE)
    level = "DEBUG" if args.verbose else "WARNING" if args.quiet else "INFO"
    configure_logging(level)
    try:
        settings = resolve_settings(args)
        if not (args.verbose or args.quiet):
            configure_logging(settings.log_level)
        return COMMANDS[args.command](args, settings)
    except Exception as e:  # pylint: disable=broad-except
        code = exit_code_for(e)
        logger.error(f"{type(e).__name__}: {e}")
        for note in getattr(e, "__notes__", ()):
            logger.error(note)
        if code == ExitCode.UNKNOWN:
            logger.exception("予期しないエラー")
        return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
