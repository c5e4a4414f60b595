"""
実験スイープ

JSON で宣言した（データセット × アルゴリズム × k × θ プリセット）の各セルを
joblib のワーカープールで実行し、セルのキー順に結果をまとめます。
kind は次のいずれか:
- table2: 各アルゴリズムの MinMax 値（2段階手法は第1段階の列数 c も記録）
- price_of_fairness: 全探索による通常 CSS と公平 CSS の比較
- columns_sweep: 分母のランク k を固定して選択列数 c を変えたときの MinMax 値
"""
import json
import os
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from loguru import logger

from .baselines import RandomConfig, greedy_minmax, random_subsets
from .config import Settings
from .dataset import GroupedData, PreprocessSpec, block_diagonal_witness, load_csv, load_grouped, random_grouped
from .errors import FairCssError, InputError, MissingFileError
from .evaluation import GroupEvaluator, SelectionResult, evaluate_selection, price_of_fairness_report
from .fair_rrqr import fair_high_rrqr, fair_low_rrqr
from .fair_sampler import SamplerConfig, fair_scores_sample, preset_theta
from .leverage import leverage_pairs
from .matrix_core import numeric_rank
from .two_stage import two_stage_select

KIND_TABLE2 = "table2"
KIND_PRICE = "price_of_fairness"
KIND_COLUMNS = "columns_sweep"
KINDS = (KIND_TABLE2, KIND_PRICE, KIND_COLUMNS)

TWO_STAGE = {"s-low-qr": "low_qr", "s-high-qr": "high_qr", "s-greedy": "greedy"}
SINGLE_STAGE = ("low-qr", "high-qr", "greedy", "random", "fair-sampler")
ALGORITHMS = SINGLE_STAGE + tuple(TWO_STAGE)
THETA_ALGORITHMS = set(TWO_STAGE) | {"fair-sampler"}


@dataclass(frozen=True)
class DatasetRef:
    """CSV + 前処理設定、保存済み npz、または合成データの指定"""
    name: str
    csv: Optional[str] = None
    spec: Optional[str] = None
    npz: Optional[str] = None
    synthetic: Optional[Dict[str, Any]] = None

    @classmethod
    def from_dict(cls, raw: dict) -> "DatasetRef":
        if "name" not in raw:
            raise InputError("データセットには name が必要です")
        ref = cls(
            name=str(raw["name"]),
            csv=raw.get("csv"),
            spec=raw.get("spec"),
            npz=raw.get("npz"),
            synthetic=raw.get("synthetic"),
        )
        sources = [s for s in (ref.csv, ref.npz, ref.synthetic) if s]
        if len(sources) != 1:
            raise InputError(f"データセット {ref.name}: csv / npz / synthetic のいずれか1つを指定してください")
        if ref.csv and not ref.spec:
            raise InputError(f"データセット {ref.name}: csv には spec（前処理設定）が必要です")
        return ref

    def load(self) -> GroupedData:
        if self.npz:
            return load_grouped(self.npz)
        if self.csv:
            return load_csv(self.csv, PreprocessSpec.from_json(self.spec), name=self.name)
        params = dict(self.synthetic)
        builder = params.pop("kind", "random")
        if builder == "random":
            data = random_grouped(int(params["m_a"]), int(params["m_b"]), int(params["n"]), seed=params.get("seed"))
        elif builder == "block_diagonal":
            data = block_diagonal_witness(int(params["k"]), gap=float(params.get("gap", 1e3)), block=params.get("block"))
        else:
            raise InputError(f"未知の合成データ種別です: {builder}")
        return GroupedData(data.matrix, data.group_a_rows, data.group_b_rows, data.column_names, name=self.name)


@dataclass(frozen=True)
class SweepConfig:
    name: str
    kind: str
    datasets: Tuple[DatasetRef, ...]
    ks: Tuple[int, ...]
    algorithms: Tuple[str, ...] = ()
    theta_presets: Tuple[str, ...] = ("k-minus-half",)
    c_values: Tuple[int, ...] = ()
    theta_values: Tuple[float, ...] = ()
    repetitions: Optional[int] = None

    @classmethod
    def from_dict(cls, raw: dict) -> "SweepConfig":
        kind = raw.get("kind", KIND_TABLE2)
        if kind not in KINDS:
            raise InputError(f"未知の実験種別です: {kind}（{', '.join(KINDS)}）")
        algorithms = tuple(raw.get("algorithms", ()))
        unknown = [a for a in algorithms if a not in ALGORITHMS]
        if unknown:
            raise InputError(f"未知のアルゴリズムです: {', '.join(unknown)}（{', '.join(ALGORITHMS)}）")
        ks = raw.get("k", [])
        ks = tuple(int(k) for k in (ks if isinstance(ks, list) else [ks]))
        if not ks:
            raise InputError("k を1つ以上指定してください")
        datasets = tuple(DatasetRef.from_dict(d) for d in raw.get("datasets", []))
        if not datasets:
            raise InputError("datasets が空です")
        for preset in raw.get("theta_presets", ()):
            preset_theta(preset, 1)
        return cls(
            name=str(raw.get("name", kind)),
            kind=kind,
            datasets=datasets,
            ks=ks,
            algorithms=algorithms,
            theta_presets=tuple(raw.get("theta_presets", ("k-minus-half",))),
            c_values=tuple(int(c) for c in raw.get("c_values", ())),
            theta_values=tuple(float(t) for t in raw.get("theta_values", ())),
            repetitions=raw.get("repetitions"),
        )

    @classmethod
    def from_json(cls, path) -> "SweepConfig":
        if not os.path.exists(path):
            raise MissingFileError(path)
        try:
            with open(path, encoding="utf-8") as f:
                return cls.from_dict(json.load(f))
        except json.JSONDecodeError as e:
            raise InputError(f"実験設定を解析できません: {path}: {e}") from e


@dataclass(frozen=True, order=True)
class Cell:
    dataset: str
    algorithm: str
    k: int
    theta: str = ""


@dataclass
class SweepOutcome:
    results: List[SelectionResult] = field(default_factory=list)
    failures: List[dict] = field(default_factory=list)

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.to_row() for r in self.results])


def build_cells(config: SweepConfig) -> List[Cell]:
    cells = set()
    for ref in config.datasets:
        for algorithm in config.algorithms:
            for k in config.ks:
                if algorithm in THETA_ALGORITHMS:
                    cells.update(Cell(ref.name, algorithm, k, preset) for preset in config.theta_presets)
                else:
                    cells.add(Cell(ref.name, algorithm, k))
    return sorted(cells)


def run_cell(data: GroupedData, cell: Cell, seed: int, repetitions: int) -> SelectionResult:
    """1セル分のアルゴリズムを実行して評価する"""
    k = cell.k
    evaluator = GroupEvaluator(data, k)
    started = time.perf_counter()
    c = None
    if cell.algorithm == "low-qr":
        columns, _ = fair_low_rrqr(data, k)
    elif cell.algorithm == "high-qr":
        columns, _ = fair_high_rrqr(data, k)
    elif cell.algorithm == "greedy":
        columns = greedy_minmax(data, k, evaluator=evaluator)
    elif cell.algorithm == "random":
        summary = random_subsets(data, k, RandomConfig(repetitions=repetitions, seed=seed), evaluator=evaluator)
        columns = summary.median_subset()
    elif cell.algorithm == "fair-sampler":
        columns, _ = fair_scores_sample(leverage_pairs(data, k), SamplerConfig.from_preset(cell.theta, k))
    else:
        columns, report = two_stage_select(data, k, cell.theta, refiner=TWO_STAGE[cell.algorithm], evaluator=evaluator)
        c = report.c
    elapsed = time.perf_counter() - started
    return evaluate_selection(
        data, columns, k, cell.algorithm, c=c, wall_time=elapsed, evaluator=evaluator, theta=cell.theta
    )


def _run_cell_safe(data: GroupedData, cell: Cell, seed: int, repetitions: int):
    try:
        return cell, run_cell(data, cell, seed, repetitions), None
    except FairCssError as e:
        return cell, None, f"{type(e).__name__}: {e}"


def load_datasets(config: SweepConfig) -> Dict[str, GroupedData]:
    return {ref.name: ref.load() for ref in config.datasets}


def run_sweep(config: SweepConfig, settings: Settings, datasets: Optional[Dict[str, GroupedData]] = None) -> SweepOutcome:
    """全セルを実行する。失敗したセルは failures に記録して続行"""
    datasets = datasets if datasets is not None else load_datasets(config)
    cells = build_cells(config)
    repetitions = config.repetitions or settings.random_repetitions
    logger.info(f"実験 {config.name}: {len(cells)} セル（workers={settings.workers}）")
    finished = Parallel(n_jobs=settings.workers)(
        delayed(_run_cell_safe)(datasets[cell.dataset], cell, settings.seed, repetitions) for cell in cells
    )
    outcome = SweepOutcome()
    for cell, result, error in sorted(finished, key=lambda item: item[0]):
        if error is None:
            outcome.results.append(result)
        else:
            logger.warning(f"⚠️ セル {cell} は失敗しました: {error}")
            outcome.failures.append({"dataset": cell.dataset, "algorithm": cell.algorithm, "k": cell.k, "theta": cell.theta, "error": error})
    return outcome


def table2_frame(results: Sequence[SelectionResult]) -> pd.DataFrame:
    """データセット, c, k, θ ごとに各アルゴリズムの MinMax 値を横に並べた表"""
    if not results:
        return pd.DataFrame(columns=["dataset", "c", "k", "theta"])
    long = pd.DataFrame([r.to_row() for r in results])
    # θ を使わない手法はどの θ の行にも並べる
    thetas = sorted({t for t in long["theta"] if t}) or [""]
    expanded = []
    for _, row in long.iterrows():
        for theta in ([row["theta"]] if row["theta"] else thetas):
            expanded.append({**row.to_dict(), "theta": theta})
    long = pd.DataFrame(expanded)
    wide = long.pivot_table(index=["dataset", "k", "theta"], columns="algorithm", values="minmax", aggfunc="first")
    staged = long[long["algorithm"].isin(THETA_ALGORITHMS)]
    c = staged.groupby(["dataset", "k", "theta"])["c"].max() if not staged.empty else None
    wide = wide.reset_index()
    wide.columns.name = None
    wide.insert(1, "c", [int(c.get((d, k, t), k)) if c is not None else int(k) for d, k, t in zip(wide["dataset"], wide["k"], wide["theta"])])
    ordered = [a for a in ALGORITHMS if a in wide.columns]
    return wide[["dataset", "c", "k", "theta"] + ordered]


def columns_sweep(
    data: GroupedData,
    k: int,
    c_values: Sequence[int],
    algorithms: Sequence[str],
    theta_values: Sequence[float] = (),
    seed: int = 0,
    repetitions: int = 100,
) -> pd.DataFrame:
    """
    分母をランク k に固定したまま選択列数 c を変えたときの MinMax 値

    Low/High QR は c ≤ min(rank(A), rank(B)) の範囲だけ。FairScoresSampler は
    θ の格子で実行し、得られた列数を c として記録する
    """
    evaluator = GroupEvaluator(data, k)
    max_qr = min(numeric_rank(data.group_array("A")), numeric_rank(data.group_array("B")))
    rows = []

    def record(algorithm, columns, theta=""):
        nloss_a, nloss_b = evaluator.losses(columns)
        rows.append({"algorithm": algorithm, "c": len(columns), "k": k, "theta": theta,
                     "nloss_a": nloss_a, "nloss_b": nloss_b, "minmax": max(nloss_a, nloss_b)})

    for algorithm in algorithms:
        if algorithm == "fair-sampler":
            pairs = leverage_pairs(data, k)
            for theta in theta_values:
                try:
                    columns, _ = fair_scores_sample(pairs, SamplerConfig.equal(theta))
                except FairCssError as e:
                    logger.warning(f"⚠️ θ={theta} はスキップします: {e}")
                    continue
                record(algorithm, columns, theta=f"{theta:g}")
            continue
        for c in c_values:
            if algorithm in ("low-qr", "high-qr") and c > max_qr:
                logger.warning(f"⚠️ {algorithm}: c={c} は min(rank(A), rank(B))={max_qr} を超えるためスキップします")
                continue
            if algorithm == "low-qr":
                columns, _ = fair_low_rrqr(data, c)
            elif algorithm == "high-qr":
                columns, _ = fair_high_rrqr(data, c)
            elif algorithm == "greedy":
                columns = greedy_minmax(data, c, evaluator=evaluator)
            elif algorithm == "random":
                columns = random_subsets(data, c, RandomConfig(repetitions, seed), evaluator=evaluator).median_subset()
            else:
                raise InputError(f"columns_sweep では {algorithm} は使えません")
            record(algorithm, columns)
    return pd.DataFrame(rows, columns=["algorithm", "c", "k", "theta", "nloss_a", "nloss_b", "minmax"])


def run_experiment(config: SweepConfig, settings: Settings) -> Tuple[pd.DataFrame, SweepOutcome]:
    """
    kind に応じて実験を実行し、出力用の表を返す

    table2 のときは SweepOutcome に各セルの結果と失敗が入る
    """
    datasets = load_datasets(config)
    if config.kind == KIND_TABLE2:
        outcome = run_sweep(config, settings, datasets)
        return table2_frame(outcome.results), outcome

    frames = []
    for name, data in datasets.items():
        if config.kind == KIND_PRICE:
            frame = price_of_fairness_report(data, config.ks, budget=settings.enumeration_budget, n_jobs=settings.workers)
        else:
            reps = config.repetitions or settings.random_repetitions
            frame = pd.concat(
                [columns_sweep(data, k, config.c_values, config.algorithms, config.theta_values, settings.seed, reps) for k in config.ks],
                ignore_index=True,
            )
        frame.insert(0, "dataset", name)
        frames.append(frame)
    return pd.concat(frames, ignore_index=True), SweepOutcome()


def summarize(frame: pd.DataFrame) -> Dict[str, Any]:
    """HTML レポートの概要欄"""
    numeric = frame.select_dtypes(include=[np.number])
    summary = {"行数": len(frame)}
    if "minmax" in numeric:
        summary["MinMax の最小値"] = f"{numeric['minmax'].min():.6g}"
    return summary
