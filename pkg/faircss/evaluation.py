"""
評価指標

- Nloss: グループの射影残差 ÷ そのグループの最良ランク k 誤差
- MinMax: max(Nloss_A, Nloss_B)
- 価格（price of fairness）: 通常の CSS 最適解と公平な最適解の比較表
"""
import threading
import time
from collections import OrderedDict
from dataclasses import asdict, dataclass
from typing import Iterable, Optional, Sequence, Tuple

import pandas as pd
from loguru import logger

from .dataset import Group, GroupedData
from .errors import PreconditionError, RankError
from .matrix_core import best_rank_k_error, column_residual, numeric_rank, projection_residual
from .oracle import DEFAULT_BUDGET, brute_force_css, brute_force_fair_minmax

EXACT_K_TOLERANCE = 1e-10

RESULT_FIELDS = ("dataset", "algorithm", "k", "c", "nloss_a", "nloss_b", "minmax", "vanilla_residual", "wall_time", "theta")

DENOMINATOR_CACHE_SIZE = 256

# 古いものから捨てる（LRU）
_denominator_cache: "OrderedDict[Tuple[str, str, int], float]" = OrderedDict()
_cache_lock = threading.Lock()


def clear_denominator_cache() -> None:
    with _cache_lock:
        _denominator_cache.clear()


def group_denominator(data: GroupedData, group, k: int) -> float:
    """‖M_g − (M_g)_k‖_F（データのハッシュ・グループ・k ごとにキャッシュ）"""
    group = Group.parse(group)
    key = (data.fingerprint, group.value, int(k))
    with _cache_lock:
        if key in _denominator_cache:
            _denominator_cache.move_to_end(key)
            return _denominator_cache[key]
    block = data.group_array(group)
    rank = numeric_rank(block)
    if k <= 0 or rank <= k:
        raise RankError(
            f"グループ {group.value} のランク {rank} が k={k} 以下のため Nloss の分母が0になります",
            group=group.value,
            rank=rank,
            k=k,
        )
    value = best_rank_k_error(block, k)
    with _cache_lock:
        _denominator_cache[key] = value
        _denominator_cache.move_to_end(key)
        while len(_denominator_cache) > DENOMINATOR_CACHE_SIZE:
            _denominator_cache.popitem(last=False)
    return value


class GroupEvaluator:
    """
    固定したランク target_rank の分母で列集合を評価する

    列数が target_rank と異なる集合（c > k の実験や Greedy の途中経過）も評価できます
    """

    def __init__(self, data: GroupedData, target_rank: int):
        self.data = data
        self.target_rank = int(target_rank)
        self._blocks = {g: data.group_array(g) for g in (Group.A, Group.B)}
        self._denominators = {g: group_denominator(data, g, self.target_rank) for g in (Group.A, Group.B)}

    def denominator(self, group) -> float:
        return self._denominators[Group.parse(group)]

    def residual(self, group, columns: Sequence[int]) -> float:
        block = self._blocks[Group.parse(group)]
        cols = _checked_columns(columns, self.data.n)
        return projection_residual(block, block[:, cols])

    def nloss(self, group, columns: Sequence[int]) -> float:
        return self.residual(group, columns) / self.denominator(group)

    def losses(self, columns: Sequence[int]) -> Tuple[float, float]:
        return self.nloss(Group.A, columns), self.nloss(Group.B, columns)

    def minmax(self, columns: Sequence[int]) -> float:
        return max(self.losses(columns))


def _checked_columns(columns: Iterable[int], n: int) -> list:
    cols = sorted({int(j) for j in columns})
    if not cols:
        raise PreconditionError("列集合が空です")
    if cols[0] < 0 or cols[-1] >= n:
        raise PreconditionError(f"列番号が範囲外です（n={n}）: {cols}")
    return cols


def nloss(data: GroupedData, group, columns: Sequence[int], k: int) -> float:
    return GroupEvaluator(data, k).nloss(group, columns)


def minmax_loss(data: GroupedData, columns: Sequence[int], k: int) -> float:
    return GroupEvaluator(data, k).minmax(columns)


@dataclass(frozen=True)
class SelectionResult:
    columns: Tuple[int, ...]
    nloss_a: float
    nloss_b: float
    minmax: float
    vanilla_residual: float
    algorithm: str
    k: int
    c: int
    wall_time: float = 0.0
    dataset: str = ""
    theta: str = ""

    def __post_init__(self):
        if self.minmax != max(self.nloss_a, self.nloss_b):
            raise PreconditionError("minmax は max(nloss_a, nloss_b) と一致する必要があります")
        if self.nloss_a < 0 or self.nloss_b < 0:
            raise PreconditionError("Nloss は非負です")

    def to_row(self) -> dict:
        row = {name: getattr(self, name) for name in RESULT_FIELDS}
        row["columns"] = " ".join(str(j) for j in self.columns)
        return row

    def to_dict(self) -> dict:
        out = asdict(self)
        out["columns"] = list(self.columns)
        return out


def evaluate_selection(
    data: GroupedData,
    columns: Sequence[int],
    k: int,
    algorithm: str,
    c: Optional[int] = None,
    wall_time: float = 0.0,
    evaluator: Optional[GroupEvaluator] = None,
    theta: str = "",
) -> SelectionResult:
    """列集合を評価して SelectionResult にまとめる"""
    evaluator = evaluator or GroupEvaluator(data, k)
    cols = tuple(_checked_columns(columns, data.n))
    nloss_a, nloss_b = evaluator.losses(cols)
    if len(cols) <= evaluator.target_rank and min(nloss_a, nloss_b) < 1.0 - EXACT_K_TOLERANCE:
        logger.warning(
            f"⚠️ k={k} 列の選択で Nloss が1未満です（A={nloss_a:.12g}, B={nloss_b:.12g}）。数値誤差を確認してください"
        )
    return SelectionResult(
        columns=cols,
        nloss_a=nloss_a,
        nloss_b=nloss_b,
        minmax=max(nloss_a, nloss_b),
        vanilla_residual=column_residual(data.matrix, cols),
        algorithm=algorithm,
        k=int(k),
        c=int(c) if c is not None else len(cols),
        wall_time=float(wall_time),
        dataset=data.name,
        theta=theta,
    )


PRICE_COLUMNS = (
    "k", "opt_m", "opt_a", "opt_b", "opt_minmax",
    "minmax_m", "fair_a", "fair_b", "fair_m",
    "opt_columns", "fair_columns", "evaluated",
)


def price_of_fairness_report(
    data: GroupedData,
    ks: Iterable[int],
    budget: int = DEFAULT_BUDGET,
    n_jobs: int = 1,
) -> pd.DataFrame:
    """
    k ごとに通常の CSS 最適解と FairCSS-MinMax 最適解を全探索で比較する

    opt_* は通常の CSS 最適解での残差（opt_minmax はその解の MinMax 値）、
    fair_* は MinMax 最適解での残差、minmax_m は MinMax の最適値
    """
    rows = []
    for k in ks:
        started = time.perf_counter()
        evaluator = GroupEvaluator(data, k)
        vanilla = brute_force_css(data.matrix, k, budget=budget, n_jobs=n_jobs)
        fair = brute_force_fair_minmax(data, k, budget=budget, n_jobs=n_jobs)
        rows.append({
            "k": int(k),
            "opt_m": vanilla.value,
            "opt_a": evaluator.residual(Group.A, vanilla.columns),
            "opt_b": evaluator.residual(Group.B, vanilla.columns),
            "opt_minmax": evaluator.minmax(vanilla.columns),
            "minmax_m": fair.value,
            "fair_a": fair.fair_a,
            "fair_b": fair.fair_b,
            "fair_m": fair.fair_m,
            "opt_columns": " ".join(map(str, vanilla.columns)),
            "fair_columns": " ".join(map(str, fair.columns)),
            "evaluated": vanilla.evaluated + fair.evaluated,
        })
        logger.info(f"k={k}: opt(M)={vanilla.value:.6g}, fair(M)={fair.fair_m:.6g} ({time.perf_counter() - started:.2f}秒)")
    return pd.DataFrame(rows, columns=list(PRICE_COLUMNS))
