"""
全探索オラクル（小規模問題の正解値）

部分集合は辞書式順に列挙し、固定サイズのチャンクごとに joblib で並列評価します。
最小値の比較は 1e-10 の許容差で行い、同値なら辞書式で小さい集合を採用します。
"""
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from loguru import logger

from .dataset import Group, GroupedData
from .errors import BudgetExceededError, InfeasibleError, PreconditionError, RankError
from .leverage import LeveragePairs
from .matrix_core import MatrixLike, as_array, best_rank_k_error, numeric_rank, orthonormal_basis

DEFAULT_BUDGET = 10**8
CHUNK_SIZE = 2048
VALUE_EPSILON = 1e-10
THRESHOLD_SLACK = 1e-12


@dataclass(frozen=True)
class OracleResult:
    columns: Tuple[int, ...]
    value: float
    evaluated: int


@dataclass(frozen=True)
class FairOracleResult:
    """MinMax 最適解。fair_a / fair_b / fair_m はその解での各残差（正規化なし）"""
    columns: Tuple[int, ...]
    value: float
    fair_a: float
    fair_b: float
    fair_m: float
    evaluated: int


@dataclass(frozen=True)
class MinScoresResult:
    size: int
    columns: Tuple[int, ...]
    evaluated: int


def _check_budget(count: int, budget: int) -> None:
    if count > budget:
        raise BudgetExceededError(count, budget)


def _chunks(n: int, k: int, size: int = CHUNK_SIZE) -> Iterator[List[Tuple[int, ...]]]:
    combos = itertools.combinations(range(n), k)
    while True:
        chunk = list(itertools.islice(combos, size))
        if not chunk:
            return
        yield chunk


def _better(value: float, best: Optional[float]) -> bool:
    return best is None or value < best - VALUE_EPSILON


def _residual(block: np.ndarray, cols: Sequence[int]) -> float:
    q = orthonormal_basis(block[:, list(cols)])
    return float(np.linalg.norm(block - q @ (q.T @ block), "fro"))


def _scan(chunk, score: Callable[[Tuple[int, ...]], float]):
    best_value, best_subset = None, None
    for subset in chunk:
        value = score(subset)
        if _better(value, best_value):
            best_value, best_subset = value, subset
    return best_value, best_subset, len(chunk)


def _reduce(partials) -> Tuple[float, Tuple[int, ...], int]:
    # チャンクは辞書式順に並んでいるので、先に出た方が同値のときに勝つ
    best_value, best_subset, total = None, None, 0
    for value, subset, count in partials:
        total += count
        if _better(value, best_value):
            best_value, best_subset = value, subset
    return best_value, tuple(int(j) for j in best_subset), total


def _enumerate(n: int, k: int, score, budget: int, n_jobs: int):
    if not 0 < k <= n:
        raise PreconditionError(f"k は 1 以上 n={n} 以下です: {k}")
    count = math.comb(n, k)
    _check_budget(count, budget)
    logger.debug(f"全探索: C({n},{k}) = {count} 通り（n_jobs={n_jobs}）")
    partials = Parallel(n_jobs=n_jobs)(delayed(_scan)(chunk, score) for chunk in _chunks(n, k))
    return _reduce(partials)


class _CssScore:
    def __init__(self, block: np.ndarray):
        self.block = block

    def __call__(self, subset) -> float:
        return _residual(self.block, subset)


class _MinMaxScore:
    def __init__(self, block_a: np.ndarray, block_b: np.ndarray, denom_a: float, denom_b: float):
        self.block_a, self.block_b = block_a, block_b
        self.denom_a, self.denom_b = denom_a, denom_b

    def __call__(self, subset) -> float:
        return max(_residual(self.block_a, subset) / self.denom_a, _residual(self.block_b, subset) / self.denom_b)


def brute_force_css(M: MatrixLike, k: int, budget: int = DEFAULT_BUDGET, n_jobs: int = 1) -> OracleResult:
    """‖M − P_C M‖_F を最小にする k 列（全探索）"""
    a = np.array(as_array(M))
    value, subset, evaluated = _enumerate(a.shape[1], k, _CssScore(a), budget, n_jobs)
    return OracleResult(columns=subset, value=value, evaluated=evaluated)


def brute_force_fair_minmax(data: GroupedData, k: int, budget: int = DEFAULT_BUDGET, n_jobs: int = 1) -> FairOracleResult:
    """max(Nloss_A, Nloss_B) を最小にする k 列（全探索）"""
    blocks = {}
    denominators = {}
    for group in (Group.A, Group.B):
        block = np.array(data.group_array(group))
        rank = numeric_rank(block)
        if rank <= k:
            raise RankError(
                f"グループ {group.value} のランク {rank} が k={k} 以下です", group=group.value, rank=rank, k=k
            )
        blocks[group] = block
        denominators[group] = best_rank_k_error(block, k)
    score = _MinMaxScore(blocks[Group.A], blocks[Group.B], denominators[Group.A], denominators[Group.B])
    value, subset, evaluated = _enumerate(data.n, k, score, budget, n_jobs)
    return FairOracleResult(
        columns=subset,
        value=value,
        fair_a=_residual(blocks[Group.A], subset),
        fair_b=_residual(blocks[Group.B], subset),
        fair_m=_residual(np.array(data.matrix.values), subset),
        evaluated=evaluated,
    )


def _prefix_length(scores: np.ndarray, theta: float) -> int:
    totals = np.cumsum(np.sort(scores)[::-1])
    return int(np.searchsorted(totals, theta - THRESHOLD_SLACK) + 1)


def brute_force_min_fairness_scores(
    pairs: LeveragePairs,
    theta_a: float,
    theta_b: float,
    budget: int = DEFAULT_BUDGET,
) -> MinScoresResult:
    """
    両グループのスコア和がしきい値以上となる最小の列集合

    各グループ単独の最小接頭辞長が下界になるので、そのサイズから探索を始める
    """
    alphas, betas = pairs.alphas, pairs.betas
    if alphas.sum() < theta_a - THRESHOLD_SLACK or betas.sum() < theta_b - THRESHOLD_SLACK:
        raise InfeasibleError("全列を選んでもしきい値に届きません")
    n = pairs.n
    start = max(_prefix_length(alphas, theta_a), _prefix_length(betas, theta_b))
    evaluated = 0
    for size in range(start, n + 1):
        _check_budget(evaluated + math.comb(n, size), budget)
        for chunk in _chunks(n, size):
            index = np.asarray(chunk, dtype=np.intp)
            ok = (alphas[index].sum(axis=1) >= theta_a - THRESHOLD_SLACK) & (
                betas[index].sum(axis=1) >= theta_b - THRESHOLD_SLACK
            )
            hits = np.flatnonzero(ok)
            if hits.size:
                evaluated += int(hits[0]) + 1
                return MinScoresResult(size=size, columns=tuple(int(j) for j in chunk[hits[0]]), evaluated=evaluated)
            evaluated += len(chunk)
    raise InfeasibleError("実行可能な列集合が見つかりません")
