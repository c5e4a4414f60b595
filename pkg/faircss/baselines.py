"""
比較用のベースライン

- Greedy: MinMax 目的関数の改善が最大の列を1本ずつ追加
- Random: 一様な k 列部分集合（既定 100 回）
- 単一グループの決定的レバレッジサンプラーと、その2グループ版の単純な逐次手法
"""
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from loguru import logger

from .config import DEFAULT_SEED
from .dataset import GroupedData
from .errors import InfeasibleError, PreconditionError
from .evaluation import GroupEvaluator
from .fair_sampler import SamplerConfig, THRESHOLD_SLACK
from .leverage import LeveragePairs

PRNG_ALGORITHM = "PCG64"


def greedy_minmax(
    data: GroupedData,
    k: int,
    target_rank: Optional[int] = None,
    candidates: Optional[Sequence[int]] = None,
    evaluator: Optional[GroupEvaluator] = None,
    n_jobs: int = 1,
) -> Tuple[int, ...]:
    """
    Greedy MinMax

    各ステップで、追加後の MinMax 値が最小となる候補列を選ぶ（同値は列番号の小さい方）。
    分母のランクは target_rank（既定は k）。candidates を与えるとその列だけから選ぶ
    """
    pool = sorted({int(j) for j in (candidates if candidates is not None else range(data.n))})
    if not 0 < k <= len(pool):
        raise PreconditionError(f"k={k} は候補列数 {len(pool)} 以下の正の整数である必要があります")
    evaluator = evaluator or GroupEvaluator(data, target_rank if target_rank is not None else k)

    selected: List[int] = []
    with Parallel(n_jobs=n_jobs, prefer="threads") as parallel:
        for step in range(k):
            remaining = [j for j in pool if j not in selected]
            scores = parallel(delayed(evaluator.minmax)(selected + [j]) for j in remaining)
            best = min(range(len(remaining)), key=lambda i: (scores[i], remaining[i]))
            selected.append(remaining[best])
            logger.debug(f"Greedy ステップ {step + 1}: 列 {remaining[best]} を追加（MinMax={scores[best]:.6g}）")
    return tuple(sorted(selected))


@dataclass(frozen=True)
class RandomConfig:
    repetitions: int = 100
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.repetitions < 1:
            raise PreconditionError(f"repetitions は1以上です: {self.repetitions}")


@dataclass(frozen=True)
class RandomSummary:
    values: Tuple[float, ...]
    subsets: Tuple[Tuple[int, ...], ...]
    mean: float
    median: float
    min: float
    seed: int
    algorithm: str = PRNG_ALGORITHM

    def median_subset(self) -> Tuple[int, ...]:
        """中央値（偶数回なら下側）を与えた部分集合"""
        order = sorted(range(len(self.values)), key=lambda i: (self.values[i], i))
        return self.subsets[order[(len(order) - 1) // 2]]


def random_subsets(
    data: GroupedData,
    k: int,
    config: RandomConfig = RandomConfig(),
    evaluator: Optional[GroupEvaluator] = None,
) -> RandomSummary:
    """一様ランダムな k 列部分集合の MinMax 値の分布"""
    if not 0 < k <= data.n:
        raise PreconditionError(f"k は 1 以上 n={data.n} 以下です: {k}")
    evaluator = evaluator or GroupEvaluator(data, k)
    rng = np.random.Generator(np.random.PCG64(config.seed))
    subsets = tuple(
        tuple(sorted(int(j) for j in rng.choice(data.n, size=k, replace=False))) for _ in range(config.repetitions)
    )
    values = tuple(evaluator.minmax(s) for s in subsets)
    arr = np.asarray(values)
    return RandomSummary(
        values=values,
        subsets=subsets,
        mean=float(arr.mean()),
        median=float(np.median(arr)),
        min=float(arr.min()),
        seed=config.seed,
    )


def single_group_sample(scores, theta: float) -> Tuple[int, ...]:
    """スコア降順の最短接頭辞で和が θ 以上となるもの"""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.sum() < theta - THRESHOLD_SLACK:
        raise InfeasibleError(f"スコアの総和 {scores.sum():.6g} が θ={theta} に届きません")
    order = sorted(range(scores.size), key=lambda j: (-scores[j], j))
    picked, total = [], 0.0
    for j in order:
        if total >= theta - THRESHOLD_SLACK:
            break
        picked.append(j)
        total += scores[j]
    return tuple(sorted(picked))


def sequential_threshold_sample(pairs: LeveragePairs, config: SamplerConfig) -> Tuple[int, ...]:
    """α の降順で θ_A を満たし、残りを β の降順で θ_B まで補う"""
    first = single_group_sample(pairs.alphas, config.theta_a)
    if pairs.betas.sum() < config.theta_b - THRESHOLD_SLACK:
        raise InfeasibleError(f"β の総和が θ_B={config.theta_b} に届きません")
    picked = list(first)
    total = float(pairs.betas[picked].sum())
    for j in sorted(set(range(pairs.n)) - set(picked), key=lambda j: (-pairs.betas[j], j)):
        if total >= config.theta_b - THRESHOLD_SLACK:
            break
        picked.append(j)
        total += pairs.betas[j]
    return tuple(sorted(picked))
