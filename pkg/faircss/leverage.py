"""
ランク k のレバレッジスコア

ℓ_i^{(k)}(M) = ‖[V^{(k)}]_{i,:}‖² （V^{(k)} は上位 k 個の右特異ベクトル）。
グループ A / B それぞれのスコアの組 (α_i, β_i) と、
しきい値 θ = k − ε による相対誤差保証の検証を扱います。
"""
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from loguru import logger

from .dataset import Group, GroupedData
from .errors import PreconditionError, RankError, ThresholdShortfallError
from .matrix_core import MatrixLike, as_array, best_rank_k_error, column_residual, numeric_rank, svd

MASS_TOLERANCE = 1e-8
RANGE_TOLERANCE = 1e-12
TIE_TOLERANCE = 1e-10
BORDERLINE_RANK = 1e-8
BOUND_SLACK = 1e-8


@dataclass(frozen=True)
class LeveragePairs:
    """列ごとのスコアの組 (α_i, β_i)。k=None は質量条件を検査しない"""
    alphas: np.ndarray
    betas: np.ndarray
    k: Optional[int] = None

    def __post_init__(self):
        alphas = np.asarray(self.alphas, dtype=np.float64).copy()
        betas = np.asarray(self.betas, dtype=np.float64).copy()
        if alphas.ndim != 1 or alphas.shape != betas.shape or alphas.size == 0:
            raise PreconditionError("alphas と betas は同じ長さの非空ベクトルです")
        for label, scores in (("alpha", alphas), ("beta", betas)):
            if np.any(scores < -RANGE_TOLERANCE) or np.any(scores > 1.0 + RANGE_TOLERANCE):
                raise PreconditionError(f"{label} スコアは [0, 1] の範囲にある必要があります")
            if self.k is not None and abs(scores.sum() - self.k) > MASS_TOLERANCE * max(1, self.k):
                raise PreconditionError(f"{label} スコアの総和 {scores.sum():.12g} が k={self.k} と一致しません")
        alphas.setflags(write=False)
        betas.setflags(write=False)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "betas", betas)

    @property
    def n(self) -> int:
        return self.alphas.size


def leverage_scores(M: MatrixLike, k: int) -> np.ndarray:
    """ランク k のレバレッジスコア（総和は k）"""
    a = as_array(M)
    if k <= 0:
        raise PreconditionError(f"k は正の整数です: {k}")
    decomposition = svd(a)
    if decomposition.rank < k:
        raise RankError(
            f"k={k} が数値ランク {decomposition.rank} を超えています",
            rank=decomposition.rank,
            k=k,
        )
    s = decomposition.singular_values
    if k < s.size and abs(s[k - 1] - s[k]) <= TIE_TOLERANCE * s[0]:
        logger.warning(f"⚠️ σ_k と σ_(k+1) がほぼ等しく、上位 k 部分空間が一意ではありません (k={k})")
    if s[k - 1] <= BORDERLINE_RANK * s[0]:
        logger.warning(f"⚠️ σ_k/σ_1 = {s[k - 1] / s[0]:.3g} と小さく、ランク k が数値的に境界的です")
    top = decomposition.vt[:k, :]
    scores = np.sum(top ** 2, axis=0)
    return np.clip(scores, 0.0, 1.0)


def _group_rank_check(data: GroupedData, k: int):
    for group in (Group.A, Group.B):
        rank = numeric_rank(data.group_array(group))
        if not 0 < k < rank:
            raise RankError(
                f"グループ {group.value} のランク {rank} に対して k={k} は 0 < k < rank を満たしません",
                group=group.value,
                rank=rank,
                k=k,
            )


def leverage_pairs(data: GroupedData, k: int) -> LeveragePairs:
    """グループ A / B のレバレッジスコアを列番号で揃えて返す"""
    _group_rank_check(data, k)
    alphas = leverage_scores(data.group_array(Group.A), k)
    betas = leverage_scores(data.group_array(Group.B), k)
    return LeveragePairs(alphas=alphas, betas=betas, k=k)


@dataclass(frozen=True)
class ThresholdReport:
    """しきい値による相対誤差保証の検証結果（二乗フロベニウスノルム）"""
    k: int
    columns: tuple
    mass: float
    epsilon: float
    residual_sq: float
    best_sq: float
    ratio: float
    bound: float
    passed: bool


def verify_threshold_bound(M: MatrixLike, k: int, columns: Sequence[int]) -> ThresholdReport:
    """
    Σ_{i∈S} ℓ_i ≥ k − ε のとき ‖M − CC⁺M‖² ≤ (1−ε)⁻¹ ‖M − M_k‖² を確認する

    Σℓ ≥ k の場合は ε を 0 として扱う
    """
    a = as_array(M)
    cols = tuple(sorted(int(j) for j in columns))
    if not cols:
        raise PreconditionError("列集合が空です")
    scores = leverage_scores(a, k)
    mass = float(scores[list(cols)].sum())
    if mass <= k - 1:
        raise ThresholdShortfallError(f"スコアの和 {mass:.6g} が k−1 = {k - 1} 以下のため保証は成り立ちません")
    epsilon = k - mass
    bound = 1.0 / (1.0 - max(epsilon, 0.0))
    residual_sq = column_residual(a, cols) ** 2
    best_sq = best_rank_k_error(a, k) ** 2
    ratio = residual_sq / best_sq if best_sq > 0.0 else (0.0 if residual_sq == 0.0 else float("inf"))
    passed = residual_sq <= bound * best_sq + BOUND_SLACK
    return ThresholdReport(
        k=k,
        columns=cols,
        mass=mass,
        epsilon=epsilon,
        residual_sq=residual_sq,
        best_sq=best_sq,
        ratio=ratio,
        bound=bound,
        passed=bool(passed),
    )


def leverage_table(pairs: LeveragePairs) -> list:
    """
    グループごとに降順ソートした (順位, 列, スコア) の表

    減衰の様子をプロットするための元データ
    """
    rows = []
    for label, scores in (("A", pairs.alphas), ("B", pairs.betas)):
        order = sorted(range(pairs.n), key=lambda j: (-scores[j], j))
        for rank, j in enumerate(order):
            rows.append({"group": label, "rank": rank, "index": j, "score": float(scores[j])})
    return rows
