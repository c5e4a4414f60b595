"""
FairScoresSampler

レバレッジスコアの組 (α_j, β_j) から、両グループのしきい値を満たす列集合を選びます。
第1段階: α_j + β_j が最大の列を、どちらかのしきい値を満たすまで追加
第2段階: 満たされていない側のスコア降順に、累積（第1段階の分を含む）がしきい値に届くまで追加
"""
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from .errors import InfeasibleError, PreconditionError
from .leverage import LeveragePairs

THRESHOLD_SLACK = 1e-12
TIE_BREAK_LOWEST_INDEX = "lowest-index"

THETA_PRESETS = {
    "k-minus-half": lambda k: k - 0.5,
    "three-quarter-k": lambda k: 0.75 * k,
}
PRESET_ALIASES = {"k-1/2": "k-minus-half", "3k/4": "three-quarter-k"}


def preset_theta(preset: str, k: int) -> float:
    name = PRESET_ALIASES.get(preset, preset)
    if name not in THETA_PRESETS:
        raise PreconditionError(f"未知の θ プリセットです: {preset}（{', '.join(THETA_PRESETS)}）")
    return THETA_PRESETS[name](k)


@dataclass(frozen=True)
class SamplerConfig:
    theta_a: float
    theta_b: float
    tie_break: str = TIE_BREAK_LOWEST_INDEX

    def __post_init__(self):
        if self.theta_a <= 0 or self.theta_b <= 0:
            raise PreconditionError(f"しきい値は正である必要があります: θ_A={self.theta_a}, θ_B={self.theta_b}")
        if self.tie_break != TIE_BREAK_LOWEST_INDEX:
            raise PreconditionError(f"未対応のタイブレーク規則です: {self.tie_break}")

    @classmethod
    def from_preset(cls, preset: str, k: int) -> "SamplerConfig":
        theta = preset_theta(preset, k)
        return cls(theta_a=theta, theta_b=theta)

    @classmethod
    def equal(cls, theta: float) -> "SamplerConfig":
        return cls(theta_a=theta, theta_b=theta)

    def check_against(self, k: Optional[int]) -> None:
        if k is not None and (self.theta_a >= k or self.theta_b >= k):
            raise PreconditionError(f"しきい値は k={k} 未満である必要があります: θ_A={self.theta_a}, θ_B={self.theta_b}")


@dataclass(frozen=True)
class SamplerTrace:
    phase_one_picks: Tuple[int, ...]
    satisfied_first: str
    phase_two_picks: Tuple[int, ...]

    def rows(self) -> List[dict]:
        out = [{"order": i, "phase": 1, "index": j} for i, j in enumerate(self.phase_one_picks)]
        offset = len(out)
        out += [{"order": offset + i, "phase": 2, "index": j} for i, j in enumerate(self.phase_two_picks)]
        return out


def _descending(scores: np.ndarray, candidates: Sequence[int]) -> List[int]:
    # 同値は列番号の小さい方を優先
    return sorted(candidates, key=lambda j: (-scores[j], j))


def _reached(total: float, theta: float) -> bool:
    return total >= theta - THRESHOLD_SLACK


def fair_scores_sample(pairs: LeveragePairs, config: SamplerConfig) -> Tuple[Tuple[int, ...], SamplerTrace]:
    """両グループのスコア和がしきい値以上となる列集合と、その選択過程を返す"""
    config.check_against(pairs.k)
    alphas, betas = pairs.alphas, pairs.betas
    if not _reached(alphas.sum(), config.theta_a) or not _reached(betas.sum(), config.theta_b):
        raise InfeasibleError(
            f"全列を選んでもしきい値に届きません: Σα={alphas.sum():.6g} (θ_A={config.theta_a}), "
            f"Σβ={betas.sum():.6g} (θ_B={config.theta_b})"
        )

    remaining = _descending(alphas + betas, range(pairs.n))
    phase_one: List[int] = []
    sum_a = sum_b = 0.0
    while not _reached(sum_a, config.theta_a) and not _reached(sum_b, config.theta_b):
        j = remaining.pop(0)
        phase_one.append(j)
        sum_a += alphas[j]
        sum_b += betas[j]

    if _reached(sum_a, config.theta_a):
        satisfied, other_scores, other_total, other_theta = "A", betas, sum_b, config.theta_b
    else:
        satisfied, other_scores, other_total, other_theta = "B", alphas, sum_a, config.theta_a

    phase_two: List[int] = []
    for j in _descending(other_scores, remaining):
        if _reached(other_total, other_theta):
            break
        phase_two.append(j)
        other_total += other_scores[j]

    selected = tuple(sorted(phase_one + phase_two))
    logger.debug(f"FairScoresSampler: 第1段階 {len(phase_one)} 列（{satisfied} が先に充足）, 第2段階 {len(phase_two)} 列")
    return selected, SamplerTrace(tuple(phase_one), satisfied, tuple(phase_two))


@dataclass(frozen=True)
class CardinalityReport:
    size: int
    oracle_c: int
    bound: int
    passed: bool


def cardinality_bound(c: int) -> int:
    return math.ceil(3 * c / 2) + 1


def cardinality_certificate(pairs: LeveragePairs, config: SamplerConfig, columns: Sequence[int], oracle_c: int) -> CardinalityReport:
    """|S| ≤ ⌈3c/2⌉ + 1 を確認（θ_A = θ_B のときのみ保証される）"""
    if config.theta_a != config.theta_b:
        raise PreconditionError("基数保証は θ_A = θ_B の場合のみです")
    if oracle_c < 1 or oracle_c > pairs.n:
        raise PreconditionError(f"最適列数 c={oracle_c} が範囲外です")
    size = len(set(columns))
    bound = cardinality_bound(oracle_c)
    return CardinalityReport(size=size, oracle_c=oracle_c, bound=bound, passed=size <= bound)
