"""
2段階サンプリング

第1段階で FairScoresSampler が c > k 列を選び、第2段階で Low QR / High QR / Greedy が
その列だけを対象に k 列へ絞り込みます。第2段階の Greedy の分母は元データ全体の
ランク k 誤差です（列を制限しても正規化はやり直しません）。
"""
import time
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple, Union

from loguru import logger

from .baselines import greedy_minmax
from .dataset import GroupedData
from .errors import FairCssError, PreconditionError, StageOneTooSmallError
from .evaluation import GroupEvaluator
from .fair_rrqr import fair_high_rrqr, fair_low_rrqr
from .fair_sampler import SamplerConfig, SamplerTrace, fair_scores_sample
from .leverage import leverage_pairs

LOW_QR = "low_qr"
HIGH_QR = "high_qr"
GREEDY = "greedy"
REFINERS = (LOW_QR, HIGH_QR, GREEDY)


def parse_refiner(name: str) -> str:
    normalized = name.strip().lower().replace("-", "_")
    if normalized not in REFINERS:
        raise PreconditionError(f"未知の第2段階アルゴリズムです: {name}（{', '.join(REFINERS)}）")
    return normalized


@dataclass(frozen=True)
class StageReport:
    c: int
    stage_one: Tuple[int, ...]
    columns: Tuple[int, ...]
    refiner: str
    minmax: float
    timings: Dict[str, float] = field(default_factory=dict)
    trace: Optional[SamplerTrace] = None


def _attribute(error: FairCssError, stage: str) -> None:
    error.stage = stage
    error.add_note(f"2段階サンプリングの{stage}で発生しました")


def two_stage_select(
    data: GroupedData,
    k: int,
    theta: Union[SamplerConfig, str],
    refiner: str = LOW_QR,
    evaluator: Optional[GroupEvaluator] = None,
    n_jobs: int = 1,
) -> Tuple[Tuple[int, ...], StageReport]:
    refiner = parse_refiner(refiner)
    config = theta if isinstance(theta, SamplerConfig) else SamplerConfig.from_preset(theta, k)
    timings = {}

    started = time.perf_counter()
    try:
        pairs = leverage_pairs(data, k)
        stage_one, trace = fair_scores_sample(pairs, config)
        if len(stage_one) < k:
            raise StageOneTooSmallError(len(stage_one), k)
    except FairCssError as e:
        _attribute(e, "第1段階")
        raise
    timings["stage_one"] = time.perf_counter() - started
    logger.info(f"第1段階: c={len(stage_one)} 列（k={k}, θ_A={config.theta_a}, θ_B={config.theta_b}）")

    started = time.perf_counter()
    try:
        evaluator = evaluator or GroupEvaluator(data, k)
        if len(stage_one) == k:
            columns = stage_one
        elif refiner == GREEDY:
            columns = greedy_minmax(data, k, candidates=stage_one, evaluator=evaluator, n_jobs=n_jobs)
        else:
            restricted = data.restrict_columns(stage_one)
            select = fair_low_rrqr if refiner == LOW_QR else fair_high_rrqr
            local, _ = select(restricted, k)
            columns = tuple(sorted(stage_one[j] for j in local))
    except FairCssError as e:
        _attribute(e, "第2段階")
        raise
    timings["stage_two"] = time.perf_counter() - started

    report = StageReport(
        c=len(stage_one),
        stage_one=stage_one,
        columns=columns,
        refiner=refiner,
        minmax=evaluator.minmax(columns),
        timings=timings,
        trace=trace,
    )
    return columns, report
