"""
公平なランク顕示QR（Fair High-RRQR / Fair Low-RRQR）

両グループの QR 分解 AΠ = Q^A R^A, BΠ = Q^B R^B を共通の列置換 Π で更新していきます。
- High: 先頭ブロック R11 の i 番目の特異値が小さい方のグループの特異ベクトルで
  ピボット列を決め、その列を先頭ブロックの末尾へ送る（n−k 回）。
- Low: 後方ブロック R22 の最大特異値が大きい方のグループの第1右特異ベクトルで
  ピボット列を決め、後方ブロックの先頭へ送る（k 回）。
グループを1つだけ渡すと従来の（単一行列の）RRQR になります。
"""
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np
import scipy.linalg
from loguru import logger

from .dataset import Group, GroupedData
from .errors import DecompositionError, PreconditionError, RankError
from .matrix_core import PivotedQR, _raw_svd, numeric_rank

HIGH = "high"
LOW = "low"


@dataclass
class FairQrState:
    """各グループの QR と共通の列置換"""
    factors: List[PivotedQR]
    global_perm: np.ndarray
    step: int = 0
    pivot_log: List[dict] = field(default_factory=list)

    @property
    def qr_a(self) -> PivotedQR:
        return self.factors[0]

    @property
    def qr_b(self) -> PivotedQR:
        return self.factors[-1]

    def trailing_norm(self, k: int, group_index: int = 0) -> float:
        """‖R22‖_F（先頭 k 列を選んだときの残差）"""
        return float(np.linalg.norm(self.factors[group_index].r[k:, k:], "fro"))


def _initial_factors(arrays: Sequence[np.ndarray]) -> List[PivotedQR]:
    factors = []
    n = arrays[0].shape[1]
    for a in arrays:
        try:
            q, r = scipy.linalg.qr(a, mode="economic")
        except np.linalg.LinAlgError as e:
            raise DecompositionError(f"QR 分解に失敗しました: shape={a.shape}") from e
        factors.append(PivotedQR(q=np.array(q), r=np.array(r), perm=np.arange(n)))
    return factors


def _block_svd(block: np.ndarray):
    """完全SVD（行数が列数より少ないブロックでも零空間のベクトルを得る）"""
    rows, cols = block.shape
    if rows == 0:
        return np.zeros(0), np.eye(cols)
    _, s, vt = _raw_svd(block, full_matrices=True)
    return s, vt


def _canonical_sign(v: np.ndarray) -> np.ndarray:
    # 絶対値最大の成分（同値なら先頭）を正にする
    j = int(np.argmax(np.abs(v)))
    return -v if v[j] < 0 else v


def _move(order: List[int], source: int, target: int) -> List[int]:
    moved = list(order)
    moved.insert(target, moved.pop(source))
    return moved


def _retriangularize(factor: PivotedQR, lo: int, hi: int, local_perm: List[int], variant: str) -> PivotedQR:
    """列 lo:hi を local_perm で並べ替え、そのブロックを QR で三角化し直す"""
    r = factor.r.copy()
    q = factor.q.copy()
    cols = list(range(lo, hi))
    permuted = [cols[j] for j in local_perm]
    r[:, cols] = r[:, permuted]
    rows = slice(lo, min(hi, r.shape[0])) if variant == LOW else slice(0, min(hi, r.shape[0]))
    block = r[rows, lo:hi]
    if block.shape[0] > 0:
        try:
            q1, r1 = scipy.linalg.qr(block, mode="economic")
        except np.linalg.LinAlgError as e:
            raise DecompositionError("ブロックの再三角化に失敗しました") from e
        r[rows, lo:hi] = r1
        r[rows, hi:] = q1.T @ r[rows, hi:]
        q[:, rows] = q[:, rows] @ q1
    perm = factor.perm.copy()
    perm[cols] = factor.perm[permuted]
    return PivotedQR(q=q, r=r, perm=perm)


def _spectral_choice(values: Sequence[float], pick_smaller: bool) -> int:
    # グループ A（先頭）が同値で勝つ
    best = 0
    for g in range(1, len(values)):
        if (values[g] < values[best]) if pick_smaller else (values[g] > values[best]):
            best = g
    return best


def _pivot_index(v: np.ndarray) -> int:
    v = _canonical_sign(v)
    return int(np.argmax(np.abs(v)))


def _high_step(state: FairQrState, i: int) -> None:
    """先頭 i 列のブロックから1列を末尾（位置 i−1）へ送る"""
    sigmas, vectors = [], []
    for factor in state.factors:
        block = factor.r[: min(i, factor.r.shape[0]), :i]
        s, vt = _block_svd(block)
        sigmas.append(float(s[i - 1]) if s.size >= i else 0.0)
        vectors.append(vt[i - 1])
    g = _spectral_choice(sigmas, pick_smaller=True)
    j = _pivot_index(vectors[g])
    local = _move(list(range(i)), j, i - 1)
    column = int(state.global_perm[j])
    state.factors = [_retriangularize(f, 0, i, local, HIGH) for f in state.factors]
    state.global_perm = state.factors[0].perm.copy()
    state.step += 1
    state.pivot_log.append(_log_entry(state.step, g, sigmas, column, "exile"))


def _low_step(state: FairQrState, i: int) -> None:
    """後方ブロック（列 i 以降）から1列を先頭（位置 i）へ送る"""
    n = state.global_perm.size
    sigmas, vectors = [], []
    for factor in state.factors:
        block = factor.r[i:, i:]
        s, vt = _block_svd(block)
        sigmas.append(float(s[0]) if s.size else 0.0)
        vectors.append(vt[0])
    g = _spectral_choice(sigmas, pick_smaller=False)
    j = _pivot_index(vectors[g])
    local = _move(list(range(n - i)), j, 0)
    column = int(state.global_perm[i + j])
    state.factors = [_retriangularize(f, i, n, local, LOW) for f in state.factors]
    state.global_perm = state.factors[0].perm.copy()
    state.step += 1
    state.pivot_log.append(_log_entry(state.step, g, sigmas, column, "select"))


def _log_entry(step: int, g: int, sigmas: Sequence[float], column: int, action: str) -> dict:
    labels = ("A", "B") if len(sigmas) == 2 else ("M",)
    entry = {"step": step, "group": labels[g], "column": column, "action": action}
    for label, sigma in zip(labels, sigmas):
        entry[f"sigma_{label.lower()}"] = sigma
    return entry


def _check_rank(arrays: Sequence[np.ndarray], labels: Sequence[str], k: int) -> None:
    n = arrays[0].shape[1]
    if not 0 < k <= n:
        raise PreconditionError(f"k は 1 以上 n={n} 以下です: {k}")
    for label, a in zip(labels, arrays):
        rank = numeric_rank(a)
        if k > rank:
            raise RankError(f"グループ {label} のランク {rank} より多い k={k} 列は選べません", group=label, rank=rank, k=k)


def pivoted_selection(arrays: Sequence[np.ndarray], k: int, variant: str, labels: Sequence[str] = ("A", "B")) -> Tuple[Tuple[int, ...], FairQrState]:
    """High/Low の共通ループ。返す列集合は最終置換の先頭 k 列"""
    if variant not in (HIGH, LOW):
        raise PreconditionError(f"未知のバリアントです: {variant}")
    _check_rank(arrays, labels, k)
    factors = _initial_factors(arrays)
    n = arrays[0].shape[1]
    state = FairQrState(factors=factors, global_perm=np.arange(n))
    if variant == HIGH:
        for i in range(n, k, -1):
            _high_step(state, i)
    else:
        for i in range(k):
            _low_step(state, i)
    selected = tuple(sorted(int(j) for j in state.global_perm[:k]))
    logger.debug(f"{variant}-RRQR: {state.step} ステップで k={k} 列を選択 {list(selected)}")
    return selected, state


def fair_high_rrqr(data: GroupedData, k: int) -> Tuple[Tuple[int, ...], FairQrState]:
    return pivoted_selection([data.group_array(Group.A), data.group_array(Group.B)], k, HIGH)


def fair_low_rrqr(data: GroupedData, k: int) -> Tuple[Tuple[int, ...], FairQrState]:
    return pivoted_selection([data.group_array(Group.A), data.group_array(Group.B)], k, LOW)


def classic_high_rrqr(M, k: int) -> Tuple[Tuple[int, ...], FairQrState]:
    return pivoted_selection([np.asarray(M, dtype=np.float64)], k, HIGH, labels=("M",))


def classic_low_rrqr(M, k: int) -> Tuple[Tuple[int, ...], FairQrState]:
    return pivoted_selection([np.asarray(M, dtype=np.float64)], k, LOW, labels=("M",))
