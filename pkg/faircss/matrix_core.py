"""
密行列の基本演算

SVD、列ピボット付きQR、射影残差、フロベニウスノルムなど、
全アルゴリズムの土台となる関数をまとめています。
行列は列優先（Fortran順）の float64 配列として保持します。
"""
from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.linalg
from loguru import logger

from .errors import DecompositionError, PreconditionError

RECONSTRUCTION_TOLERANCE = 1e-8
ORTHOGONALITY_TOLERANCE = 1e-8
TRIANGULAR_TOLERANCE = 1e-10

EPS = np.finfo(np.float64).eps


@dataclass(frozen=True)
class DenseMatrix:
    """有限な実数の密行列（列優先・読み取り専用）"""
    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64, order="F", copy=True)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise PreconditionError(f"2次元の非空行列が必要です: shape={arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise PreconditionError("行列に NaN または Inf が含まれています")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape

    def __array__(self, dtype=None, copy=None):
        if dtype is not None:
            return self.values.astype(dtype)
        return self.values


MatrixLike = Union[DenseMatrix, np.ndarray]


def as_array(M: MatrixLike) -> np.ndarray:
    """DenseMatrix / ndarray を検証済みの float64 配列に変換"""
    if isinstance(M, DenseMatrix):
        return M.values
    return DenseMatrix(M).values


@dataclass(frozen=True)
class SvdResult:
    """薄いSVD（数値ランク ρ で打ち切り済み）"""
    u: np.ndarray
    singular_values: np.ndarray
    vt: np.ndarray

    @property
    def rank(self) -> int:
        return len(self.singular_values)


@dataclass(frozen=True)
class PivotedQR:
    """M[:, perm] = Q R"""
    q: np.ndarray
    r: np.ndarray
    perm: np.ndarray


def rank_tolerance(shape, sigma_max: float) -> float:
    return max(shape) * EPS * sigma_max


def _raw_svd(a: np.ndarray, full_matrices: bool = False):
    try:
        return scipy.linalg.svd(a, full_matrices=full_matrices, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        logger.debug("gesdd が収束しませんでした。gesvd で再試行します")
    try:
        return scipy.linalg.svd(a, full_matrices=full_matrices, lapack_driver="gesvd")
    except np.linalg.LinAlgError as e:
        raise DecompositionError(f"SVD が収束しませんでした: shape={a.shape}") from e


def singular_values(M: MatrixLike) -> np.ndarray:
    a = as_array(M)
    try:
        return scipy.linalg.svdvals(a)
    except np.linalg.LinAlgError as e:
        raise DecompositionError(f"特異値の計算に失敗しました: shape={a.shape}") from e


def svd(M: MatrixLike) -> SvdResult:
    """薄いSVD。rank_tolerance 以下の特異値は捨てる"""
    a = as_array(M)
    u, s, vt = _raw_svd(a)
    if s.size == 0 or s[0] == 0.0:
        rho = 0
    else:
        rho = int(np.count_nonzero(s > rank_tolerance(a.shape, s[0])))
    return SvdResult(u=u[:, :rho], singular_values=s[:rho], vt=vt[:rho, :])


def numeric_rank(M: MatrixLike) -> int:
    s = singular_values(M)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rank_tolerance(np.shape(M), s[0])))


def best_rank_k_error(M: MatrixLike, k: int) -> float:
    """‖M − M_k‖_F = sqrt(Σ_{i>k} σ_i²)"""
    if k <= 0:
        raise PreconditionError(f"k は正の整数です: {k}")
    s = singular_values(M)
    if s.size == 0 or s[0] == 0.0:
        return 0.0
    # 数値ランク以下の特異値は0とみなす
    tail = s[k:]
    tail = tail[tail > rank_tolerance(np.shape(M), s[0])]
    return float(np.sqrt(np.sum(tail ** 2)))


def orthonormal_basis(C: np.ndarray) -> np.ndarray:
    """C の列空間の正規直交基底（数値的に独立な方向のみ）"""
    if C.shape[1] == 0:
        return np.zeros((C.shape[0], 0))
    u, s, _ = _raw_svd(C)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((C.shape[0], 0))
    rho = int(np.count_nonzero(s > rank_tolerance(C.shape, s[0])))
    return u[:, :rho]


def projection_residual(M: MatrixLike, C: MatrixLike) -> float:
    """‖M − C C⁺ M‖_F を C の正規直交基底から計算"""
    m = as_array(M)
    c = np.asarray(C, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != m.shape[0]:
        raise PreconditionError(f"C の行数が M と一致しません: {c.shape} vs {m.shape}")
    if c.shape[1] == 0:
        raise PreconditionError("C に列がありません")
    q = orthonormal_basis(c)
    residual = m - q @ (q.T @ m)
    value = float(np.linalg.norm(residual, "fro"))
    return min(max(value, 0.0), float(np.linalg.norm(m, "fro")))


def column_residual(M: MatrixLike, columns) -> float:
    """M 自身の列 columns で張る空間への射影残差"""
    m = as_array(M)
    return projection_residual(m, m[:, list(columns)])


def pivoted_qr(M: MatrixLike) -> PivotedQR:
    """列ノルム最大ピボットのQR。R の対角は非負にそろえる"""
    a = as_array(M)
    try:
        q, r, perm = scipy.linalg.qr(a, mode="economic", pivoting=True)
    except np.linalg.LinAlgError as e:
        raise DecompositionError(f"ピボット付きQRに失敗しました: shape={a.shape}") from e
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    r = signs[:, None] * r
    q = q * signs[None, :]
    return PivotedQR(q=q, r=r, perm=np.asarray(perm, dtype=int))


def is_upper_triangular(R: np.ndarray, tol: float = TRIANGULAR_TOLERANCE) -> bool:
    if R.size == 0:
        return True
    scale = max(float(np.max(np.abs(R))), 1.0e-300)
    return bool(np.all(np.abs(np.tril(R, -1)) <= tol * scale))


def has_orthonormal_columns(Q: np.ndarray, tol: float = ORTHOGONALITY_TOLERANCE) -> bool:
    gram = Q.T @ Q
    return bool(np.allclose(gram, np.eye(Q.shape[1]), atol=tol, rtol=0.0))
