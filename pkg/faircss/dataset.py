"""
データセットの読み込みと前処理

CSV を読み込み、保護属性の除去・カテゴリ変数の one-hot 化・列の単位ノルム化を行い、
行をグループ A / B に分割した GroupedData を作ります。
"""
import hashlib
import json
import os
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger
from packaging import version

from .errors import (
    EmptyGroupError,
    InputError,
    MissingFileError,
    MissingGroupColumnError,
    NonNumericResidueError,
    PreconditionError,
    SchemaVersionError,
    UnparseableValueError,
)
from .matrix_core import DenseMatrix

DATA_SCHEMA_VERSION = "1.0"
UNIT_NORM_TOLERANCE = 1e-10


class Group(str, Enum):
    A = "A"
    B = "B"

    @classmethod
    def parse(cls, tag) -> "Group":
        if isinstance(tag, cls):
            return tag
        try:
            return cls(str(tag).strip().upper())
        except ValueError as e:
            raise PreconditionError(f"グループ指定が不正です: {tag!r}（A または B）") from e


@dataclass(frozen=True)
class PreprocessSpec:
    """
    前処理の指定

    categorical_columns=None はカテゴリ列を自動判定（数値として読めるセルが1つもない列）。
    グループ列は常に特徴量から除く
    """
    group_column: str
    group_a_value: str
    protected_columns: Tuple[str, ...] = ()
    categorical_columns: Optional[Tuple[str, ...]] = None
    normalize: bool = True

    @classmethod
    def from_dict(cls, raw: dict) -> "PreprocessSpec":
        if "group_column" not in raw or "group_a_value" not in raw:
            raise InputError("前処理設定には group_column と group_a_value が必要です")
        categoricals = raw.get("categoricals", "auto")
        if categoricals == "auto" or categoricals is None:
            categoricals = None
        else:
            categoricals = tuple(categoricals)
        return cls(
            group_column=str(raw["group_column"]),
            group_a_value=str(raw["group_a_value"]),
            protected_columns=tuple(raw.get("protected", ())),
            categorical_columns=categoricals,
            normalize=bool(raw.get("normalize", True)),
        )

    @classmethod
    def from_json(cls, path: Union[str, os.PathLike]) -> "PreprocessSpec":
        if not os.path.exists(path):
            raise MissingFileError(path)
        try:
            with open(path, encoding="utf-8") as f:
                return cls.from_dict(json.load(f))
        except json.JSONDecodeError as e:
            raise InputError(f"前処理設定を解析できません: {path}: {e}") from e

    def to_dict(self) -> dict:
        return {
            "group_column": self.group_column,
            "group_a_value": self.group_a_value,
            "protected": list(self.protected_columns),
            "categoricals": "auto" if self.categorical_columns is None else list(self.categorical_columns),
            "normalize": self.normalize,
        }


@dataclass(frozen=True)
class GroupedData:
    """行列 M と行の2分割（グループ A / B）"""
    matrix: DenseMatrix
    group_a_rows: Tuple[int, ...]
    group_b_rows: Tuple[int, ...]
    column_names: Tuple[str, ...] = field(default=())
    name: str = "dataset"

    def __post_init__(self):
        if not isinstance(self.matrix, DenseMatrix):
            object.__setattr__(self, "matrix", DenseMatrix(self.matrix))
        a = tuple(int(i) for i in self.group_a_rows)
        b = tuple(int(i) for i in self.group_b_rows)
        object.__setattr__(self, "group_a_rows", a)
        object.__setattr__(self, "group_b_rows", b)
        if not a:
            raise EmptyGroupError("A")
        if not b:
            raise EmptyGroupError("B")
        if set(a) & set(b):
            raise PreconditionError("グループ A と B の行が重複しています")
        if sorted(a + b) != list(range(self.matrix.rows)):
            raise PreconditionError("グループ A と B の和集合が全行と一致しません")
        names = tuple(self.column_names) or tuple(f"c{j}" for j in range(self.matrix.cols))
        if len(names) != self.matrix.cols:
            raise PreconditionError(f"列名の数 {len(names)} が列数 {self.matrix.cols} と一致しません")
        object.__setattr__(self, "column_names", names)

    @property
    def n(self) -> int:
        return self.matrix.cols

    @property
    def m(self) -> int:
        return self.matrix.rows

    def rows_of(self, group) -> Tuple[int, ...]:
        return self.group_a_rows if Group.parse(group) is Group.A else self.group_b_rows

    def group_array(self, group) -> np.ndarray:
        return self.matrix.values[list(self.rows_of(group)), :]

    def restrict_columns(self, columns: Sequence[int]) -> "GroupedData":
        """列の部分集合に制限（正規化は再適用しない）"""
        cols = [int(j) for j in columns]
        if not cols:
            raise PreconditionError("列の部分集合が空です")
        return GroupedData(
            matrix=DenseMatrix(self.matrix.values[:, cols]),
            group_a_rows=self.group_a_rows,
            group_b_rows=self.group_b_rows,
            column_names=tuple(self.column_names[j] for j in cols),
            name=self.name,
        )

    @property
    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        # 形状と各グループの行数を先に入れ、分割位置の違いで衝突しないようにする
        digest.update(np.asarray((*self.matrix.shape, len(self.group_a_rows), len(self.group_b_rows)), dtype=np.int64).tobytes())
        digest.update(np.ascontiguousarray(self.matrix.values).tobytes())
        digest.update(np.asarray(self.group_a_rows, dtype=np.int64).tobytes())
        digest.update(np.asarray(self.group_b_rows, dtype=np.int64).tobytes())
        return digest.hexdigest()[:16]


def submatrix_rows(data: GroupedData, which_group) -> DenseMatrix:
    """グループの行だけを取り出す（列順は保持）"""
    return DenseMatrix(data.group_array(which_group))


def _parse_float(value: str) -> Optional[float]:
    try:
        return float(value)
    except (TypeError, ValueError):
        return None


def _is_categorical_column(series: pd.Series) -> bool:
    # 1つでも数値として読めるセルがあれば数値列として扱う（残りは診断対象）
    filled = [v for v in series if v != ""]
    return bool(filled) and all(_parse_float(v) is None for v in filled)


def _one_hot(series: pd.Series, column: str) -> pd.DataFrame:
    # カテゴリの順序はファイル内の初出順
    categories = pd.unique(series)
    encoded = pd.get_dummies(pd.Categorical(series, categories=categories), dtype=np.float64)
    encoded.columns = [f"{column}={cat}" for cat in categories]
    encoded.index = series.index
    return encoded


def load_csv(path: Union[str, os.PathLike], spec: PreprocessSpec, name: Optional[str] = None) -> GroupedData:
    """CSV を読み込み、前処理してグループ分割する"""
    if not os.path.exists(path):
        raise MissingFileError(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise InputError(f"CSV を解析できません: {path}: {e}") from e
    frame.columns = [str(c).strip() for c in frame.columns]
    frame = frame.apply(lambda s: s.str.strip())

    if spec.group_column not in frame.columns:
        raise MissingGroupColumnError(spec.group_column, list(frame.columns))
    group_values = frame[spec.group_column]
    missing_group = [int(i) for i in np.flatnonzero(group_values.to_numpy() == "")]
    if missing_group:
        raise UnparseableValueError([(i, spec.group_column, "") for i in missing_group])
    in_a = (group_values == spec.group_a_value).to_numpy()
    if not in_a.any():
        raise EmptyGroupError("A")
    if in_a.all():
        raise EmptyGroupError("B")

    excluded = set(spec.protected_columns) | {spec.group_column}
    unknown_protected = sorted(set(spec.protected_columns) - set(frame.columns))
    if unknown_protected:
        logger.warning(f"存在しない保護属性を無視します: {', '.join(unknown_protected)}")
    feature_columns = [c for c in frame.columns if c not in excluded]
    if spec.categorical_columns is None:
        categoricals = {c for c in feature_columns if _is_categorical_column(frame[c])}
    else:
        categoricals = set(spec.categorical_columns)
        missing = sorted(categoricals - set(frame.columns))
        if missing:
            raise InputError(f"カテゴリ列が見つかりません: {', '.join(missing)}")

    parts = []
    diagnostics = []
    for column in feature_columns:
        if column in categoricals:
            parts.append(_one_hot(frame[column], column))
            continue
        parsed = pd.to_numeric(frame[column], errors="coerce")
        for row in np.flatnonzero(parsed.isna().to_numpy()):
            diagnostics.append((int(row), column, frame[column].iloc[row]))
        parts.append(parsed.astype(np.float64).to_frame(column))
    if diagnostics:
        raise UnparseableValueError(diagnostics)
    if not parts:
        raise InputError("特徴量の列がありません")

    features = pd.concat(parts, axis=1)
    values = features.to_numpy(dtype=np.float64)
    bad = [c for c, ok in zip(features.columns, np.isfinite(values).all(axis=0)) if not ok]
    if bad:
        raise NonNumericResidueError(bad)
    if spec.normalize:
        values = normalize_columns(values, list(features.columns))

    rows = np.arange(values.shape[0])
    data = GroupedData(
        matrix=DenseMatrix(values),
        group_a_rows=tuple(rows[in_a]),
        group_b_rows=tuple(rows[~in_a]),
        column_names=tuple(str(c) for c in features.columns),
        name=name or Path(path).stem,
    )
    logger.info(f"データを読み込みました: {data.name} n={data.n} m_A={len(data.group_a_rows)} m_B={len(data.group_b_rows)}")
    return data


def normalize_columns(values: np.ndarray, names: Optional[List[str]] = None) -> np.ndarray:
    """全行（グループ分割前）で各列を単位 L2 ノルムにする"""
    norms = np.linalg.norm(values, axis=0)
    zero = norms == 0.0
    if zero.any():
        labels = [names[j] if names else str(j) for j in np.flatnonzero(zero)]
        logger.warning(f"⚠️ ノルム0の列は正規化しません: {', '.join(labels)}")
    scale = np.where(zero, 1.0, norms)
    return values / scale[None, :]


def save_grouped(data: GroupedData, path: Union[str, os.PathLike]) -> str:
    """npz 形式で保存（スキーマバージョン付き）"""
    path = str(path)
    np.savez(
        path,
        schema_version=np.array(DATA_SCHEMA_VERSION),
        values=data.matrix.values,
        group_a_rows=np.asarray(data.group_a_rows, dtype=np.int64),
        group_b_rows=np.asarray(data.group_b_rows, dtype=np.int64),
        column_names=np.asarray(data.column_names, dtype=np.str_),
        name=np.array(data.name),
    )
    return path if path.endswith(".npz") else path + ".npz"


def load_grouped(path: Union[str, os.PathLike]) -> GroupedData:
    if not os.path.exists(path):
        raise MissingFileError(path)
    with np.load(path, allow_pickle=False) as archive:
        if "schema_version" not in archive:
            raise SchemaVersionError(f"スキーマバージョンがありません: {path}")
        found = version.parse(str(archive["schema_version"]))
        if found.major != version.parse(DATA_SCHEMA_VERSION).major:
            raise SchemaVersionError(f"非対応のスキーマバージョン {found}（対応: {DATA_SCHEMA_VERSION}）")
        return GroupedData(
            matrix=DenseMatrix(archive["values"]),
            group_a_rows=tuple(archive["group_a_rows"].tolist()),
            group_b_rows=tuple(archive["group_b_rows"].tolist()),
            column_names=tuple(str(c) for c in archive["column_names"]),
            name=str(archive["name"]),
        )


def read_matrix_csv(path: Union[str, os.PathLike]) -> DenseMatrix:
    """ヘッダなしの数値CSVを行列として読む"""
    if not os.path.exists(path):
        raise MissingFileError(path)
    try:
        values = pd.read_csv(path, header=None, dtype=np.float64).to_numpy()
    except ValueError as e:
        raise InputError(f"数値行列として読めません: {path}: {e}") from e
    return DenseMatrix(values)


# --- 合成データ ---

def random_grouped(m_a: int, m_b: int, n: int, seed=None, normalize: bool = True) -> GroupedData:
    """ガウス乱数の行列（先頭 m_a 行がグループ A）"""
    rng = np.random.default_rng(seed)
    values = rng.standard_normal((m_a + m_b, n))
    if normalize:
        values = normalize_columns(values)
    return GroupedData(
        matrix=DenseMatrix(values),
        group_a_rows=tuple(range(m_a)),
        group_b_rows=tuple(range(m_a, m_a + m_b)),
        name=f"random-{m_a}x{m_b}x{n}",
    )


def duplicate_groups(matrix) -> GroupedData:
    """A = B となるように行列を縦に2回積む"""
    values = np.asarray(matrix, dtype=np.float64)
    m = values.shape[0]
    return GroupedData(
        matrix=DenseMatrix(np.vstack([values, values])),
        group_a_rows=tuple(range(m)),
        group_b_rows=tuple(range(m, 2 * m)),
        name="duplicate",
    )


def block_diagonal_witness(k: int, gap: float = 1e3, block: Optional[int] = None) -> GroupedData:
    """
    diag(A, B) 型のブロック対角行列

    A, B はともに block×block の対角行列で、特異値は
    [gap, ..., gap (k個), 1, ..., 1]。列は A 側 block 本、B 側 block 本。
    上位 k 個と残りの比 gap が大きいほど、2k 本未満の選択では
    どちらかのグループの Nloss が gap/sqrt(block-k) 以上になる
    """
    if k < 1:
        raise PreconditionError(f"k は正の整数です: {k}")
    block = block if block is not None else k + 1
    if block <= k:
        raise PreconditionError("ブロックサイズは k より大きい必要があります")
    spectrum = np.ones(block)
    spectrum[:k] = gap
    values = np.zeros((2 * block, 2 * block))
    values[:block, :block] = np.diag(spectrum)
    values[block:, block:] = np.diag(spectrum)
    return GroupedData(
        matrix=DenseMatrix(values),
        group_a_rows=tuple(range(block)),
        group_b_rows=tuple(range(block, 2 * block)),
        name=f"block-diagonal-k{k}",
    )
