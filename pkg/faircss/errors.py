"""エラー定義と終了コードの対応"""
from enum import IntEnum


class ExitCode(IntEnum):
    OK = 0
    UNKNOWN = 1
    USAGE = 2
    IO = 3
    PRECONDITION = 4
    INFEASIBLE = 5
    BUDGET = 6
    NUMERICAL = 7


class FairCssError(Exception):
    """本ツールが送出する全エラーの基底クラス"""
    exit_code = ExitCode.UNKNOWN


class InputError(FairCssError):
    exit_code = ExitCode.IO


class MissingFileError(InputError):
    def __init__(self, path):
        super().__init__(f"ファイルが見つかりません: {path}")
        self.path = str(path)


class MissingGroupColumnError(InputError):
    def __init__(self, column, available):
        super().__init__(f"グループ列 '{column}' がありません（列: {', '.join(available)}）")
        self.column = column


class UnparseableValueError(InputError):
    """数値に変換できない値。diagnostics は (行, 列, 値) のリスト"""

    def __init__(self, diagnostics):
        preview = "; ".join(f"行{row} 列'{col}': {value!r}" for row, col, value in diagnostics[:5])
        more = f" ほか{len(diagnostics) - 5}件" if len(diagnostics) > 5 else ""
        super().__init__(f"数値に変換できない値があります: {preview}{more}")
        self.diagnostics = list(diagnostics)


class NonNumericResidueError(InputError):
    def __init__(self, columns):
        super().__init__(f"エンコード後に有限でない値が残っています: {', '.join(columns)}")
        self.columns = list(columns)


class SchemaVersionError(InputError):
    pass


class PreconditionError(FairCssError):
    exit_code = ExitCode.PRECONDITION


class EmptyGroupError(PreconditionError):
    def __init__(self, group):
        super().__init__(f"グループ {group} が空です")
        self.group = group


class RankError(PreconditionError):
    """ランク条件（k と rank(A), rank(B) の関係）違反"""

    def __init__(self, message, group=None, rank=None, k=None):
        super().__init__(message)
        self.group = group
        self.rank = rank
        self.k = k


class InfeasibleError(FairCssError):
    exit_code = ExitCode.INFEASIBLE


class ThresholdShortfallError(InfeasibleError):
    pass


class StageOneTooSmallError(InfeasibleError):
    def __init__(self, selected, k):
        super().__init__(
            f"第1段階の列数 {selected} が k={k} 未満です。より大きな θ を指定してください"
        )
        self.selected = selected
        self.k = k


class BudgetExceededError(FairCssError):
    exit_code = ExitCode.BUDGET

    def __init__(self, count, budget):
        super().__init__(f"列挙数 {count} が上限 {budget} を超えています")
        self.count = count
        self.budget = budget


class DecompositionError(FairCssError):
    exit_code = ExitCode.NUMERICAL


def exit_code_for(exc: BaseException) -> int:
    """例外から終了コードを決定"""
    if isinstance(exc, FairCssError):
        return int(exc.exit_code)
    if isinstance(exc, (FileNotFoundError, PermissionError, IsADirectoryError)):
        return int(ExitCode.IO)
    return int(ExitCode.UNKNOWN)
