"""実行設定（settings.json + 環境変数）"""
import json
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional

from loguru import logger

from .errors import InputError

DEFAULT_SETTINGS_PATH = Path(__file__).resolve().parent.parent / "settings.json"
DEFAULT_SEED = 20240517
WORKERS_ENV = "FAIRCSS_WORKERS"
SEED_ENV = "FAIRCSS_SEED"


@dataclass(frozen=True)
class Settings:
    seed: int = DEFAULT_SEED
    enumeration_budget: int = 10**8
    workers: int = 1
    random_repetitions: int = 100
    history_dir: str = "history"
    org: str = "defaultorg"
    log_level: str = "INFO"

    def __post_init__(self):
        if self.workers == 0 or self.workers < -1:
            raise InputError(f"workers は正の整数か -1 です: {self.workers}")
        if self.enumeration_budget < 1:
            raise InputError(f"enumeration_budget は1以上です: {self.enumeration_budget}")
        if self.random_repetitions < 1:
            raise InputError(f"random_repetitions は1以上です: {self.random_repetitions}")

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "Settings":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            logger.warning(f"未知の設定キーを無視します: {', '.join(unknown)}")
        values = {key: raw[key] for key in raw if key in known}
        try:
            return cls(**values)
        except TypeError as e:
            raise InputError(f"設定値が不正です: {e}") from e


def load_settings(path: Optional[os.PathLike] = None) -> Settings:
    """設定ファイルを読み込む。ファイルが無ければ既定値"""
    settings_path = Path(path) if path is not None else DEFAULT_SETTINGS_PATH
    if settings_path.exists():
        try:
            with open(settings_path, encoding="utf-8") as f:
                settings = Settings.from_dict(json.load(f))
        except json.JSONDecodeError as e:
            raise InputError(f"設定ファイルを解析できません: {settings_path}: {e}") from e
    else:
        if path is not None:
            logger.warning(f"設定ファイルがありません。既定値を使用します: {settings_path}")
        settings = Settings()
    return apply_env_overrides(settings)


def apply_env_overrides(settings: Settings) -> Settings:
    overrides = {}
    if os.environ.get(WORKERS_ENV):
        overrides["workers"] = _env_int(WORKERS_ENV)
    if os.environ.get(SEED_ENV):
        overrides["seed"] = _env_int(SEED_ENV)
    return replace(settings, **overrides) if overrides else settings


def _env_int(name: str) -> int:
    try:
        return int(os.environ[name])
    except ValueError as e:
        raise InputError(f"環境変数 {name} は整数である必要があります: {os.environ[name]!r}") from e
