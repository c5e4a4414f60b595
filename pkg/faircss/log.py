"""ロガー設定（loguru）"""
import sys

from loguru import logger

LOG_FORMAT = "<green>{time:HH:mm:ss}</green> | <level>{level: <7}</level> | {name}:{function} - {message}"


def configure_logging(level: str = "INFO", sink=None) -> None:
    """既定のハンドラを外し、進捗ログを stderr に出す"""
    logger.remove()
    logger.add(sink if sink is not None else sys.stderr, level=level.upper(), format=LOG_FORMAT)
