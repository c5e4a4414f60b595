"""共通フィクスチャ"""
from pathlib import Path

import numpy as np
import pytest
from loguru import logger

from faircss.dataset import PreprocessSpec, duplicate_groups, load_csv, random_grouped
from faircss.evaluation import clear_denominator_cache

DATA_DIR = Path(__file__).resolve().parent / "data"
SPEC_DIR = Path(__file__).resolve().parent / "dataset_specs"


@pytest.fixture(autouse=True)
def _fresh_cache():
    clear_denominator_cache()
    yield


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def diag321():
    return np.diag([3.0, 2.0, 1.0])


@pytest.fixture
def small_grouped():
    """8×6（A: 4行, B: 4行）"""
    return random_grouped(4, 4, 6, seed=3)


@pytest.fixture
def diagonal_twins():
    """A = B = diag(5, 4, 3, 2, 1)"""
    return duplicate_groups(np.diag([5.0, 4.0, 3.0, 2.0, 1.0]))


@pytest.fixture
def warnings_log():
    """loguru の WARNING 以上のメッセージを集める"""
    messages = []
    handler_id = logger.add(lambda m: messages.append(m.record["message"]), level="WARNING")
    yield messages
    logger.remove(handler_id)


def _load_dataset(name: str):
    csv_path = DATA_DIR / f"{name}.csv"
    if not csv_path.exists():
        pytest.skip(f"{csv_path} がありません（公開データは同梱していません）")
    return load_csv(csv_path, PreprocessSpec.from_json(SPEC_DIR / f"{name}.json"), name=name)


@pytest.fixture(scope="session")
def heart_data():
    return _load_dataset("heart")


@pytest.fixture(scope="session")
def german_data():
    return _load_dataset("german")


@pytest.fixture(scope="session")
def clinic_data():
    """同梱の小さな合成データ（A: 男性10行, B: 女性8行）"""
    return _load_dataset("clinic")
