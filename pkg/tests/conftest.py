"""
pytest 共通設定 — リポジトリ直下のフラットなモジュールを import できるようにする
"""
import os
import sys

import numpy as np
import pytest

_HERE = os.path.dirname(os.path.abspath(__file__))
_ROOT = os.path.dirname(_HERE)
sys.path = [_ROOT] + [p for p in sys.path if p != _ROOT]

DATA_DIR = os.path.join(_HERE, "data")


@pytest.fixture
def data_dir() -> str:
    return DATA_DIR


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


def random_unitary_columns(rng: np.random.Generator, n_rows: int, n_cols: int) -> np.ndarray:
    """QR で正規直交列の複素行列を作る"""
    z = rng.standard_normal((n_rows, n_rows)) + 1j * rng.standard_normal((n_rows, n_rows))
    q, r = np.linalg.qr(z)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    return q[:, :n_cols]
