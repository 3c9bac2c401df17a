from pathlib import Path

import numpy as np
import pytest

from haar_fluctuations.config import get_settings
from haar_fluctuations.model import ModelKind, ModelSpec
from haar_fluctuations.ncpoly import parse_polynomial
from haar_fluctuations.randmat import RngStream

SEED = 20240607
CONFIGS_DIR = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture(autouse=True)
def _isolated_env(monkeypatch, tmp_path):
    """No HAAR_* variables or .env leak between tests."""
    for name in ("HAAR_SEED", "HAAR_THREADS", "HAAR_OUT_DIR", "HAAR_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)
    monkeypatch.setenv("HAAR_OUT_DIR", str(tmp_path / "out"))
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def stream() -> RngStream:
    return RngStream(SEED)


@pytest.fixture
def gen() -> np.random.Generator:
    return RngStream(SEED, 99).generator()


@pytest.fixture
def configs_dir() -> Path:
    return CONFIGS_DIR


@pytest.fixture
def fig2_spec() -> ModelSpec:
    return ModelSpec(
        kind=ModelKind.CONJUGATION,
        alphas=(5, 2, 1),
        betas=(4, 3, -1),
        n=400,
        poly=parse_polynomial("x + y + x*y*x + y*x*y"),
    )


@pytest.fixture
def fig3_spec() -> ModelSpec:
    return ModelSpec(
        kind=ModelKind.CONJUGATION,
        alphas=(2, 1, -1),
        betas=(4, -0.2),
        n=400,
        poly=parse_polynomial("x + y + x*y + y*x + 0.5*x*y*x + 0.5*y*x*y"),
    )


@pytest.fixture
def rotation_spec() -> ModelSpec:
    return ModelSpec(kind=ModelKind.ROTATION, alphas=(4, 2, 1), n=400)


@pytest.fixture
def multiplicity_spec() -> ModelSpec:
    return ModelSpec(kind=ModelKind.SUM_CONJUGATION, alphas=(2, 2, 2), betas=(1, 1, -1), n=400)


@pytest.fixture
def shared_spec() -> ModelSpec:
    return ModelSpec(kind=ModelKind.SUM_CONJUGATION, alphas=(1, 1), betas=(1, 2), n=400)


@pytest.fixture
def equal_pairs_spec() -> ModelSpec:
    return ModelSpec(kind=ModelKind.SUM_CONJUGATION, alphas=(2, 3), betas=(2, 3), n=400)
