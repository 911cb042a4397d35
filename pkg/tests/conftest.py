"""Shared test fixtures."""

from collections.abc import Generator
from pathlib import Path

import numpy as np
import pytest

from tonellilab.debug import set_debug_level
from tonellilab.tonelli import Model, build_model


@pytest.fixture(autouse=True)
def isolated_cache(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> Path:
    """Point the result cache at a per-test directory."""
    cache_dir = tmp_path / "cache"
    monkeypatch.setenv("TONELLI_CACHE_DIR", str(cache_dir))
    return cache_dir


@pytest.fixture(autouse=True)
def quiet() -> Generator[None, None, None]:
    """Reset the debug level after tests that raise it."""
    yield
    set_debug_level(0)


@pytest.fixture
def rng() -> np.random.Generator:
    """Return a seeded random generator."""
    return np.random.default_rng(12345)


@pytest.fixture
def integrable() -> Model:
    """Return the free particle H = p^2 / 2 on the circle."""
    return build_model("integrable")


@pytest.fixture
def pendulum() -> Model:
    """Return the pendulum H = p^2 / 2 + cos(2 pi x)."""
    return build_model("pendulum")
