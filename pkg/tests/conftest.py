"""
Shared fixtures: small clouds, fields and documents used across the test modules.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from shared.config import get_settings
from shared.numerics.funcspace import SampleCloud

ROOT = Path(__file__).resolve().parents[1]
PROBLEMS = ROOT / "problems"


@pytest.fixture(autouse=True)
def _fresh_settings(monkeypatch):
    monkeypatch.delenv("CHECK_THREADS", raising=False)
    monkeypatch.delenv("TOLERANCE_SCALE", raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def line_cloud() -> SampleCloud:
    return SampleCloud.grid(-2.0, 2.0, 9)


@pytest.fixture
def plane_cloud() -> SampleCloud:
    return SampleCloud.grid(-1.0, 1.0, 5, dim=2)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def problems_dir() -> Path:
    return PROBLEMS


@pytest.fixture
def write_document(tmp_path):
    """
    Write a document dict as JSON under tmp_path and return the path.
    """

    def _write(data: dict, name: str = "doc.json") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return path

    return _write
