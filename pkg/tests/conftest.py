"""
Shared fixtures: src on the path and the model charts
"""

import sys
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))

from metric_dsl import load_chart, parse_chart_text  # noqa: E402

CHARTS_DIR = Path(__file__).parent.parent / 'charts'


@lru_cache(maxsize=None)
def _model_chart(name: str):
    return load_chart(CHARTS_DIR / f"{name}.chart")


@pytest.fixture
def chart():
    """Loader for charts/<name>.chart, parsed once per session"""
    return _model_chart


@pytest.fixture
def chart_text():
    """Parse a chart given as lines"""
    def parse(*lines: str):
        return parse_chart_text("\n".join(lines) + "\n", "<test>")
    return parse


@pytest.fixture
def charts_dir() -> Path:
    return CHARTS_DIR


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)
