import pytest
import sys
import os
from pathlib import Path

import numpy as np

# Add the parent directory to sys.path
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

# Keep every test on the CPU regardless of the caller's environment
os.environ["GEOSEG_DEVICE"] = "cpu"

from datakit import TileSample  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running training or benchmark checks")


def make_tile(image: np.ndarray, mask: np.ndarray, source_id: str = "t", offset=(0, 0)) -> TileSample:
    """Build a TileSample with its coverage filled in."""
    return TileSample(
        image=image,
        mask=mask,
        source_id=source_id,
        offset=offset,
        coverage=int(mask.sum()) / mask.size,
    )


@pytest.fixture
def rng():
    """A seeded random generator."""
    return np.random.default_rng(1234)


@pytest.fixture
def tile_maker():
    """Factory for hand-built tiles."""
    return make_tile
