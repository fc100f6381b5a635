import sys
from pathlib import Path

import pytest

sys.path.append(str(Path(__file__).parent.parent))

from modules.paths import SeedSpec, uniform_grid  # noqa: E402
from modules.physics import LangevinParams  # noqa: E402


@pytest.fixture
def seed():
    return SeedSpec(20240531)


@pytest.fixture
def unit_grid():
    return uniform_grid(0.0, 1.0, 1024)


@pytest.fixture
def unit_params():
    return LangevinParams(m=1.0, gamma=1.0, sigma=1.0)
