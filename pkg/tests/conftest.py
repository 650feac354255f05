import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make oracles importable

from tethernet.sampling import DoESample
from tethernet.scene import SceneConfig


@pytest.fixture
def desk_scene() -> SceneConfig:
    return SceneConfig.desk_scale()


@pytest.fixture
def nominal_doe() -> DoESample:
    return DoESample(30.0, (0.0, 0.0, 0.0), (0.0, 0.0, 0.0))
