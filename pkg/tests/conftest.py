import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lambrecon.prefactor import (
    family_free,
    family_gaussian,
    family_hydrogen,
    family_well,
)


@pytest.fixture
def free():
    return family_free()


@pytest.fixture
def gaussian():
    return family_gaussian()


@pytest.fixture
def well():
    return family_well()


@pytest.fixture
def hydrogen():
    return family_hydrogen()


@pytest.fixture
def all_families(free, gaussian, well, hydrogen):
    return {"free": free, "gaussian": gaussian, "well": well, "hydrogen": hydrogen}
