import sys
from pathlib import Path

import pytest

DATA = Path(__file__).parent / "data"
sys.path.insert(0, str(Path(__file__).parent))

from hetero_islands.core import Rng


@pytest.fixture
def data_dir() -> Path:
    return DATA


@pytest.fixture
def rng() -> Rng:
    return Rng("test")


class FixedPy:
    """Scripted stand-in for the scalar random stream."""

    def __init__(self, ints=(), floats=()):
        self._ints = list(ints)
        self._floats = list(floats)

    def randrange(self, *args):
        return self._ints.pop(0)

    def randint(self, *args):
        return self._ints.pop(0)

    def random(self):
        return self._floats.pop(0)

    def uniform(self, a, b):
        return self._floats.pop(0)


class FixedRng:
    """Rng whose scalar stream replays scripted values (vector stream real)."""

    def __init__(self, ints=(), floats=()):
        self.py = FixedPy(ints, floats)
        self.np = Rng("fixed").np
