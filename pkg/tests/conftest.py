import numpy as np
import pytest

from mobius_ot.mesh import TriMesh, normalize_area
from mobius_ot.synth import synth_surface

SQUARE_V = [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]]
SQUARE_F = [[0, 1, 2], [0, 2, 3]]


@pytest.fixture
def triangle():
    return TriMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])


@pytest.fixture
def square():
    return TriMesh(SQUARE_V, SQUARE_F)


@pytest.fixture
def tetrahedron():
    v = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]]
    f = [[0, 2, 1], [0, 1, 3], [1, 2, 3], [0, 3, 2]]
    return TriMesh(v, f)


_CACHE = {}


def synth(kind, res=16, **kw):
    """Cached, area-normalized synthetic surface."""
    key = (kind, res, tuple(sorted(kw.items())))
    if key not in _CACHE:
        _CACHE[key] = normalize_area(synth_surface(kind, res, **kw))[0]
    return _CACHE[key]


@pytest.fixture
def bump16():
    return synth("gaussian-bump", 16)


def random_disk(rng, n, radius=0.9):
    r = radius * np.sqrt(rng.random(n))
    return r * np.exp(2j * np.pi * rng.random(n))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
