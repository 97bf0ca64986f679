import pytest

from lcsgeo.manifold_file import fixture_names, load_manifold, sample_points
from lcsgeo.lcs import derive_structure

TOL = 1e-9


@pytest.fixture(scope="session")
def lcs3():
    return load_manifold("fixtures/lcs3-example")


@pytest.fixture(scope="session")
def lcs3_points(lcs3):
    return sample_points(lcs3.manifold, lcs3.sampling)


@pytest.fixture(scope="session")
def lcs3_structure(lcs3, lcs3_points):
    return derive_structure(lcs3.manifold, lcs3.xi, lcs3_points, alpha=lcs3.alpha)


@pytest.fixture(scope="session")
def gaussian():
    return load_manifold("fixtures/euclidean3-gaussian")


@pytest.fixture(scope="session")
def minkowski():
    return load_manifold("fixtures/minkowski3")


@pytest.fixture(scope="session")
def all_fixtures():
    out = {}
    for name in fixture_names():
        loaded = load_manifold(f"fixtures/{name}")
        out[name] = (loaded, sample_points(loaded.manifold, loaded.sampling))
    return out


def at_z(z, x=0.0, y=0.0):
    return (x, y, float(z))


ACCEPTANCE_LINES: dict[str, str] = {}


def record(key: str, ok: bool, text: str) -> None:
    ACCEPTANCE_LINES[key] = f"[{'PASS' if ok else 'FAIL'}] {key}: {text}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: (len(k), k)):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
