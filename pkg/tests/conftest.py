import numpy as np
import pytest

from vbma import mav, torus, vortex

ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def record(number: int, name: str, passed: bool, detail: str = "") -> None:
    ACCEPTANCE[number] = (name, bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        name, passed, detail = ACCEPTANCE[number]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {number:2d}. {name}: {detail}")


def smooth_field(grid, rng, amplitude=0.3, modes=3):
    """Random real trigonometric polynomial in the lattice coordinates."""
    s, t = grid.lattice_coords
    out = np.zeros_like(s)
    for p in range(-modes, modes + 1):
        for q in range(-modes, modes + 1):
            c = rng.normal() / (1 + p * p + q * q)
            phase = rng.uniform(0, 2 * np.pi)
            out += c * np.cos(2 * np.pi * (p * s + q * t) + phase)
    return amplitude * out / np.max(np.abs(out))


@pytest.fixture(scope="session")
def cfg32():
    return mav.VortexConfig(3, 2)


@pytest.fixture(scope="session")
def report32(cfg32):
    return mav.continuity_solve(cfg32)


@pytest.fixture(scope="session")
def report42():
    return mav.continuity_solve(mav.VortexConfig(4, 2))


@pytest.fixture(scope="session")
def sol32(report32):
    return vortex.VortexSolution.from_report(report32)


@pytest.fixture(scope="session")
def grid64():
    return torus.make_grid(1j, 64)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
