import numpy as np
import pytest

from wavespec.grid import make_grid, make_strip
from wavespec.params import Params
from wavespec.solitary import SolitaryWave, solve_solitary


@pytest.fixture(scope="session")
def small_wave():
    """Refined wave on a coarse grid; cheap enough for per-module tests."""
    return solve_solitary(Params(0.2, 0.5), Nx=128, Nz=16)


def zero_state(params=Params(0.1, 0.5), Lx=20.0, Nx=64, Nz=16):
    strip = make_strip(make_grid(Lx, Nx), Nz)
    return SolitaryWave(params, strip, np.zeros(Nx), np.zeros(Nx), 0.0)


@pytest.fixture
def flat_wave():
    return zero_state()


ACCEPTANCE_LINES = []


def record_criterion(number, name, passed, detail=""):
    """Store and echo one PASS/FAIL line; the full list is repeated in the terminal summary."""
    line = f"{'PASS' if passed else 'FAIL'} criterion {number:>2} {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
