import numpy as np
import pytest

from tdks1d.grid import SpatialGrid
from tdks1d.groundstate import solve_ground_state
from tdks1d.potentials import IonicLattice

SMALL_CONFIG = """
grid.n_points = 400
lattice.n_ions = 8
ground.n_orbitals = 4
ground.n_unoccupied = 2
drive.n_cyc = 2
drive.omega = 0.15
drive.a0 = 0.05
propagation.post_pulse = 200
kick.T_record = 400
spectrum.orbitals = 3,4
scan.a0 = 0.03,0.04,0.05
scan.ati_level = 4
scan.plasmon_level = 4
scan.plasmon_omega = 0.2
scan.plasmon_order = 3
"""


@pytest.fixture(scope="session")
def small_grid():
    return SpatialGrid(400, 0.5)


@pytest.fixture(scope="session")
def small_lattice():
    return IonicLattice(8, 1.125, 1.0)


@pytest.fixture(scope="session")
def small_ground(small_grid, small_lattice):
    """8-electron chain on a 200 bohr box: seconds to converge."""
    return solve_ground_state(small_lattice, small_grid, 4, tol=1e-12)


@pytest.fixture(scope="session")
def ground():
    """The production 40-ion ground state."""
    return solve_ground_state(IonicLattice(), SpatialGrid(2000, 0.5), 20, tol=1e-12)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_report():
    """Collects one summary line per acceptance criterion; printed at the end of the run."""
    def report(number: int, ok: bool, text: str) -> bool:
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {number}. {text}")
        return ok
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("]")[1].split(".")[0])):
            terminalreporter.write_line(line)
