import numpy as np
import pytest

from vortexnoise import build_lattice, random_solenoidal

ACCEPTANCE_LINES = []


def record_acceptance(name: str, passed: bool, details: str = "") -> None:
    status = "PASS" if passed else "FAIL"
    ACCEPTANCE_LINES.append(f"[{status}] {name}" + (f" :: {details}" if details else ""))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def lat4():
    return build_lattice(4)


@pytest.fixture(scope="session")
def lat6():
    return build_lattice(6)


def random_field(lat, seed, radius=None, decay=0.0):
    return random_solenoidal(lat, radius=radius, seed=seed, decay=decay)


def rel_err(a, b):
    den = max(np.abs(b).max(), 1e-300)
    return np.abs(a - b).max() / den
