import pytest

from lorenz_esn.esn import EchoStateNetwork, ReservoirConfig
from lorenz_esn.lorenz import default_pair_spec, generate_pair

SMALL = ReservoirConfig(n_units=120, washout=50, seed=3)


@pytest.fixture(scope="session")
def pair1():
    return generate_pair(default_pair_spec(1), 42)


@pytest.fixture(scope="session")
def pair1_model(pair1):
    return EchoStateNetwork().fit(pair1.train[0])


@pytest.fixture(scope="session")
def short_lorenz(pair1):
    """2000 on-attractor steps for cheap small-reservoir tests."""
    return pair1.train[0][:2000]


ACCEPTANCE: dict[int, str] = {}


def record(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
